#pragma once

#include "dyged/matrix.hpp"

// Dense and sparse product kernels. `serial` is the reference; `parallel` is
// the OpenMP version and must agree with it bit-for-bit (each output entry is
// reduced in the same order, only rows are distributed across threads).
namespace dyged::kernels {

namespace serial {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);     // out = a·b
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);  // out += aᵀ·b
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);  // out += a·bᵀ
void spmm(const SparseMatrix& a, const Matrix& b, Matrix& out);  // out = a·b
}  // namespace serial

namespace parallel {
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void spmm(const SparseMatrix& a, const Matrix& b, Matrix& out);
}  // namespace parallel

/// Number of OpenMP threads available (1 without OpenMP).
int max_threads();

// Dispatchers used by the tape: parallel above a flop threshold, serial below.
void matmul(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out);
void spmm(const SparseMatrix& a, const Matrix& b, Matrix& out);

}  // namespace dyged::kernels
