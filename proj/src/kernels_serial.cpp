#include "dyged/error.hpp"
#include "dyged/kernels.hpp"

namespace dyged::kernels {

namespace detail {

void check_matmul(const Matrix& a, const Matrix& b, const char* what) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::dimension,
         std::string(what) + ": cannot multiply " + a.shape_str() + " by " + b.shape_str());
  }
}

}  // namespace detail

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  detail::check_matmul(a, b, "matmul");
  out = Matrix(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* __restrict orow = out.data().data() + i * n;
    for (std::size_t p = 0; p < inner; ++p) {
      const double aip = a(i, p);
      const double* __restrict brow = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t m = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    double* __restrict orow = out.data().data() + i * n;
    for (std::size_t p = 0; p < a.rows(); ++p) {
      const double api = a(p, i);
      const double* __restrict brow = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += api * brow[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* __restrict arow = a.data().data() + i * inner;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* __restrict brow = b.data().data() + j * inner;
      double acc = 0.0;
      for (std::size_t p = 0; p < inner; ++p) acc += arow[p] * brow[p];
      out(i, j) += acc;
    }
  }
}

void spmm(const SparseMatrix& a, const Matrix& b, Matrix& out) {
  if (a.cols != b.rows()) {
    fail(ErrorKind::dimension,
         "spmm: cannot multiply " + shape_str(a.rows, a.cols) + " by " + b.shape_str());
  }
  out = Matrix(a.rows, b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* __restrict orow = out.data().data() + i * n;
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const double v = a.values[p];
      const double* __restrict brow = b.data().data() + a.col_idx[p] * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += v * brow[j];
    }
  }
}

}  // namespace serial
}  // namespace dyged::kernels
