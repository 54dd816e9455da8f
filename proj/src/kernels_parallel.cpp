#include "dyged/error.hpp"
#include "dyged/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dyged::kernels {

namespace detail {
void check_matmul(const Matrix& a, const Matrix& b, const char* what);
}

namespace parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  detail::check_matmul(a, b, "matmul");
  out = Matrix(a.rows(), b.cols());
  const long rows = static_cast<long>(a.rows());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  const double* bd = b.data().data();
  double* od = out.data().data();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    double* __restrict orow = od + i * n;
    for (std::size_t p = 0; p < inner; ++p) {
      const double aip = a(i, p);
      const double* __restrict brow = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  const long m = static_cast<long>(a.cols());
  const std::size_t n = b.cols();
  const double* bd = b.data().data();
  double* od = out.data().data();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < m; ++i) {
    double* __restrict orow = od + i * n;
    for (std::size_t p = 0; p < a.rows(); ++p) {
      const double api = a(p, i);
      const double* __restrict brow = bd + p * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += api * brow[j];
    }
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  const long rows = static_cast<long>(a.rows());
  const std::size_t inner = a.cols();
  const double* ad = a.data().data();
  const double* bd = b.data().data();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    const double* __restrict arow = ad + i * inner;
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* __restrict brow = bd + j * inner;
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
  const long rows = static_cast<long>(a.rows);
  const std::size_t n = b.cols();
  const double* bd = b.data().data();
  double* od = out.data().data();
#pragma omp parallel for schedule(static)
  for (long i = 0; i < rows; ++i) {
    double* __restrict orow = od + i * n;
    for (std::size_t p = a.row_ptr[i]; p < a.row_ptr[i + 1]; ++p) {
      const double v = a.values[p];
      const double* __restrict brow = bd + a.col_idx[p] * n;
      for (std::size_t j = 0; j < n; ++j) orow[j] += v * brow[j];
    }
  }
}

}  // namespace parallel

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace {

// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kParallelFlops = 1u << 16;

bool go_parallel(std::size_t flops) {
#ifdef _OPENMP
  return flops >= kParallelFlops && !omp_in_parallel() && omp_get_max_threads() > 1;
#else
  (void)flops;
  return false;
#endif
}

}  // namespace

void matmul(const Matrix& a, const Matrix& b, Matrix& out) {
  if (go_parallel(a.rows() * a.cols() * b.cols())) {
    parallel::matmul(a, b, out);
  } else {
    serial::matmul(a, b, out);
  }
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& out) {
  if (go_parallel(a.rows() * a.cols() * b.cols())) {
    parallel::matmul_tn(a, b, out);
  } else {
    serial::matmul_tn(a, b, out);
  }
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& out) {
  if (go_parallel(a.rows() * a.cols() * b.rows())) {
    parallel::matmul_nt(a, b, out);
  } else {
    serial::matmul_nt(a, b, out);
  }
}

void spmm(const SparseMatrix& a, const Matrix& b, Matrix& out) {
  if (go_parallel(a.nnz() * b.cols())) {
    parallel::spmm(a, b, out);
  } else {
    serial::spmm(a, b, out);
  }
}

}  // namespace dyged::kernels
