#include "vsplit/core/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace vsplit::kernels {

namespace {

inline void gemm_nn_row(const double* a, const double* b, double* c, std::size_t p, std::size_t q) {
  for (std::size_t k = 0; k < p; ++k) {
    const double aik = a[k];
    const double* brow = b + k * q;
    for (std::size_t j = 0; j < q; ++j) c[j] += aik * brow[j];
  }
}

inline void gemm_nt_row(const double* a, const double* b, double* c, std::size_t q, std::size_t p) {
  for (std::size_t j = 0; j < p; ++j) {
    const double* brow = b + j * q;
    double acc = 0.0;
    for (std::size_t k = 0; k < q; ++k) acc += a[k] * brow[k];
    c[j] += acc;
  }
}

// One output row k of A^T B: accumulates over i in ascending order.
inline void gemm_tn_row(const double* a, const double* b, double* c, std::size_t k, std::size_t n, std::size_t p,
                        std::size_t q) {
  for (std::size_t i = 0; i < n; ++i) {
    const double aik = a[i * p + k];
    const double* brow = b + i * q;
    for (std::size_t j = 0; j < q; ++j) c[j] += aik * brow[j];
  }
}

}  // namespace

namespace serial {

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) gemm_nn_row(a.data() + i * p, b.data(), c.data() + i * q, p, q);
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t q, std::size_t p, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) gemm_nt_row(a.data() + i * q, b.data(), c.data() + i * p, q, p);
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  // Row-major sweep over i keeps both inputs streaming; the per-element
  // summation order (i ascending) matches gemm_tn_row.
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.data() + i * p;
    const double* brow = b.data() + i * q;
    for (std::size_t k = 0; k < p; ++k) {
      const double aik = arow[k];
      double* crow = c.data() + k * q;
      for (std::size_t j = 0; j < q; ++j) crow[j] += aik * brow[j];
    }
  }
}

}  // namespace serial

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate) {
  if (n * p * q < kParallelThreshold || available_threads() == 1) {
    serial::gemm_nn(a, b, c, n, p, q, accumulate);
    return;
  }
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  const auto rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    gemm_nn_row(a.data() + r * p, b.data(), c.data() + r * q, p, q);
  }
}

void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t q, std::size_t p, bool accumulate) {
  if (n * p * q < kParallelThreshold || available_threads() == 1) {
    serial::gemm_nt(a, b, c, n, q, p, accumulate);
    return;
  }
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  const auto rows = static_cast<long long>(n);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    gemm_nt_row(a.data() + r * q, b.data(), c.data() + r * p, q, p);
  }
}

void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate) {
  if (n * p * q < kParallelThreshold || available_threads() == 1) {
    serial::gemm_tn(a, b, c, n, p, q, accumulate);
    return;
  }
  if (!accumulate) std::fill(c.begin(), c.end(), 0.0);
  const auto out_rows = static_cast<long long>(p);
#pragma omp parallel for schedule(static)
  for (long long k = 0; k < out_rows; ++k) {
    const auto r = static_cast<std::size_t>(k);
    gemm_tn_row(a.data(), b.data(), c.data() + r * q, r, n, p, q);
  }
}

int available_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace vsplit::kernels
