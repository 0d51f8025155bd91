#pragma once

#include <cstddef>
#include <span>

// Dense matrix kernels used by the differentiable ops. Every kernel has a
// serial reference in `serial::` and an OpenMP version at namespace scope.
// Parallel versions only split work across output rows, so each output
// element is accumulated in the same order as the reference and the two
// agree bit for bit.

namespace vsplit::kernels {

/// Work size (multiply-adds) below which the OpenMP versions stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 15;

namespace serial {

/// C[n x q] (+)= A[n x p] * B[p x q]
void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate);
/// C[n x p] (+)= A[n x q] * B[p x q]^T
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t q, std::size_t p, bool accumulate);
/// C[p x q] (+)= A[n x p]^T * B[n x q]
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate);

}  // namespace serial

void gemm_nn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate);
void gemm_nt(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t q, std::size_t p, bool accumulate);
void gemm_tn(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t n,
             std::size_t p, std::size_t q, bool accumulate);

/// Threads OpenMP will use for the parallel kernels (1 when built without it).
int available_threads();

}  // namespace vsplit::kernels
