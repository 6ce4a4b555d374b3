#pragma once

#include <cstddef>

namespace vitask::numerics::kernels {

// Accumulating dense kernels on raw row-major buffers. Loop order is fixed,
// so results are reproducible run to run.

/// c[m,n] += a[m,k] * b[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
/// c[m,n] += a[m,k] * b[n,k]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);
/// c[k,n] += a[m,k]^T * b[m,n]
void gemm_tn(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n);

double dot(const double* a, const double* b, std::size_t n);

}  // namespace vitask::numerics::kernels
