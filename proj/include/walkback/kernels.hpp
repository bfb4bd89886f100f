#pragma once

#include <cstddef>
#include <string>

namespace walkback::kernels {

// Data-parallel inner loops behind the network and operator math. Each kernel
// has a scalar reference implementation and an AVX2 variant; the active
// backend is chosen once at startup from CPU capabilities, or forced via the
// WALKBACK_KERNELS environment variable ("scalar" or "avx2"). SIMD results may
// differ from scalar in the last bits (FMA, reassociated reductions); the
// equivalence tests bound that difference.

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// y[i] += x[i]
void add(const double* x, double* y, std::size_t n);

// sum_i ((a[i] - b[i]) / s[i])^2
double sq_scaled_diff_sum(const double* a, const double* b, const double* s, std::size_t n);

// Name of the backend currently in use.
const std::string& backend();

// Force a backend by name. Returns false (leaving the selection unchanged)
// if the name is unknown or unavailable on this machine. Test hook; not
// thread-safe against concurrent kernel calls.
bool force_backend(const std::string& name);

bool avx2_available();

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void add(const double* x, double* y, std::size_t n);
double sq_scaled_diff_sum(const double* a, const double* b, const double* s, std::size_t n);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
void add(const double* x, double* y, std::size_t n);
double sq_scaled_diff_sum(const double* a, const double* b, const double* s, std::size_t n);
}  // namespace avx2
#endif

}  // namespace walkback::kernels
