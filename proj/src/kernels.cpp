#include "walkback/kernels.hpp"

#include <cstdlib>

namespace walkback::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void add(const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += x[i];
}

double sq_scaled_diff_sum(const double* a, const double* b, const double* s, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = (a[i] - b[i]) / s[i];
        acc += t * t;
    }
    return acc;
}

}  // namespace scalar

bool avx2_available() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

struct Backend {
    std::string name;
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*add)(const double*, double*, std::size_t);
    double (*sq_scaled_diff_sum)(const double*, const double*, const double*, std::size_t);
};

const Backend kScalar{"scalar", scalar::dot, scalar::axpy, scalar::add,
                      scalar::sq_scaled_diff_sum};

#if defined(__x86_64__) || defined(_M_X64)
const Backend kAvx2{"avx2", avx2::dot, avx2::axpy, avx2::add, avx2::sq_scaled_diff_sum};
#endif

const Backend* by_name(const std::string& name) {
    if (name == "scalar") return &kScalar;
#if defined(__x86_64__) || defined(_M_X64)
    if (name == "avx2" && avx2_available()) return &kAvx2;
#endif
    return nullptr;
}

const Backend* initial_backend() {
    if (const char* env = std::getenv("WALKBACK_KERNELS")) {
        if (const Backend* b = by_name(env)) return b;
    }
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_available()) return &kAvx2;
#endif
    return &kScalar;
}

const Backend*& active() {
    static const Backend* b = initial_backend();
    return b;
}

}  // namespace

const std::string& backend() { return active()->name; }

bool force_backend(const std::string& name) {
    if (const Backend* b = by_name(name)) {
        active() = b;
        return true;
    }
    return false;
}

double dot(const double* a, const double* b, std::size_t n) {
    return active()->dot(a, b, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    active()->axpy(a, x, y, n);
}

void add(const double* x, double* y, std::size_t n) { active()->add(x, y, n); }

double sq_scaled_diff_sum(const double* a, const double* b, const double* s, std::size_t n) {
    return active()->sq_scaled_diff_sum(a, b, s, n);
}

}  // namespace walkback::kernels
