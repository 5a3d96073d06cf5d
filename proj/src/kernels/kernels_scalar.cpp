#include "epk/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace epk::kernels::scalar {

double dot(const double* a, const double* b, std::size_t n) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares(const double* a, std::size_t n) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * a[i];
    return acc;
}

double max_abs(const double* a, std::size_t n) noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(a[i]));
    return m;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void soft_threshold(const double* x, double* out, std::size_t n, double tau) noexcept {
    for (std::size_t i = 0; i < n; ++i) {
        const double mag = std::max(std::fabs(x[i]) - tau, 0.0);
        out[i] = std::copysign(mag, x[i]);
    }
}

void half_difference(const double* plus, const double* minus, double* out, std::size_t n) noexcept {
    for (std::size_t i = 0; i < n; ++i) out[i] = (plus[i] - minus[i]) * 0.5;
}

} // namespace epk::kernels::scalar
