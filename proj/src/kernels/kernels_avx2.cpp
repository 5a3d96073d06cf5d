// Compiled with -mavx2 -mfma. Only reached after a runtime CPU check.
#include "epk/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>

namespace epk::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d m = _mm_max_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_max_sd(m, _mm_unpackhi_pd(m, m)));
}

const __m256d kSignMask = _mm256_set1_pd(-0.0);

} // namespace

double dot(const double* a, const double* b, std::size_t n) noexcept {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum_squares(const double* a, std::size_t n) noexcept { return dot(a, a, n); }

double max_abs(const double* a, std::size_t n) noexcept {
    __m256d m = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        m = _mm256_max_pd(m, _mm256_andnot_pd(kSignMask, _mm256_loadu_pd(a + i)));
    double r = hmax(m);
    for (; i < n; ++i) r = std::max(r, std::fabs(a[i]));
    return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void soft_threshold(const double* x, double* out, std::size_t n, double tau) noexcept {
    const __m256d vt = _mm256_set1_pd(tau);
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d sign = _mm256_and_pd(kSignMask, v);
        const __m256d mag = _mm256_max_pd(_mm256_sub_pd(_mm256_andnot_pd(kSignMask, v), vt), zero);
        _mm256_storeu_pd(out + i, _mm256_or_pd(mag, sign));
    }
    for (; i < n; ++i) out[i] = std::copysign(std::max(std::fabs(x[i]) - tau, 0.0), x[i]);
}

void half_difference(const double* plus, const double* minus, double* out, std::size_t n) noexcept {
    const __m256d half = _mm256_set1_pd(0.5);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(plus + i), _mm256_loadu_pd(minus + i));
        _mm256_storeu_pd(out + i, _mm256_mul_pd(d, half));
    }
    for (; i < n; ++i) out[i] = (plus[i] - minus[i]) * 0.5;
}

} // namespace epk::kernels::avx2
