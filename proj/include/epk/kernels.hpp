#pragma once

// Data-parallel inner loops. Every kernel has a scalar reference version and,
// on x86-64, an AVX2/FMA version selected once at runtime. Both versions are
// reachable explicitly so tests can check them against each other.

#include <cstddef>
#include <span>
#include <string_view>

namespace epk::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_squares)(const double* a, std::size_t n);
    double (*max_abs)(const double* a, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = sign(x) * max(|x| - tau, 0)
    void (*soft_threshold)(const double* x, double* out, std::size_t n, double tau);
    // out = (plus - minus) / 2
    void (*half_difference)(const double* plus, const double* minus, double* out, std::size_t n);
};

/// Kernel table for a specific ISA. Requesting avx2 on a machine (or build)
/// without it returns the scalar table.
const KernelTable& table(Isa isa) noexcept;

bool isa_available(Isa isa) noexcept;

/// ISA picked at first use: avx2 when the CPU supports it, unless the
/// environment variable EPK_SIMD=scalar forces the reference path.
Isa active_isa() noexcept;

std::string_view isa_name(Isa isa) noexcept;

inline const KernelTable& active() noexcept { return table(active_isa()); }

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    return active().dot(a.data(), b.data(), a.size());
}
inline double sum_squares(std::span<const double> a) noexcept {
    return active().sum_squares(a.data(), a.size());
}
inline double max_abs(std::span<const double> a) noexcept {
    return active().max_abs(a.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
    active().axpy(alpha, x.data(), y.data(), x.size());
}
inline void soft_threshold(std::span<const double> x, std::span<double> out, double tau) noexcept {
    active().soft_threshold(x.data(), out.data(), x.size(), tau);
}
inline void half_difference(std::span<const double> plus, std::span<const double> minus,
                            std::span<double> out) noexcept {
    active().half_difference(plus.data(), minus.data(), out.data(), out.size());
}

namespace scalar {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum_squares(const double* a, std::size_t n) noexcept;
double max_abs(const double* a, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void soft_threshold(const double* x, double* out, std::size_t n, double tau) noexcept;
void half_difference(const double* plus, const double* minus, double* out, std::size_t n) noexcept;
} // namespace scalar

#if defined(EPK_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n) noexcept;
double sum_squares(const double* a, std::size_t n) noexcept;
double max_abs(const double* a, std::size_t n) noexcept;
void axpy(double alpha, const double* x, double* y, std::size_t n) noexcept;
void soft_threshold(const double* x, double* out, std::size_t n, double tau) noexcept;
void half_difference(const double* plus, const double* minus, double* out, std::size_t n) noexcept;
} // namespace avx2
#endif

} // namespace epk::kernels
