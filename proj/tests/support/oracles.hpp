#pragma once

// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the code under test except for plain data
// types.

#include "epk/detections.hpp"
#include "epk/image.hpp"
#include "epk/matrix.hpp"
#include "epk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace epk::test {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = scale * rng.normal();
    return m;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// non-increasing.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.rbegin(), ev.rend());
    return ev;
}

/// Singular values via the eigenvalues of the smaller Gram matrix.
inline std::vector<double> gram_singular_values(const Matrix& m) {
    const bool tall = m.rows() >= m.cols();
    const std::size_t n = tall ? m.cols() : m.rows();
    Matrix g(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            if (tall)
                for (std::size_t k = 0; k < m.rows(); ++k) s += m(k, i) * m(k, j);
            else
                for (std::size_t k = 0; k < m.cols(); ++k) s += m(i, k) * m(j, k);
            g(i, j) = s;
        }
    auto ev = jacobi_eigenvalues(g);
    for (double& v : ev) v = std::sqrt(std::max(v, 0.0));
    return ev;
}

inline Matrix naive_product(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

inline double frob_diff(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a.values()[i] - b.values()[i];
        s += d * d;
    }
    return std::sqrt(s);
}

/// Sum of value-noise octaves in [0.1, 0.9]; rich enough texture for
/// Lucas–Kanade at every pixel.
inline double texture_value(double x, double y, std::uint64_t seed) {
    auto lattice = [seed](long ix, long iy, int octave) {
        const std::uint64_t h = Rng::mix(seed ^ Rng::mix(static_cast<std::uint64_t>(ix) * 0x9E3779B1ULL +
                                                         static_cast<std::uint64_t>(iy) * 0x85EBCA77ULL +
                                                         static_cast<std::uint64_t>(octave)));
        return static_cast<double>(h >> 11) * 0x1.0p-53;
    };
    double v = 0.0, norm = 0.0, amp = 1.0, cell = 6.0;
    for (int o = 0; o < 3; ++o) {
        const double fx = x / cell, fy = y / cell;
        const long x0 = static_cast<long>(std::floor(fx)), y0 = static_cast<long>(std::floor(fy));
        const double tx = fx - x0, ty = fy - y0;
        const double sx = tx * tx * (3 - 2 * tx), sy = ty * ty * (3 - 2 * ty);
        const double a = lattice(x0, y0, o), b = lattice(x0 + 1, y0, o);
        const double c = lattice(x0, y0 + 1, o), d = lattice(x0 + 1, y0 + 1, o);
        v += amp * ((a * (1 - sx) + b * sx) * (1 - sy) + (c * (1 - sx) + d * sx) * sy);
        norm += amp;
        amp *= 0.5;
        cell *= 0.5;
    }
    return 0.1 + 0.8 * v / norm;
}

/// Frame showing a textured patch of the given size with its top-left corner
/// at (px, py) on a flat background.
inline GrayFrame patch_frame(std::size_t w, std::size_t h, const std::vector<std::pair<Point, std::uint64_t>>& patches,
                             double patch_size, double background = 0.5) {
    GrayFrame f(w, h, background);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            for (const auto& [corner, seed] : patches) {
                const double u = static_cast<double>(x) - corner.x;
                const double v = static_cast<double>(y) - corner.y;
                if (u >= 0 && v >= 0 && u < patch_size && v < patch_size) f.set(x, y, texture_value(u, v, seed));
            }
    return f;
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("epk_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace epk::test
