#include "epk/synth.hpp"

#include "epk/error.hpp"
#include "epk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace epk::synth {

LowRankSparseBundle gen_lowrank_sparse(std::size_t d, std::size_t t, std::size_t rank, double sparse_fraction,
                                       double magnitude, std::uint64_t seed) {
    if (d == 0 || t == 0) throw ArgumentError("gen_lowrank_sparse: dimensions must be positive");
    if (rank > std::min(d, t)) throw ArgumentError("gen_lowrank_sparse: rank exceeds min(d, t)");
    if (!(sparse_fraction >= 0.0 && sparse_fraction <= 0.3))
        throw ArgumentError("gen_lowrank_sparse: sparse_fraction must lie in [0, 0.3]");

    const Rng root(seed);
    LowRankSparseBundle b;
    b.seed = seed;
    b.factor_a = Matrix(d, rank);
    b.factor_b = Matrix(t, rank);
    Rng ra = root.fork(1);
    for (double& v : b.factor_a.values()) v = ra.normal();
    Rng rb = root.fork(2);
    for (double& v : b.factor_b.values()) v = rb.normal();

    b.low_rank = rank == 0 ? Matrix(d, t) : multiply_transposed_right(b.factor_a, b.factor_b);
    b.low_rank *= 1.0 / std::sqrt(static_cast<double>(t));

    const std::size_t total = d * t;
    const auto count = static_cast<std::size_t>(std::floor(sparse_fraction * static_cast<double>(total)));
    Rng rs = root.fork(3);
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rs.below(total - i)]);
    b.support.assign(idx.begin(), idx.begin() + static_cast<long>(count));
    std::sort(b.support.begin(), b.support.end());

    b.sparse = Matrix(d, t);
    for (std::size_t k : b.support) b.sparse.values()[k] = rs.uniform() < 0.5 ? -magnitude : magnitude;

    b.x = b.low_rank + b.sparse;
    return b;
}

PiecewiseBundle gen_piecewise(std::size_t d, std::size_t t, const std::vector<std::size_t>& change_points,
                              double jump_scale, double noise_sigma, std::uint64_t seed) {
    if (d == 0 || t == 0) throw ArgumentError("gen_piecewise: dimensions must be positive");
    for (std::size_t i = 0; i < change_points.size(); ++i) {
        if (change_points[i] == 0 || change_points[i] >= t || (i > 0 && change_points[i] <= change_points[i - 1]))
            throw ArgumentError("gen_piecewise: change points must be strictly increasing in (0, t)");
    }
    const Rng root(seed);
    PiecewiseBundle b;
    b.seed = seed;
    b.change_points = change_points;
    b.clean = Matrix(d, t);
    Rng rj = root.fork(1);
    for (std::size_t r = 0; r < d; ++r) {
        double level = 0.0;
        std::size_t next = 0;
        for (std::size_t f = 0; f < t; ++f) {
            if (next < change_points.size() && change_points[next] == f) {
                level += rj.normal(0.0, jump_scale);
                ++next;
            }
            b.clean(r, f) = level;
        }
    }
    b.x = b.clean;
    if (noise_sigma > 0.0) {
        Rng rn = root.fork(2);
        for (double& v : b.x.values()) v += rn.normal(0.0, noise_sigma);
    }
    return b;
}

Plane smooth_texture(std::size_t width, std::size_t height, double sigma, double lo, double hi, std::uint64_t seed) {
    if (width == 0 || height == 0) throw ArgumentError("smooth_texture: empty size");
    Rng rng(seed);
    Plane noise(width, height);
    for (double& v : noise.values()) v = rng.uniform();
    if (sigma > 0.0) {
        const auto radius = static_cast<std::ptrdiff_t>(std::ceil(3.0 * sigma));
        std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
        double ksum = 0.0;
        for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
            const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma * sigma));
            kernel[static_cast<std::size_t>(k + radius)] = v;
            ksum += v;
        }
        for (double& v : kernel) v /= ksum;
        const auto clampi = [](std::ptrdiff_t v, std::size_t n) {
            return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(v, 0, static_cast<std::ptrdiff_t>(n) - 1));
        };
        Plane tmp(width, height);
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           noise.at(clampi(static_cast<std::ptrdiff_t>(x) + k, width), y);
                tmp.at(x, y) = acc;
            }
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t k = -radius; k <= radius; ++k)
                    acc += kernel[static_cast<std::size_t>(k + radius)] *
                           tmp.at(x, clampi(static_cast<std::ptrdiff_t>(y) + k, height));
                noise.at(x, y) = acc;
            }
    }
    const auto [mn, mx] = std::minmax_element(noise.values().begin(), noise.values().end());
    const double span = *mx - *mn;
    const double base = *mn;
    for (double& v : noise.values()) v = span > 0.0 ? lo + (hi - lo) * (v - base) / span : 0.5 * (lo + hi);
    return noise;
}

ShiftedPairBundle gen_shifted_pair(std::size_t size, double dx, double dy, double texture_scale, std::uint64_t seed) {
    if (size < 8) throw ArgumentError("gen_shifted_pair: size must be at least 8");
    if (std::fabs(dx) > 3.0 || std::fabs(dy) > 3.0) throw ArgumentError("gen_shifted_pair: |dx|, |dy| must be <= 3");
    constexpr std::size_t kPad = 8;
    const Plane canvas = smooth_texture(size + 2 * kPad, size + 2 * kPad, texture_scale, 0.05, 0.95, seed);
    const double pad = static_cast<double>(kPad);

    Plane first(size, size);
    Plane second(size, size);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            first.at(x, y) = canvas.at(x + kPad, y + kPad);
            second.at(x, y) = canvas.sample(static_cast<double>(x) + pad - dx, static_cast<double>(y) + pad - dy);
        }
    ShiftedPairBundle b;
    b.seed = seed;
    b.first = GrayFrame(std::move(first));
    b.second = GrayFrame(std::move(second));
    b.dx = dx;
    b.dy = dy;
    return b;
}

} // namespace epk::synth
