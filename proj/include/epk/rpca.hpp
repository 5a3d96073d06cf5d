#pragma once

#include "epk/matrix.hpp"
#include "epk/numkit.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace epk::rpca {

/// Settings of the inexact augmented Lagrangian solver for
///   min ‖U‖_* + λ‖S‖₁  s.t.  X = U + S.
struct RpcaConfig {
    /// Sparsity weight; unset means default_lambda(D, T).
    std::optional<double> lambda;
    double tolerance = 1e-7;
    std::size_t max_iterations = 1000;
    double penalty_growth = 1.5;
    /// Initial penalty; unset means 1.25 / ‖X‖₂.
    std::optional<double> penalty_initial;
    /// Penalty cap; unset means 1e7 × initial penalty.
    std::optional<double> penalty_cap;

    void validate() const;
};

struct RpcaResult {
    Matrix low_rank;
    Matrix sparse;
    /// Singular values of low_rank (the non-zero ones, non-increasing).
    std::vector<double> singular_values;
    /// Column space of low_rank, for projecting new frames.
    SvdFactors basis;
    std::size_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    double lambda = 0.0;
    /// Rank of U after each iteration.
    std::vector<std::size_t> rank_history;
};

double default_lambda(std::size_t rows, std::size_t cols);

/// Throws ArgumentError on a zero or non-finite input. Hitting
/// max_iterations is not an error: the result comes back with converged=false.
RpcaResult decompose(const Matrix& x, const RpcaConfig& cfg = {});

struct FrameProjection {
    std::vector<double> typical;
    std::vector<double> outlier;
    std::size_t iterations = 0;
};

/// Split a new column into a part explained by `basis` and a sparse outlier,
/// via the fixed point o = soft(c − P(c − o), λ) where P projects onto the
/// basis' left singular vectors.
FrameProjection project_frame(const SvdFactors& basis, std::span<const double> column, double lambda);

/// Entry-wise |S_ij| > threshold.
struct Mask {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::uint8_t> bits;

    bool operator()(std::size_t r, std::size_t c) const noexcept { return bits[r * cols + c] != 0; }
    std::size_t count() const noexcept;
};

Mask outlier_mask(const Matrix& sparse, double threshold);

/// ‖S_{·,t}‖² per column: the per-frame outlier energy.
std::vector<double> column_energy(const Matrix& sparse);

} // namespace epk::rpca
