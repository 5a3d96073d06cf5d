#pragma once

#include "epk/detections.hpp"
#include "epk/matrix.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace epk::gfl {

/// Weighted Group Fused LASSO:
///   min_V ½‖W∘(X − V)‖_F² + λ Σ_t ‖(V·Q)_{·,t}‖₂
/// with Q the order-p finite differencing operator.
struct GflConfig {
    double lambda = 1.0;
    std::size_t order = 1;
    double admm_penalty = 1.0;
    double tolerance = 1e-7;
    std::size_t max_iterations = 20000;
    /// Residual balancing of the ADMM penalty (refactorizes the banded systems).
    bool adaptive_penalty = true;

    void validate(std::size_t frames) const;
};

struct GflResult {
    Matrix smoothed;
    /// ‖(V·Q)_{·,t}‖₂ for t = 0..T−p−1, read from the ADMM split variable so
    /// inactive steps are exactly zero.
    std::vector<double> jump_strengths;
    double objective = 0.0;
    bool converged = false;
    std::size_t iterations = 0;
};

/// Segment structure derived from thresholded jump strengths.
/// jump_indices index the strength sequence (jump t sits between frames t and
/// t+1 for p = 1); change_points are the first frames of new segments
/// (jump index + 1), so they lie in (0, T).
struct SegmentLabeling {
    std::vector<std::size_t> jump_indices;
    std::vector<std::size_t> change_points;
    std::vector<std::size_t> group_ids;
};

/// Q ∈ ℝ^{T×(T−p)}: p-fold composition of first differences.
Matrix differencing_matrix(std::size_t t, std::size_t p);

/// Row-form application of Q: returns row·Q (length T−p).
std::vector<double> difference(std::span<const double> row, std::size_t p);
/// Q·z (length T) for z of length T−p.
std::vector<double> difference_adjoint(std::span<const double> z, std::size_t p);

double objective(const Matrix& x, const Matrix& w, const Matrix& v, double lambda, std::size_t order);

/// ADMM solver. Throws ArgumentError for shape mismatches, negative weights,
/// or a row whose weights do not pin down an order-p fit (for instance an
/// all-zero row). Non-convergence is reported in the result.
GflResult solve(const Matrix& x, const Matrix& w, const GflConfig& cfg);

/// Slow reference solver: accelerated projected gradient on the dual, run
/// until the duality gap is negligible. Requires D·T ≤ 200 and strictly
/// positive weights (unless λ = 0).
GflResult oracle_solve(const Matrix& x, const Matrix& w, const GflConfig& cfg);

/// Strength indices above `threshold`, accepted greedily from strongest to
/// weakest (earlier index wins ties) while keeping pairwise distance ≥ min_gap.
SegmentLabeling extract_change_points(std::span<const double> strengths, double threshold,
                                      std::size_t min_gap, std::size_t order = 1);

/// Group id per frame for the given segment starts.
std::vector<std::size_t> group_ids_from_change_points(std::span<const std::size_t> change_points,
                                                      std::size_t frames);

/// λ scaled to the data: robust noise level (MAD of first differences)
/// times √(D·T) times `factor`.
double suggest_lambda(const Matrix& x, const Matrix& w, double factor = 1.0);

inline constexpr std::array<Joint, 4> kArmJoints{Joint::r_wrist, Joint::r_elbow, Joint::l_wrist, Joint::l_elbow};

struct WeightedSeries {
    Matrix x;  // 8×T: (x, y) of r_wrist, r_elbow, l_wrist, l_elbow
    Matrix w;  // joint score, 0 where the joint is missing
};

/// Standardize each coordinate row over frames with score > 0; rows with zero
/// variance become all zero. Throws ArgumentError naming a joint that never
/// appears with a positive score.
WeightedSeries normalize_and_weight(std::span<const PoseFrame> stream);

} // namespace epk::gfl
