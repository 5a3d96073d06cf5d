#pragma once

// Seeded generators with planted ground truth. Every generator is a pure
// function of its parameters and seed (see Rng for the fixed algorithm).

#include "epk/detections.hpp"
#include "epk/image.hpp"
#include "epk/matrix.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace epk::synth {

struct LowRankSparseBundle {
    std::uint64_t seed = 0;
    Matrix x;          // payload: low_rank + sparse
    Matrix factor_a;   // D×rank
    Matrix factor_b;   // T×rank
    Matrix low_rank;   // A·Bᵀ/√T
    Matrix sparse;
    std::vector<std::size_t> support;  // row-major flat indices, sorted
};

/// X = A·Bᵀ/√t + S with standard-normal A, B and ⌊fraction·d·t⌋ entries of
/// ±magnitude on a uniformly random support.
LowRankSparseBundle gen_lowrank_sparse(std::size_t d, std::size_t t, std::size_t rank, double sparse_fraction,
                                       double magnitude, std::uint64_t seed);

struct PiecewiseBundle {
    std::uint64_t seed = 0;
    Matrix x;      // payload: clean + noise
    Matrix clean;
    std::vector<std::size_t> change_points;  // first frame of each new level
};

/// Rows start at 0 and jump by Normal(0, jump_scale²) at each shared change
/// point; Normal(0, noise_sigma²) noise is added to every entry.
PiecewiseBundle gen_piecewise(std::size_t d, std::size_t t, const std::vector<std::size_t>& change_points,
                              double jump_scale, double noise_sigma, std::uint64_t seed);

struct ShiftedPairBundle {
    std::uint64_t seed = 0;
    GrayFrame first;
    GrayFrame second;
    double dx = 0.0;
    double dy = 0.0;
};

/// Smoothed seeded noise texture; the second frame shows the same texture
/// moved by (dx, dy) (bilinear), so true flow is (dx, dy) everywhere.
ShiftedPairBundle gen_shifted_pair(std::size_t size, double dx, double dy, double texture_scale, std::uint64_t seed);

/// Seeded smooth texture in [lo, hi]; the building block of the image
/// generators.
Plane smooth_texture(std::size_t width, std::size_t height, double sigma, double lo, double hi, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Driver sessions

struct EpisodeSpec {
    std::string label;
    std::size_t duration = 0;
};

/// Labels understood by gen_driver_session.
const std::vector<std::string>& episode_labels();

/// Fixed scene geometry of the generated sessions, in normalized coordinates.
struct SessionLayout {
    Box wheel{0.28, 0.58, 0.72, 0.84};
    Box radio{0.04, 0.55, 0.24, 0.76};
    /// Where the right wrist ends up while reaching behind the seat.
    Box behind{0.10, 0.18, 0.34, 0.40};
    double hand_half_size = 0.045;
};

struct HandFlip {
    std::size_t frame = 0;
    std::size_t hand_index = 0;
    Side true_side = Side::unknown;
};

struct DriverSessionBundle {
    std::uint64_t seed = 0;
    double frame_rate = 30.0;
    SessionLayout layout;
    std::vector<EpisodeSpec> schedule;
    std::vector<DetectionFrame> frames;          // payload
    std::vector<std::string> frame_labels;       // ground truth per frame
    std::vector<std::size_t> episode_starts;     // first frame of each episode
    std::vector<HandFlip> flips;                 // injected wrong side labels
    /// True side of every hand detection, frame-major.
    std::vector<std::vector<Side>> true_sides;
};

/// Detector outputs consistent with each scripted label. Unknown labels are
/// an ArgumentError.
DriverSessionBundle gen_driver_session(const std::vector<EpisodeSpec>& schedule, double frame_rate,
                                       double score_noise, double side_flip_fraction, std::uint64_t seed);

/// Simple grayscale rendering of a session (static scene, textured hands and
/// objects, erratic blobs during "reaching_behind").
std::vector<GrayFrame> render_session(const DriverSessionBundle& session, std::size_t width, std::size_t height,
                                      std::uint64_t seed);

} // namespace epk::synth
