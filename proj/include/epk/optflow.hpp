#pragma once

#include "epk/detections.hpp"
#include "epk/image.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace epk::flow {

struct FlowConfig {
    /// Lucas–Kanade window side (odd).
    std::size_t window = 9;
    /// Minimum eigenvalue floor, as a multiple of the window area.
    double eigen_floor_scale = 1e-4;
    std::size_t max_iterations = 20;
    double epsilon = 0.01;
    /// Forward-backward round-trip error above which a track is rejected.
    double fb_max_error = 0.5;
    /// Boxes are resampled to canonical_size × canonical_size.
    std::size_t canonical_size = 64;
    std::size_t max_features = 40;
    double feature_quality = 0.01;
    /// Structure-tensor block radius used for feature selection.
    std::size_t feature_block_radius = 1;
    double feature_min_distance = 3.0;
    /// Frames a track may skip when linking boxes.
    std::size_t gap_max = 2;

    double eigen_floor() const noexcept {
        return eigen_floor_scale * static_cast<double>(window * window);
    }
    void validate() const;
};

struct Gradients {
    Plane ix;
    Plane iy;
};

/// Central differences inside, one-sided differences on the border.
/// Frames smaller than 3×3 are an ArgumentError.
Gradients image_gradients(const GrayFrame& frame);

/// Minimum-eigenvalue corners, non-maximum suppressed within the flow window
/// radius and kept clear of the border by that radius, strongest first.
std::vector<Point> good_features(const GrayFrame& frame, std::size_t max_count, double quality,
                                 const FlowConfig& cfg = {});

struct FlowVector {
    Point origin;
    double dx = 0.0;
    double dy = 0.0;
    bool valid = false;
    double min_eigenvalue = 0.0;

    Point landing() const noexcept { return {origin.x + dx, origin.y + dy}; }
};

/// Iterative single-level Lucas–Kanade. Points whose window leaves the frame,
/// whose structure tensor is below the eigen floor, or whose displacement
/// exceeds the window size come back invalid with zero displacement.
std::vector<FlowVector> lk_flow(const GrayFrame& prev, const GrayFrame& next, std::span<const Point> points,
                                const FlowConfig& cfg = {});

/// Resample `box` (pixel coordinates) of `frame` onto a size×size grid.
GrayFrame canonical_patch(const GrayFrame& frame, const Box& box, std::size_t size);

/// Fraction of forward-valid features of box_prev whose forward-backward
/// consistent track lands inside box_next. Features are chosen on the
/// canonical-size resample of box_prev; flow runs on the original frames.
double box_similarity(const GrayFrame& prev, const GrayFrame& next, const Box& box_prev, const Box& box_next,
                      const FlowConfig& cfg = {});

struct BoxRef {
    std::size_t frame = 0;
    std::size_t box_index = 0;
    Box box;
    friend bool operator==(const BoxRef&, const BoxRef&) = default;
};

struct BoxTrackGroup {
    std::size_t group_id = 0;
    std::vector<BoxRef> members;  // strictly increasing frame
};

/// Link boxes across consecutive frames (skipping up to gap_max frames) when
/// their similarity exceeds `threshold`. Links are accepted greedily by
/// decreasing similarity, each box getting at most one predecessor and one
/// successor, so every group is a track and the result partitions the input.
std::vector<BoxTrackGroup> group_boxes(std::span<const GrayFrame> frames,
                                       std::span<const std::vector<Box>> boxes_per_frame, double threshold,
                                       const FlowConfig& cfg = {});

/// Pearson correlation of two equally sized planes; 0 if either is flat.
double correlation(std::span<const double> a, std::span<const double> b);

/// Merge groups whose mean canonical appearance correlates above
/// merge_threshold, transitively, as long as the merged groups never share
/// a frame. The output is a coarsening of the input partition.
std::vector<BoxTrackGroup> merge_groups(const std::vector<BoxTrackGroup>& groups, std::span<const GrayFrame> frames,
                                        double merge_threshold, const FlowConfig& cfg = {});

} // namespace epk::flow
