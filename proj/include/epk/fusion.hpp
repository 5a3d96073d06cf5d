#pragma once

#include "epk/detections.hpp"
#include "epk/gflasso.hpp"

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace epk::fusion {

/// Normalized image region: an axis-aligned box or a simple polygon.
class Region {
public:
    Region() = default;
    static Region from_box(const Box& box);
    static Region from_polygon(std::vector<Point> vertices);

    bool empty() const noexcept { return !box_ && polygon_.empty(); }
    bool contains(Point p) const noexcept;
    Region scaled(double s) const;

    const std::optional<Box>& box() const noexcept { return box_; }
    const std::vector<Point>& polygon() const noexcept { return polygon_; }

    friend bool operator==(const Region&, const Region&) = default;

private:
    std::optional<Box> box_;
    std::vector<Point> polygon_;
};

struct FusionConfig {
    Region wheel_region;
    double pose_score_min = 0.5;
    double hand_score_min = 0.5;
    double hand_score_strict = 0.8;
    /// Distances are measured in diagonal units: euclidean / sqrt(2).
    double wrist_edge_dist_max = 0.05;
    double wrist_edge_dist_strict = 0.02;
    double elbow_angle_max_deg = 45.0;
    double frame_rate = 30.0;
    /// Defaults to ceil(frame_rate / 2) when unset.
    std::optional<std::size_t> consistency_frames;

    std::size_t stabilization_window() const;
    /// Throws ArgumentError on a missing wheel region or loose strict thresholds.
    void validate() const;
};

struct Association {
    Side wrist = Side::unknown;
    std::size_t hand_index = 0;
    double distance = 0.0;                  // diagonal units
    std::optional<double> angle_deg;        // absent when the elbow is missing
};

struct WristAssociations {
    std::vector<Association> pairs;         // ordered right wrist first
    /// Per wrist side (right, left): smallest boundary distance to any
    /// eligible hand box, if the wrist is usable.
    std::array<std::optional<double>, 2> nearest{};
    std::vector<std::string> notes;

    const Association* find(Side wrist) const noexcept;
    const Association* for_hand(std::size_t hand_index) const noexcept;
};

WristAssociations associate_wrists(const PoseFrame& pose, const std::vector<HandDetection>& hands,
                                   const FusionConfig& cfg);

struct RuleCheck {
    int id = 0;
    bool passed = false;
    double value = 0.0;
    /// "frame", a wrist name, or "hand <index>".
    std::string scope = "frame";
    std::string reason;
    friend bool operator==(const RuleCheck&, const RuleCheck&) = default;
};

struct Relabel {
    std::size_t hand_index = 0;
    Side from = Side::unknown;
    Side to = Side::unknown;
    friend bool operator==(const Relabel&, const Relabel&) = default;
};

struct RuleVerdict {
    std::size_t frame_index = 0;
    std::array<RuleCheck, 7> rules{};
    bool safe_driving = false;
    bool strict_safe_driving = false;
    std::vector<Association> associations;
    std::vector<Relabel> relabels;
    std::vector<std::string> notes;
};

RuleVerdict evaluate_safe_driving(const PoseFrame& pose, const std::vector<HandDetection>& hands,
                                  const FusionConfig& cfg);

enum class RecordKind { hand_side_label, pose_correction };
std::string_view record_kind_name(RecordKind k) noexcept;

struct TrainingRecord {
    std::size_t frame_index = 0;
    RecordKind kind = RecordKind::hand_side_label;
    std::vector<HandDetection> hands;       // corrected boxes with sides
    std::optional<Relabel> relabel;
    /// For pose corrections: the wrist and where it should be.
    std::optional<Joint> joint;
    std::optional<Keypoint> corrected;
    std::vector<RuleCheck> provenance;
};

struct RelabelResult {
    std::vector<HandDetection> hands;
    std::vector<Relabel> relabels;
    std::vector<TrainingRecord> records;
    std::vector<std::string> notes;
};

RelabelResult relabel_hands(const PoseFrame& pose, const std::vector<HandDetection>& hands, const FusionConfig& cfg);

std::vector<TrainingRecord> emit_pose_corrections(const PoseFrame& pose, const RelabelResult& relabeled,
                                                  const FusionConfig& cfg);

/// Frame-level evaluation: verdict on the corrected hands plus both record kinds.
struct FrameFusion {
    RuleVerdict verdict;
    std::vector<HandDetection> corrected_hands;
    std::vector<TrainingRecord> records;
};
FrameFusion fuse_frame(const PoseFrame& pose, const std::vector<HandDetection>& hands, const FusionConfig& cfg);

/// true at t iff every raw verdict in the trailing window of
/// consistency_frames is safe; false during warm-up.
std::vector<bool> temporal_verdict(const std::vector<RuleVerdict>& verdicts, const FusionConfig& cfg);

// ---------------------------------------------------------------------------
// Episode classification

enum class Predicate {
    both_hands_on_wheel,
    object_near_head,
    object_near_offwheel_wrist,
    object_overlaps_hand,
    offwheel_wrist_in_region,
};
std::string_view predicate_name(Predicate p) noexcept;
std::optional<Predicate> parse_predicate(std::string_view name) noexcept;

struct EpisodeRule {
    Predicate predicate = Predicate::both_hands_on_wheel;
    /// May contain "{side}", replaced by the side of the hand that fired.
    std::string label;
    std::vector<std::string> objects;
    double head_radius = 0.12;
    double max_dist = 0.08;
    /// Wrist must sit this far below the neck (texting).
    std::optional<double> below_neck;
    /// Wrist must sit at least this far above the neck (talking).
    std::optional<double> above_neck;
    Region region;
};

struct EpisodeRuleTable {
    std::vector<EpisodeRule> rules;
    static EpisodeRuleTable defaults(const Region& radio_region);
};

struct EpisodeFrame {
    PoseFrame pose;
    std::vector<HandDetection> hands;
    std::vector<ObjectDetection> objects;
};

/// Labels fired by the table on one frame, in table order.
std::vector<std::string> fired_labels(const EpisodeFrame& frame, const EpisodeRuleTable& table,
                                      const FusionConfig& cfg);

struct EpisodeLabel {
    std::size_t first_frame = 0;
    std::size_t end_frame = 0;              // exclusive
    std::string label;
    std::size_t votes = 0;
    std::vector<std::string> notes;
};

inline constexpr std::string_view kUnknownLabel = "unknown";

/// Majority vote of fired labels over each segment. Segments come from the
/// change points of `segments` over frames.size() frames.
std::vector<EpisodeLabel> classify_episode(const std::vector<EpisodeFrame>& frames,
                                           const gfl::SegmentLabeling& segments, const EpisodeRuleTable& table,
                                           const FusionConfig& cfg);

} // namespace epk::fusion
