#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace epk {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned box (x0, y0, x1, y1) with x0 < x1 and y0 < y1.
struct Box {
    double x0 = 0.0;
    double y0 = 0.0;
    double x1 = 0.0;
    double y1 = 0.0;

    double width() const noexcept { return x1 - x0; }
    double height() const noexcept { return y1 - y0; }
    double area() const noexcept { return width() * height(); }
    bool valid() const noexcept { return x1 > x0 && y1 > y0; }
    Point center() const noexcept { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
    bool contains(Point p) const noexcept { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
    bool intersects(const Box& o) const noexcept {
        return x0 <= o.x1 && o.x0 <= x1 && y0 <= o.y1 && o.y0 <= y1;
    }
    Box scaled(double s) const noexcept { return {x0 * s, y0 * s, x1 * s, y1 * s}; }
    Box expanded(double m) const noexcept { return {x0 - m, y0 - m, x1 + m, y1 + m}; }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Euclidean distance from p to the boundary of the box (inside or outside).
double distance_to_boundary(const Box& box, Point p) noexcept;

enum class Joint : std::size_t { head, neck, r_shoulder, r_elbow, r_wrist, l_shoulder, l_elbow, l_wrist };
inline constexpr std::size_t kJointCount = 8;
inline constexpr std::array<Joint, kJointCount> kAllJoints{
    Joint::head, Joint::neck, Joint::r_shoulder, Joint::r_elbow,
    Joint::r_wrist, Joint::l_shoulder, Joint::l_elbow, Joint::l_wrist};

std::string_view joint_name(Joint j) noexcept;
std::optional<Joint> parse_joint(std::string_view name) noexcept;

enum class Side { left, right, unknown };
std::string_view side_name(Side s) noexcept;
std::optional<Side> parse_side(std::string_view name) noexcept;
Side opposite(Side s) noexcept;

struct Keypoint {
    double x = 0.0;
    double y = 0.0;
    double score = 0.0;
    Point position() const noexcept { return {x, y}; }
    friend bool operator==(const Keypoint&, const Keypoint&) = default;
};

/// One frame of pose-estimator output, coordinates normalized to [0, 1].
struct PoseFrame {
    std::size_t frame_index = 0;
    std::array<std::optional<Keypoint>, kJointCount> joints{};

    const std::optional<Keypoint>& operator[](Joint j) const noexcept {
        return joints[static_cast<std::size_t>(j)];
    }
    std::optional<Keypoint>& operator[](Joint j) noexcept { return joints[static_cast<std::size_t>(j)]; }
    double score(Joint j) const noexcept { return (*this)[j] ? (*this)[j]->score : 0.0; }

    friend bool operator==(const PoseFrame&, const PoseFrame&) = default;
};

struct HandDetection {
    Box box;
    double score = 0.0;
    Side side = Side::unknown;
    double side_score = 0.0;
    friend bool operator==(const HandDetection&, const HandDetection&) = default;
};

struct ObjectDetection {
    std::string label;
    Box box;
    double score = 0.0;
    friend bool operator==(const ObjectDetection&, const ObjectDetection&) = default;
};

/// Everything the external detectors reported for one frame.
struct DetectionFrame {
    std::size_t frame = 0;
    PoseFrame pose;
    std::vector<HandDetection> hands;
    std::vector<ObjectDetection> objects;
    friend bool operator==(const DetectionFrame&, const DetectionFrame&) = default;
};

Joint wrist_of(Side s) noexcept;
Joint elbow_of(Side s) noexcept;

} // namespace epk
