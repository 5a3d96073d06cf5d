#include "epk/detections.hpp"

#include <algorithm>
#include <cmath>

namespace epk {

double distance_to_boundary(const Box& box, Point p) noexcept {
    if (box.contains(p)) {
        return std::min({p.x - box.x0, box.x1 - p.x, p.y - box.y0, box.y1 - p.y});
    }
    const double dx = std::max({box.x0 - p.x, 0.0, p.x - box.x1});
    const double dy = std::max({box.y0 - p.y, 0.0, p.y - box.y1});
    return std::hypot(dx, dy);
}

namespace {
constexpr std::array<std::string_view, kJointCount> kJointNames{
    "head", "neck", "r_shoulder", "r_elbow", "r_wrist", "l_shoulder", "l_elbow", "l_wrist"};
}

std::string_view joint_name(Joint j) noexcept { return kJointNames[static_cast<std::size_t>(j)]; }

std::optional<Joint> parse_joint(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kJointCount; ++i)
        if (kJointNames[i] == name) return static_cast<Joint>(i);
    return std::nullopt;
}

std::string_view side_name(Side s) noexcept {
    switch (s) {
    case Side::left: return "left";
    case Side::right: return "right";
    case Side::unknown: break;
    }
    return "unknown";
}

std::optional<Side> parse_side(std::string_view name) noexcept {
    if (name == "left") return Side::left;
    if (name == "right") return Side::right;
    if (name == "unknown") return Side::unknown;
    return std::nullopt;
}

Side opposite(Side s) noexcept {
    switch (s) {
    case Side::left: return Side::right;
    case Side::right: return Side::left;
    case Side::unknown: break;
    }
    return Side::unknown;
}

Joint wrist_of(Side s) noexcept { return s == Side::left ? Joint::l_wrist : Joint::r_wrist; }
Joint elbow_of(Side s) noexcept { return s == Side::left ? Joint::l_elbow : Joint::r_elbow; }

} // namespace epk
