#pragma once

// Hand-built detector frames for the fusion tests. Geometry: elbows sit
// straight above the wrists, so a box whose top edge passes through the
// wrist is "pointed at" with a 0° angle.

#include "epk/detections.hpp"
#include "epk/fusion.hpp"
#include "epk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace epk::test {

inline const Box kWheel{0.28, 0.58, 0.72, 0.84};

inline fusion::FusionConfig wheel_config() {
    fusion::FusionConfig cfg;
    cfg.wheel_region = fusion::Region::from_box(kWheel);
    return cfg;
}

/// Box of half-size h whose top edge is centred on p.
inline Box box_below(Point p, double h = 0.03) { return {p.x - h, p.y, p.x + h, p.y + 2 * h}; }
/// Box of half-size h whose bottom edge is centred on p.
inline Box box_above(Point p, double h = 0.03) { return {p.x - h, p.y - 2 * h, p.x + h, p.y}; }

inline PoseFrame driver_pose(std::size_t frame = 0, double score = 0.9) {
    PoseFrame p;
    p.frame_index = frame;
    p[Joint::head] = Keypoint{0.5, 0.18, score};
    p[Joint::neck] = Keypoint{0.5, 0.3, score};
    p[Joint::r_shoulder] = Keypoint{0.38, 0.34, score};
    p[Joint::r_elbow] = Keypoint{0.40, 0.50, score};
    p[Joint::r_wrist] = Keypoint{0.40, 0.65, score};
    p[Joint::l_shoulder] = Keypoint{0.62, 0.34, score};
    p[Joint::l_elbow] = Keypoint{0.60, 0.50, score};
    p[Joint::l_wrist] = Keypoint{0.60, 0.65, score};
    return p;
}

/// Both hands on the wheel with tight geometry. Hand 0 is the right hand.
inline std::vector<HandDetection> wheel_hands(double score = 0.9) {
    return {HandDetection{box_below({0.40, 0.65}), score, Side::right, 0.9},
            HandDetection{box_below({0.60, 0.65}), score, Side::left, 0.9}};
}

/// Left arm raised to the head: elbow below, wrist at the ear, hand above.
inline void raise_left_arm(PoseFrame& p) {
    p[Joint::l_elbow] = Keypoint{0.62, 0.40, p.score(Joint::l_elbow)};
    p[Joint::l_wrist] = Keypoint{0.60, 0.26, p.score(Joint::l_wrist)};
}

inline void raise_right_arm(PoseFrame& p) {
    p[Joint::r_elbow] = Keypoint{0.38, 0.40, p.score(Joint::r_elbow)};
    p[Joint::r_wrist] = Keypoint{0.40, 0.26, p.score(Joint::r_wrist)};
}

/// Angle at the wrist between elbow→wrist and wrist→centre, in degrees.
inline double wrist_angle(Point elbow, Point wrist, Point centre) {
    const double ax = wrist.x - elbow.x, ay = wrist.y - elbow.y;
    const double bx = centre.x - wrist.x, by = centre.y - wrist.y;
    const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
    if (na == 0 || nb == 0) return 0.0;
    return std::acos(std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

/// Euclidean distance from p to a box (0 inside), in diagonal units.
inline double box_distance_diag(const Box& b, Point p) {
    const double dx = std::max({b.x0 - p.x, 0.0, p.x - b.x1});
    const double dy = std::max({b.y0 - p.y, 0.0, p.y - b.y1});
    const bool inside = dx == 0 && dy == 0;
    double d = std::hypot(dx, dy);
    if (inside) d = std::min({p.x - b.x0, b.x1 - p.x, p.y - b.y0, b.y1 - p.y});
    return d / std::numbers::sqrt2;
}

/// Frames near the decision boundaries of every rule: jittered driver
/// geometry, random scores, dropped joints, extra or missing hands, random
/// side labels.
inline DetectionFrame random_fusion_frame(Rng& rng, std::size_t index) {
    DetectionFrame f;
    f.frame = index;
    f.pose = driver_pose(index, 0.9);
    if (rng.uniform() < 0.3) raise_left_arm(f.pose);
    if (rng.uniform() < 0.15) raise_right_arm(f.pose);
    for (Joint j : kAllJoints) {
        auto& k = f.pose[j];
        k->x += rng.normal(0.0, 0.01);
        k->y += rng.normal(0.0, 0.01);
        k->score = std::clamp(rng.uniform() < 0.8 ? rng.uniform(0.5, 1.0) : rng.uniform(0.0, 0.6), 0.0, 1.0);
        if (rng.uniform() < 0.04) k.reset();
    }
    const auto place = [&](Joint wrist, Joint elbow) {
        const auto& w = f.pose[wrist];
        if (!w) return;
        const auto& e = f.pose[elbow];
        const bool up = e && e->y > w->y;
        const double h = rng.uniform(0.02, 0.05);
        Point anchor{w->x + rng.normal(0.0, 0.02), w->y + rng.normal(0.0, 0.02)};
        Box b = up ? box_above(anchor, h) : box_below(anchor, h);
        const Side sides[] = {Side::left, Side::right, Side::unknown};
        f.hands.push_back({b, std::clamp(rng.uniform(0.3, 1.0), 0.0, 1.0), sides[rng.below(3)], rng.uniform()});
    };
    if (rng.uniform() < 0.92) place(Joint::r_wrist, Joint::r_elbow);
    if (rng.uniform() < 0.92) place(Joint::l_wrist, Joint::l_elbow);
    if (rng.uniform() < 0.15) {
        const double x = rng.uniform(0.1, 0.9), y = rng.uniform(0.1, 0.9);
        f.hands.push_back({Box{x, y, x + 0.06, y + 0.06}, rng.uniform(), Side::unknown, 0.5});
    }
    if (rng.uniform() < 0.5 && f.hands.size() > 1) std::swap(f.hands[0], f.hands[1]);
    return f;
}

} // namespace epk::test
