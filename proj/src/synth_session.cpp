#include "epk/synth.hpp"

#include "epk/error.hpp"
#include "epk/rng.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace epk::synth {

namespace {

struct Arm {
    Point elbow;
    Point wrist;
};

struct HeldObject {
    std::string label;
    double half_w;
    double half_h;
};

struct Script {
    std::string label;
    Arm right;
    Arm left;
    Side holding = Side::unknown;           // hand carrying the object
    std::optional<HeldObject> object;
    bool erratic = false;
};

constexpr Point kHead{0.50, 0.22};
constexpr Point kNeck{0.50, 0.32};
constexpr Point kRightShoulder{0.40, 0.36};
constexpr Point kLeftShoulder{0.60, 0.36};

constexpr Arm kWheelRight{{0.36, 0.52}, {0.40, 0.66}};
constexpr Arm kTextingRight{{0.38, 0.52}, {0.46, 0.50}};
constexpr Arm kPhoneRight{{0.36, 0.42}, {0.42, 0.26}};
constexpr Arm kDrinkRight{{0.38, 0.46}, {0.45, 0.34}};
constexpr Arm kRadioRight{{0.30, 0.55}, {0.20, 0.62}};
constexpr Arm kBehindRight{{0.30, 0.42}, {0.25, 0.30}};

constexpr Arm mirror(Arm a) { return {{1.0 - a.elbow.x, a.elbow.y}, {1.0 - a.wrist.x, a.wrist.y}}; }

const std::vector<Script>& scripts() {
    static const std::vector<Script> table = [] {
        const HeldObject phone{"cell phone", 0.03, 0.045};
        const HeldObject cup{"cup", 0.03, 0.04};
        const Arm wheel_left = mirror(kWheelRight);
        return std::vector<Script>{
            {"safe_driving", kWheelRight, wheel_left, Side::unknown, std::nullopt, false},
            {"texting_right", kTextingRight, wheel_left, Side::right, phone, false},
            {"talking_on_phone_right", kPhoneRight, wheel_left, Side::right, phone, false},
            {"texting_left", kWheelRight, mirror(kTextingRight), Side::left, phone, false},
            {"talking_on_phone_left", kWheelRight, mirror(kPhoneRight), Side::left, phone, false},
            {"operating_radio", kRadioRight, wheel_left, Side::unknown, std::nullopt, false},
            {"drinking", kDrinkRight, wheel_left, Side::right, cup, false},
            {"reaching_behind", kBehindRight, wheel_left, Side::unknown, std::nullopt, true},
        };
    }();
    return table;
}

const Script& script_for(const std::string& label) {
    for (const Script& s : scripts())
        if (s.label == label) return s;
    std::string names;
    for (const Script& s : scripts()) names += (names.empty() ? "" : ", ") + s.label;
    throw ArgumentError("gen_driver_session: unknown episode label '" + label + "' (known: " + names + ")");
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

/// Box whose boundary passes through the wrist, centered along the forearm.
Box hand_box(Point elbow, Point wrist, double half) {
    double ux = wrist.x - elbow.x;
    double uy = wrist.y - elbow.y;
    const double m = std::max(std::fabs(ux), std::fabs(uy));
    if (m > 0.0) {
        ux /= m;
        uy /= m;
    }
    const Point c{wrist.x + ux * half, wrist.y + uy * half};
    return {c.x - half, c.y - half, c.x + half, c.y + half};
}

} // namespace

const std::vector<std::string>& episode_labels() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const Script& s : scripts()) out.push_back(s.label);
        return out;
    }();
    return names;
}

DriverSessionBundle gen_driver_session(const std::vector<EpisodeSpec>& schedule, double frame_rate,
                                       double score_noise, double side_flip_fraction, std::uint64_t seed) {
    if (!(frame_rate > 0.0)) throw ArgumentError("gen_driver_session: frame_rate must be positive");
    if (!(score_noise >= 0.0)) throw ArgumentError("gen_driver_session: score_noise must be >= 0");
    if (!(side_flip_fraction >= 0.0 && side_flip_fraction <= 1.0))
        throw ArgumentError("gen_driver_session: side_flip_fraction must lie in [0, 1]");
    for (const EpisodeSpec& e : schedule) script_for(e.label);

    DriverSessionBundle b;
    b.seed = seed;
    b.frame_rate = frame_rate;
    b.schedule = schedule;
    const Rng root(seed);
    const double pos_sigma = 0.1 * score_noise;
    const double box_sigma = 0.05 * score_noise;
    const double half = b.layout.hand_half_size;

    std::size_t frame = 0;
    for (const EpisodeSpec& e : schedule) {
        const Script& sc = script_for(e.label);
        b.episode_starts.push_back(frame);
        for (std::size_t k = 0; k < e.duration; ++k, ++frame) {
            Rng rng = root.fork(frame);
            DetectionFrame df;
            df.frame = frame;
            df.pose.frame_index = frame;
            const auto put = [&](Joint j, Point p) {
                const double score = clamp01(0.92 - std::fabs(rng.normal(0.0, score_noise)));
                df.pose[j] = Keypoint{clamp01(p.x + rng.normal(0.0, pos_sigma)), clamp01(p.y + rng.normal(0.0, pos_sigma)), score};
            };
            put(Joint::head, kHead);
            put(Joint::neck, kNeck);
            put(Joint::r_shoulder, kRightShoulder);
            put(Joint::r_elbow, sc.right.elbow);
            put(Joint::r_wrist, sc.right.wrist);
            put(Joint::l_shoulder, kLeftShoulder);
            put(Joint::l_elbow, sc.left.elbow);
            put(Joint::l_wrist, sc.left.wrist);

            std::vector<std::pair<HandDetection, Side>> hands;
            for (Side side : {Side::right, Side::left}) {
                const Keypoint& el = *df.pose[elbow_of(side)];
                const Keypoint& wr = *df.pose[wrist_of(side)];
                Box box = hand_box(el.position(), wr.position(), half);
                const double jx = rng.normal(0.0, box_sigma);
                const double jy = rng.normal(0.0, box_sigma);
                box = {box.x0 + jx, box.y0 + jy, box.x1 + jx, box.y1 + jy};
                HandDetection h{box, clamp01(0.9 - std::fabs(rng.normal(0.0, score_noise))), side,
                                clamp01(0.9 - std::fabs(rng.normal(0.0, score_noise)))};
                hands.emplace_back(h, side);
            }
            if (rng.below(2) == 1) std::swap(hands[0], hands[1]);

            std::vector<Side> truth;
            for (std::size_t i = 0; i < hands.size(); ++i) {
                truth.push_back(hands[i].second);
                if (side_flip_fraction > 0.0 && rng.uniform() < side_flip_fraction) {
                    hands[i].first.side = opposite(hands[i].second);
                    b.flips.push_back({frame, i, hands[i].second});
                }
                df.hands.push_back(hands[i].first);
            }

            if (sc.object) {
                const Keypoint& el = *df.pose[elbow_of(sc.holding)];
                const Keypoint& wr = *df.pose[wrist_of(sc.holding)];
                const Point c = hand_box(el.position(), wr.position(), half).center();
                const double score = clamp01(0.85 - std::fabs(rng.normal(0.0, score_noise)));
                df.objects.push_back({sc.object->label,
                                      {c.x - sc.object->half_w, c.y - sc.object->half_h, c.x + sc.object->half_w,
                                       c.y + sc.object->half_h},
                                      score});
            }

            b.frames.push_back(std::move(df));
            b.frame_labels.push_back(e.label);
            b.true_sides.push_back(std::move(truth));
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

class Canvas {
public:
    Canvas(Plane& plane) : p_(plane), w_(static_cast<double>(plane.width())), h_(static_cast<double>(plane.height())) {}

    /// Paint every pixel whose normalized center satisfies `inside`.
    template <class F>
    void fill(const Box& bounds, F&& shade) {
        const auto x0 = static_cast<std::ptrdiff_t>(std::floor(bounds.x0 * w_));
        const auto x1 = static_cast<std::ptrdiff_t>(std::ceil(bounds.x1 * w_));
        const auto y0 = static_cast<std::ptrdiff_t>(std::floor(bounds.y0 * h_));
        const auto y1 = static_cast<std::ptrdiff_t>(std::ceil(bounds.y1 * h_));
        for (std::ptrdiff_t y = std::max<std::ptrdiff_t>(y0, 0); y < std::min<std::ptrdiff_t>(y1, static_cast<std::ptrdiff_t>(h_)); ++y)
            for (std::ptrdiff_t x = std::max<std::ptrdiff_t>(x0, 0); x < std::min<std::ptrdiff_t>(x1, static_cast<std::ptrdiff_t>(w_)); ++x) {
                const Point n{(static_cast<double>(x) + 0.5) / w_, (static_cast<double>(y) + 0.5) / h_};
                auto& px = p_.at(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
                if (const auto v = shade(n)) px = *v;
            }
    }

    void disc(Point c, double radius_y, double value) {
        const double rx = radius_y * h_ / w_;
        fill({c.x - rx, c.y - radius_y, c.x + rx, c.y + radius_y}, [&](Point n) -> std::optional<double> {
            const double dx = (n.x - c.x) / rx, dy = (n.y - c.y) / radius_y;
            if (dx * dx + dy * dy <= 1.0) return value;
            return std::nullopt;
        });
    }

    void segment(Point a, Point b, double thickness, double value) {
        const double m = thickness;
        fill({std::min(a.x, b.x) - m, std::min(a.y, b.y) - m, std::max(a.x, b.x) + m, std::max(a.y, b.y) + m},
             [&](Point n) -> std::optional<double> {
                 const double ax = (n.x - a.x) * w_, ay = (n.y - a.y) * h_;
                 const double bx = (b.x - a.x) * w_, by = (b.y - a.y) * h_;
                 const double len2 = bx * bx + by * by;
                 const double t = len2 > 0.0 ? std::clamp((ax * bx + ay * by) / len2, 0.0, 1.0) : 0.0;
                 const double dx = ax - t * bx, dy = ay - t * by;
                 if (std::sqrt(dx * dx + dy * dy) <= thickness * h_) return value;
                 return std::nullopt;
             });
    }

    void texture(const Box& box, const Plane& tex) {
        const double tw = static_cast<double>(tex.width() - 1);
        const double th = static_cast<double>(tex.height() - 1);
        fill(box, [&](Point n) -> std::optional<double> {
            if (!box.contains(n)) return std::nullopt;
            return tex.sample((n.x - box.x0) / box.width() * tw, (n.y - box.y0) / box.height() * th);
        });
    }

private:
    Plane& p_;
    double w_;
    double h_;
};

} // namespace

std::vector<GrayFrame> render_session(const DriverSessionBundle& session, std::size_t width, std::size_t height,
                                      std::uint64_t seed) {
    if (width < 8 || height < 8) throw ArgumentError("render_session: frames must be at least 8x8");
    const Rng root(seed);
    const Plane background = smooth_texture(width, height, static_cast<double>(width) / 12.0, 0.30, 0.60, root.fork(1).seed());
    const Plane right_hand = smooth_texture(24, 24, 1.5, 0.15, 0.95, root.fork(2).seed());
    const Plane left_hand = smooth_texture(24, 24, 1.5, 0.15, 0.95, root.fork(3).seed());
    const Plane phone = smooth_texture(12, 16, 1.0, 0.0, 0.25, root.fork(4).seed());
    const Plane cup = smooth_texture(12, 16, 1.0, 0.80, 1.0, root.fork(5).seed());
    const Box wheel = session.layout.wheel;

    std::vector<GrayFrame> out;
    out.reserve(session.frames.size());
    for (std::size_t f = 0; f < session.frames.size(); ++f) {
        const DetectionFrame& df = session.frames[f];
        Plane p = background;
        Canvas c(p);

        const Point wc = wheel.center();
        c.fill(wheel, [&](Point n) -> std::optional<double> {
            const double dx = (n.x - wc.x) / (wheel.width() / 2), dy = (n.y - wc.y) / (wheel.height() / 2);
            const double r = std::sqrt(dx * dx + dy * dy);
            if (r >= 0.8 && r <= 1.0) return 0.12;
            return std::nullopt;
        });
        c.fill({0.40, 0.34, 0.60, 1.0}, [](Point) -> std::optional<double> { return 0.75; });

        const auto pos = [&](Joint j, Point fallback) { return df.pose[j] ? df.pose[j]->position() : fallback; };
        c.disc(pos(Joint::head, kHead), 0.08, 0.85);
        for (Side s : {Side::right, Side::left}) {
            const Point shoulder = pos(s == Side::right ? Joint::r_shoulder : Joint::l_shoulder,
                                       s == Side::right ? kRightShoulder : kLeftShoulder);
            const Point elbow = pos(elbow_of(s), shoulder);
            const Point wrist = pos(wrist_of(s), elbow);
            c.segment(shoulder, elbow, 0.025, 0.62);
            c.segment(elbow, wrist, 0.022, 0.62);
        }
        for (std::size_t i = 0; i < df.hands.size(); ++i) {
            const Side truth = i < session.true_sides[f].size() ? session.true_sides[f][i] : df.hands[i].side;
            c.texture(df.hands[i].box, truth == Side::left ? left_hand : right_hand);
        }
        for (const ObjectDetection& o : df.objects) c.texture(o.box, o.label == "cell phone" ? phone : cup);

        Rng rng = root.fork(100 + f);
        if (session.frame_labels[f] == "reaching_behind") {
            for (int k = 0; k < 3; ++k) {
                const Point at{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
                c.disc(at, rng.uniform(0.06, 0.12), rng.uniform() < 0.5 ? 0.0 : 1.0);
            }
        }
        for (double& v : p.values()) v = clamp01(v + rng.normal(0.0, 0.004));
        out.emplace_back(std::move(p));
    }
    return out;
}

} // namespace epk::synth
