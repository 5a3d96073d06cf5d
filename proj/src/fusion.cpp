#include "epk/fusion.hpp"

#include "epk/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

namespace epk::fusion {

namespace {

constexpr std::array<Side, 2> kWristSides{Side::right, Side::left};

std::size_t side_slot(Side s) noexcept { return s == Side::right ? 0 : 1; }

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

double diagonal_units(double d) noexcept { return d / std::numbers::sqrt2; }

double distance_to_box(const Box& b, Point p) noexcept {
    if (b.contains(p)) return 0.0;
    return distance_to_boundary(b, p);
}

bool eligible(const HandDetection& h, const FusionConfig& cfg) noexcept { return h.score >= cfg.hand_score_min; }

std::optional<Keypoint> usable(const PoseFrame& pose, Joint j, const FusionConfig& cfg) {
    const auto& k = pose[j];
    if (k && k->score >= cfg.pose_score_min) return k;
    return std::nullopt;
}

double arm_score(const PoseFrame& pose) {
    constexpr std::array<Joint, 6> arm{Joint::r_shoulder, Joint::r_elbow, Joint::r_wrist,
                                       Joint::l_shoulder, Joint::l_elbow, Joint::l_wrist};
    double sum = 0.0;
    for (Joint j : arm) sum += pose.score(j);
    return sum / static_cast<double>(arm.size());
}

RuleCheck rule_one(const PoseFrame& pose, const FusionConfig& cfg) {
    RuleCheck c{1, false, arm_score(pose), "frame", {}};
    c.passed = c.value >= cfg.pose_score_min;
    if (!c.passed) c.reason = "mean arm-joint score " + fmt(c.value) + " < " + fmt(cfg.pose_score_min);
    return c;
}

bool in_wheel(const HandDetection& h, const FusionConfig& cfg) noexcept {
    return cfg.wheel_region.contains(h.box.center());
}

} // namespace

// ---------------------------------------------------------------------------
// Region

Region Region::from_box(const Box& box) {
    if (!box.valid()) throw ArgumentError("region: box must satisfy x0 < x1 and y0 < y1");
    Region r;
    r.box_ = box;
    return r;
}

Region Region::from_polygon(std::vector<Point> vertices) {
    if (vertices.size() < 3) throw ArgumentError("region: polygon needs at least 3 vertices");
    Region r;
    r.polygon_ = std::move(vertices);
    return r;
}

bool Region::contains(Point p) const noexcept {
    if (box_) return box_->contains(p);
    const std::size_t n = polygon_.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point a = polygon_[i];
        const Point b = polygon_[j];
        // Points on an edge count as inside.
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        if (std::fabs(cross) <= 1e-12 && p.x >= std::min(a.x, b.x) && p.x <= std::max(a.x, b.x) &&
            p.y >= std::min(a.y, b.y) && p.y <= std::max(a.y, b.y))
            return true;
        if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x) inside = !inside;
    }
    return inside;
}

Region Region::scaled(double s) const {
    Region r;
    if (box_) r.box_ = box_->scaled(s);
    r.polygon_ = polygon_;
    for (Point& p : r.polygon_) p = {p.x * s, p.y * s};
    return r;
}

// ---------------------------------------------------------------------------
// Config

std::size_t FusionConfig::stabilization_window() const {
    if (consistency_frames) return *consistency_frames;
    return static_cast<std::size_t>(std::ceil(frame_rate / 2.0));
}

void FusionConfig::validate() const {
    if (wheel_region.empty()) throw ArgumentError("fusion: wheel_region is required");
    if (hand_score_strict < hand_score_min)
        throw ArgumentError("fusion: hand_score_strict must be >= hand_score_min");
    if (wrist_edge_dist_strict > wrist_edge_dist_max)
        throw ArgumentError("fusion: wrist_edge_dist_strict must be <= wrist_edge_dist_max");
    if (!(elbow_angle_max_deg >= 0.0 && elbow_angle_max_deg <= 180.0))
        throw ArgumentError("fusion: elbow_angle_max_deg must lie in [0, 180]");
    if (!(frame_rate > 0.0)) throw ArgumentError("fusion: frame_rate must be positive");
    if (stabilization_window() == 0) throw ArgumentError("fusion: consistency_frames must be >= 1");
}

// ---------------------------------------------------------------------------
// Association

const Association* WristAssociations::find(Side wrist) const noexcept {
    for (const Association& a : pairs)
        if (a.wrist == wrist) return &a;
    return nullptr;
}

const Association* WristAssociations::for_hand(std::size_t hand_index) const noexcept {
    for (const Association& a : pairs)
        if (a.hand_index == hand_index) return &a;
    return nullptr;
}

WristAssociations associate_wrists(const PoseFrame& pose, const std::vector<HandDetection>& hands,
                                   const FusionConfig& cfg) {
    WristAssociations out;
    std::vector<Association> candidates;
    for (Side side : kWristSides) {
        const Joint wj = wrist_of(side);
        const auto wrist = usable(pose, wj, cfg);
        if (!wrist) {
            out.notes.push_back(std::string(joint_name(wj)) + " missing or below pose score");
            continue;
        }
        const auto elbow = usable(pose, elbow_of(side), cfg);
        if (!elbow) out.notes.push_back(std::string(joint_name(elbow_of(side))) + " missing; angle check waived");

        const Point w = wrist->position();
        for (std::size_t i = 0; i < hands.size(); ++i) {
            if (!eligible(hands[i], cfg)) continue;
            const double d = diagonal_units(distance_to_boundary(hands[i].box, w));
            auto& nearest = out.nearest[side_slot(side)];
            if (!nearest || d < *nearest) nearest = d;
            if (d > cfg.wrist_edge_dist_max) continue;

            Association a{side, i, d, std::nullopt};
            if (elbow) {
                const Point c = hands[i].box.center();
                const double ax = w.x - elbow->x, ay = w.y - elbow->y;
                const double bx = c.x - w.x, by = c.y - w.y;
                const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
                double angle = 0.0;
                if (na > 0.0 && nb > 0.0)
                    angle = std::acos(std::clamp((ax * bx + ay * by) / (na * nb), -1.0, 1.0)) * 180.0 / std::numbers::pi;
                if (angle > cfg.elbow_angle_max_deg) continue;
                a.angle_deg = angle;
            }
            candidates.push_back(a);
        }
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Association& a, const Association& b) { return a.distance < b.distance; });
    for (const Association& a : candidates) {
        if (out.find(a.wrist) || out.for_hand(a.hand_index)) continue;
        out.pairs.push_back(a);
    }
    std::sort(out.pairs.begin(), out.pairs.end(),
              [](const Association& a, const Association& b) { return side_slot(a.wrist) < side_slot(b.wrist); });
    return out;
}

// ---------------------------------------------------------------------------
// Rules 1-7

RuleVerdict evaluate_safe_driving(const PoseFrame& pose, const std::vector<HandDetection>& hands,
                                  const FusionConfig& cfg) {
    RuleVerdict v;
    v.frame_index = pose.frame_index;
    const WristAssociations assoc = associate_wrists(pose, hands, cfg);
    v.associations = assoc.pairs;

    v.rules[0] = rule_one(pose, cfg);

    RuleCheck& r2 = v.rules[1];
    r2.id = 2;
    r2.value = static_cast<double>(std::count_if(hands.begin(), hands.end(), [&](const HandDetection& h) { return eligible(h, cfg); }));
    r2.passed = r2.value >= 2.0;
    if (!r2.passed)
        r2.reason = hands.empty() ? "no hands detected"
                                  : fmt(r2.value) + " hand(s) with score >= " + fmt(cfg.hand_score_min);

    RuleCheck& r3 = v.rules[2];
    r3.id = 3;
    for (Side s : kWristSides) {
        const auto& n = assoc.nearest[side_slot(s)];
        if (n && *n <= cfg.wrist_edge_dist_max) r3.value += 1.0;
        else if (r3.reason.empty()) r3.reason = std::string(joint_name(wrist_of(s))) + " not near any hand box";
    }
    r3.passed = r3.value == 2.0;
    if (r3.passed) r3.reason.clear();

    RuleCheck& r4 = v.rules[3];
    r4.id = 4;
    r4.value = static_cast<double>(assoc.pairs.size());
    r4.passed = assoc.pairs.size() == 2;
    if (!r4.passed) r4.reason = "arm direction matches " + fmt(r4.value) + " of 2 wrists";

    RuleCheck& r5 = v.rules[4];
    r5.id = 5;
    for (const Association& a : assoc.pairs)
        if (in_wheel(hands[a.hand_index], cfg)) r5.value += 1.0;
    r5.passed = r4.passed && r5.value == 2.0;
    if (!r5.passed) r5.reason = fmt(r5.value) + " associated hand(s) inside the wheel region";

    RuleCheck& r6 = v.rules[5];
    r6.id = 6;
    RuleCheck& r7 = v.rules[6];
    r7.id = 7;
    if (r4.passed) {
        r6.value = std::min(hands[assoc.pairs[0].hand_index].score, hands[assoc.pairs[1].hand_index].score);
        r6.passed = r6.value >= cfg.hand_score_strict;
        if (!r6.passed) r6.reason = "hand score " + fmt(r6.value) + " < " + fmt(cfg.hand_score_strict);
        r7.value = std::max(assoc.pairs[0].distance, assoc.pairs[1].distance);
        r7.passed = r7.value <= cfg.wrist_edge_dist_strict;
        if (!r7.passed) r7.reason = "wrist distance " + fmt(r7.value) + " > " + fmt(cfg.wrist_edge_dist_strict);
    } else {
        r6.reason = r7.reason = "needs both wrists associated";
    }

    v.safe_driving = std::all_of(v.rules.begin(), v.rules.begin() + 5, [](const RuleCheck& c) { return c.passed; });
    v.strict_safe_driving = v.safe_driving && r6.passed && r7.passed;
    for (const RuleCheck& c : v.rules)
        if (!c.passed) v.notes.push_back("rule " + std::to_string(c.id) + ": " + c.reason);
    return v;
}

// ---------------------------------------------------------------------------
// Relabeling and records

std::string_view record_kind_name(RecordKind k) noexcept {
    return k == RecordKind::hand_side_label ? "hand_side_label" : "pose_correction";
}

namespace {

std::vector<RuleCheck> wrist_trace(const Association& a) {
    const std::string wrist(joint_name(wrist_of(a.wrist)));
    return {RuleCheck{3, true, a.distance, wrist, {}},
            RuleCheck{4, true, a.angle_deg.value_or(0.0), wrist, a.angle_deg ? "" : "elbow missing; angle waived"}};
}

} // namespace

RelabelResult relabel_hands(const PoseFrame& pose, const std::vector<HandDetection>& hands, const FusionConfig& cfg) {
    RelabelResult out;
    out.hands = hands;

    const RuleCheck r1 = rule_one(pose, cfg);
    if (!r1.passed) {
        out.notes.push_back("relabel skipped: rule 1: " + r1.reason);
        return out;
    }
    std::vector<std::size_t> on_wheel;
    for (std::size_t i = 0; i < hands.size(); ++i)
        if (eligible(hands[i], cfg) && in_wheel(hands[i], cfg)) on_wheel.push_back(i);
    if (on_wheel.size() != 1) {
        out.notes.push_back("relabel skipped: " + std::to_string(on_wheel.size()) + " hands on the wheel");
        return out;
    }
    const WristAssociations assoc = associate_wrists(pose, hands, cfg);
    const std::size_t anchor = on_wheel.front();
    const Association* anchored = assoc.for_hand(anchor);
    if (!anchored) {
        out.notes.push_back("relabel skipped: on-wheel hand " + std::to_string(anchor) + " not associated to a wrist");
        return out;
    }

    const Side side = anchored->wrist;
    std::vector<RuleCheck> base{r1};
    const auto anchor_trace = wrist_trace(*anchored);
    base.insert(base.end(), anchor_trace.begin(), anchor_trace.end());
    base.push_back(RuleCheck{5, true, 1.0, "hand " + std::to_string(anchor), {}});

    std::vector<std::pair<Relabel, std::vector<RuleCheck>>> changes;
    if (hands[anchor].side != side) changes.push_back({Relabel{anchor, hands[anchor].side, side}, base});
    for (const Association& a : assoc.pairs) {
        if (a.hand_index == anchor || hands[a.hand_index].side != side) continue;
        auto trace = base;
        const auto extra = wrist_trace(a);
        trace.insert(trace.end(), extra.begin(), extra.end());
        changes.push_back({Relabel{a.hand_index, side, opposite(side)}, std::move(trace)});
    }
    for (const auto& [r, trace] : changes) {
        out.hands[r.hand_index].side = r.to;
        out.relabels.push_back(r);
    }
    for (auto& [r, trace] : changes) {
        TrainingRecord rec;
        rec.frame_index = pose.frame_index;
        rec.kind = RecordKind::hand_side_label;
        rec.hands = out.hands;
        rec.relabel = r;
        rec.provenance = std::move(trace);
        out.records.push_back(std::move(rec));
    }
    return out;
}

std::vector<TrainingRecord> emit_pose_corrections(const PoseFrame& pose, const RelabelResult& relabeled,
                                                  const FusionConfig&) {
    std::vector<TrainingRecord> out;
    for (const TrainingRecord& src : relabeled.records) {
        if (src.kind != RecordKind::hand_side_label || !src.relabel) continue;
        const HandDetection& h = relabeled.hands[src.relabel->hand_index];
        const Point c = h.box.center();
        TrainingRecord rec;
        rec.frame_index = pose.frame_index;
        rec.kind = RecordKind::pose_correction;
        rec.hands = {h};
        rec.relabel = src.relabel;
        rec.joint = wrist_of(h.side);
        rec.corrected = Keypoint{c.x, c.y, h.score};
        rec.provenance = src.provenance;
        out.push_back(std::move(rec));
    }
    return out;
}

FrameFusion fuse_frame(const PoseFrame& pose, const std::vector<HandDetection>& hands, const FusionConfig& cfg) {
    RelabelResult rl = relabel_hands(pose, hands, cfg);
    FrameFusion out;
    out.verdict = evaluate_safe_driving(pose, rl.hands, cfg);
    out.verdict.relabels = rl.relabels;
    out.verdict.notes.insert(out.verdict.notes.end(), rl.notes.begin(), rl.notes.end());
    auto corrections = emit_pose_corrections(pose, rl, cfg);
    out.records = std::move(rl.records);
    out.records.insert(out.records.end(), std::make_move_iterator(corrections.begin()),
                       std::make_move_iterator(corrections.end()));
    out.corrected_hands = std::move(rl.hands);
    return out;
}

std::vector<bool> temporal_verdict(const std::vector<RuleVerdict>& verdicts, const FusionConfig& cfg) {
    const std::size_t k = cfg.stabilization_window();
    if (k == 0) throw ArgumentError("temporal_verdict: consistency_frames must be >= 1");
    std::vector<bool> out(verdicts.size(), false);
    std::size_t run = 0;
    for (std::size_t t = 0; t < verdicts.size(); ++t) {
        run = verdicts[t].safe_driving ? run + 1 : 0;
        out[t] = run >= k;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Episodes

namespace {

constexpr std::array<std::string_view, 5> kPredicateNames{
    "both_hands_on_wheel", "object_near_head", "object_near_offwheel_wrist", "object_overlaps_hand",
    "offwheel_wrist_in_region"};

bool label_matches(const ObjectDetection& o, const std::vector<std::string>& labels) {
    return std::find(labels.begin(), labels.end(), o.label) != labels.end();
}

std::string side_label(const std::string& tmpl, Side s) {
    std::string out = tmpl;
    const std::string key = "{side}";
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos))
        out.replace(pos, key.size(), side_name(s));
    return out;
}

struct OffWheel {
    Side side;
    Keypoint wrist;
    std::size_t hand_index;
};

} // namespace

std::string_view predicate_name(Predicate p) noexcept { return kPredicateNames[static_cast<std::size_t>(p)]; }

std::optional<Predicate> parse_predicate(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kPredicateNames.size(); ++i)
        if (kPredicateNames[i] == name) return static_cast<Predicate>(i);
    return std::nullopt;
}

EpisodeRuleTable EpisodeRuleTable::defaults(const Region& radio_region) {
    EpisodeRuleTable t;
    t.rules.push_back({Predicate::both_hands_on_wheel, "safe_driving", {}, 0.12, 0.08, {}, {}, {}});
    t.rules.push_back({Predicate::object_near_head, "talking_on_phone_{side}", {"cell phone"}, 0.12, 0.08, {}, {}, {}});
    t.rules.push_back({Predicate::object_near_offwheel_wrist, "texting_{side}", {"cell phone"}, 0.12, 0.08, 0.1, {}, {}});
    t.rules.push_back({Predicate::object_overlaps_hand, "drinking", {"cup", "bottle"}, 0.12, 0.08, {}, {}, {}});
    if (!radio_region.empty())
        t.rules.push_back({Predicate::offwheel_wrist_in_region, "operating_radio", {}, 0.12, 0.08, {}, {}, radio_region});
    return t;
}

std::vector<std::string> fired_labels(const EpisodeFrame& frame, const EpisodeRuleTable& table,
                                      const FusionConfig& cfg) {
    const WristAssociations assoc = associate_wrists(frame.pose, frame.hands, cfg);
    std::vector<OffWheel> off;
    for (const Association& a : assoc.pairs)
        if (!in_wheel(frame.hands[a.hand_index], cfg))
            off.push_back({a.wrist, *frame.pose[wrist_of(a.wrist)], a.hand_index});
    const auto& neck = frame.pose[Joint::neck];
    const auto& head = frame.pose[Joint::head];

    std::vector<std::string> out;
    const auto fire = [&](std::string label) {
        if (std::find(out.begin(), out.end(), label) == out.end()) out.push_back(std::move(label));
    };
    const auto near_wrist = [&](const ObjectDetection& o, const OffWheel& h, double max_dist) {
        return diagonal_units(distance_to_box(o.box, h.wrist.position())) <= max_dist;
    };

    for (const EpisodeRule& rule : table.rules) {
        switch (rule.predicate) {
        case Predicate::both_hands_on_wheel:
            if (evaluate_safe_driving(frame.pose, frame.hands, cfg).safe_driving) fire(rule.label);
            break;
        case Predicate::object_near_head: {
            if (!head) break;
            const Box zone{head->x - rule.head_radius, head->y - rule.head_radius, head->x + rule.head_radius,
                           head->y + rule.head_radius};
            for (const OffWheel& h : off) {
                if (rule.above_neck && (!neck || h.wrist.y > neck->y - *rule.above_neck)) continue;
                for (const ObjectDetection& o : frame.objects)
                    if (label_matches(o, rule.objects) && o.box.intersects(zone) && near_wrist(o, h, rule.max_dist)) {
                        fire(side_label(rule.label, h.side));
                        break;
                    }
            }
            break;
        }
        case Predicate::object_near_offwheel_wrist:
            for (const OffWheel& h : off) {
                if (rule.below_neck && (!neck || h.wrist.y < neck->y + *rule.below_neck)) continue;
                for (const ObjectDetection& o : frame.objects)
                    if (label_matches(o, rule.objects) && near_wrist(o, h, rule.max_dist)) {
                        fire(side_label(rule.label, h.side));
                        break;
                    }
            }
            break;
        case Predicate::object_overlaps_hand:
            for (const Association& a : assoc.pairs)
                for (const ObjectDetection& o : frame.objects)
                    if (label_matches(o, rule.objects) && o.box.intersects(frame.hands[a.hand_index].box)) {
                        fire(side_label(rule.label, a.wrist));
                        break;
                    }
            break;
        case Predicate::offwheel_wrist_in_region:
            for (const OffWheel& h : off)
                if (rule.region.contains(h.wrist.position())) fire(side_label(rule.label, h.side));
            break;
        }
    }
    return out;
}

std::vector<EpisodeLabel> classify_episode(const std::vector<EpisodeFrame>& frames,
                                           const gfl::SegmentLabeling& segments, const EpisodeRuleTable& table,
                                           const FusionConfig& cfg) {
    std::vector<std::size_t> bounds{0};
    for (std::size_t cp : segments.change_points)
        if (cp > bounds.back() && cp < frames.size()) bounds.push_back(cp);
    bounds.push_back(frames.size());

    std::vector<EpisodeLabel> out;
    for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
        EpisodeLabel e{bounds[s], bounds[s + 1], std::string(kUnknownLabel), 0, {}};
        if (e.first_frame == e.end_frame) {
            e.notes.push_back("empty segment");
            out.push_back(std::move(e));
            continue;
        }
        std::map<std::string, std::size_t> votes;
        for (std::size_t f = e.first_frame; f < e.end_frame; ++f)
            for (std::string& l : fired_labels(frames[f], table, cfg)) ++votes[std::move(l)];
        std::size_t best = 0;
        std::vector<std::string> leaders;
        for (const auto& [label, n] : votes) {
            if (n > best) {
                best = n;
                leaders = {label};
            } else if (n == best) {
                leaders.push_back(label);
            }
        }
        if (best == 0) {
            e.notes.push_back("no rule fired");
        } else if (leaders.size() > 1) {
            std::string note = "ambiguous:";
            for (const auto& l : leaders) note += " " + l;
            note += " (" + std::to_string(best) + " votes each)";
            e.notes.push_back(std::move(note));
            e.votes = best;
        } else {
            e.label = leaders.front();
            e.votes = best;
        }
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace epk::fusion
