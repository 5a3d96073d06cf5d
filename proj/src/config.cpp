#include "epk/config.hpp"

#include "epk/error.hpp"
#include "epk/io.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace epk::config {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void bad(const std::string& key, const std::string& what) {
    throw ConfigError("config: " + key + ": " + what);
}

class Section {
public:
    Section(const json& doc, std::string prefix) : prefix_(std::move(prefix)) {
        if (doc.is_null()) return;
        if (!doc.is_object()) bad(prefix_.empty() ? "<root>" : prefix_, "must be an object");
        doc_ = &doc;
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        if (!doc_) return nullptr;
        const auto it = doc_->find(key);
        if (it == doc_->end() || it->is_null()) return nullptr;
        return &*it;
    }

    std::string name(const std::string& key) const { return prefix_.empty() ? key : prefix_ + "." + key; }

    void number(const std::string& key, double& out, bool positive = false) {
        if (const json* j = find(key)) {
            if (!j->is_number()) bad(name(key), "must be a number");
            out = j->get<double>();
            if (!std::isfinite(out)) bad(name(key), "must be finite");
            if (positive && !(out > 0.0)) bad(name(key), "must be positive");
            if (out < 0.0) bad(name(key), "must be non-negative");
        }
    }

    void number(const std::string& key, std::optional<double>& out) {
        if (find(key)) {
            double v = 0.0;
            number(key, v, true);
            out = v;
        }
    }

    template <class T>
    void integer(const std::string& key, T& out) {
        if (const json* j = find(key)) {
            if (!j->is_number_unsigned()) bad(name(key), "must be a non-negative integer");
            out = static_cast<T>(j->get<std::uint64_t>());
        }
    }

    template <class T>
    void integer(const std::string& key, std::optional<T>& out) {
        if (find(key)) {
            T v{};
            integer(key, v);
            out = v;
        }
    }

    void finish() const {
        if (!doc_) return;
        for (const auto& [key, value] : doc_->items())
            if (!seen_.contains(key)) bad(name(key), "unknown key");
    }

private:
    const json* doc_ = nullptr;
    std::string prefix_;
    std::set<std::string> seen_;
};

const json& section_of(const json* j) {
    static const json null;
    return j ? *j : null;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

Point point_of(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
        bad(what, "polygon vertices must be [x, y]");
    return {j[0].get<double>(), j[1].get<double>()};
}

} // namespace

const std::vector<KeyInfo>& known_keys() {
    static const std::vector<KeyInfo> keys{
        {"downscale_limit", "longest frame side after box downscaling for RPCA"},
        {"seed", "seed for every randomized step"},
        {"rpca.lambda", "sparsity weight (default 1/sqrt(max(D,T)))"},
        {"rpca.tolerance", "relative residual stopping tolerance"},
        {"rpca.max_iterations", "iteration cap"},
        {"rpca.penalty_growth", "penalty growth factor per iteration"},
        {"rpca.penalty_initial", "initial penalty (default 1.25/|X|_2)"},
        {"rpca.penalty_cap", "penalty cap (default 1e7 x initial)"},
        {"rpca.warning_sigma", "outlier-energy warning level in standard deviations"},
        {"segment.lambda", "fixed fused-lasso weight (default: data-scaled)"},
        {"segment.lambda_factor", "multiplier for the data-scaled weight"},
        {"segment.order", "differencing order"},
        {"segment.admm_penalty", "initial ADMM penalty"},
        {"segment.tolerance", "ADMM stopping tolerance"},
        {"segment.max_iterations", "ADMM iteration cap"},
        {"segment.thresholds", "list of change-point thresholds"},
        {"segment.threshold_mode", "relative (fraction of max strength) or absolute"},
        {"segment.min_gap", "minimum distance between change points"},
        {"flow.window", "Lucas-Kanade window side (odd)"},
        {"flow.eigen_floor_scale", "eigenvalue floor per window pixel"},
        {"flow.max_iterations", "Lucas-Kanade iteration cap"},
        {"flow.epsilon", "Lucas-Kanade step tolerance in pixels"},
        {"flow.fb_max_error", "forward-backward error limit in pixels"},
        {"flow.canonical_size", "box resample size"},
        {"flow.max_features", "features per box"},
        {"flow.feature_quality", "feature quality relative to the best corner"},
        {"flow.feature_min_distance", "minimum feature spacing in patch pixels"},
        {"flow.gap_max", "frames a track may skip"},
        {"flow.threshold", "box similarity needed to link two boxes"},
        {"flow.merge_threshold", "appearance correlation needed to merge groups"},
        {"fusion.wheel_region", "[x0,y0,x1,y1] or [[x,y],...] normalized"},
        {"fusion.radio_region", "region used by the default operating_radio rule"},
        {"fusion.pose_score_min", "minimum pose score"},
        {"fusion.hand_score_min", "minimum hand score"},
        {"fusion.hand_score_strict", "strict hand score"},
        {"fusion.wrist_edge_dist_max", "wrist to box-edge distance (diagonal units)"},
        {"fusion.wrist_edge_dist_strict", "strict wrist distance"},
        {"fusion.elbow_angle_max_deg", "largest arm-to-box angle"},
        {"fusion.frame_rate", "frames per second"},
        {"fusion.consistency_frames", "frames a verdict must hold (default ceil(rate/2))"},
        {"fusion.episode_rules", "episode rule table file or inline rule list"},
    };
    return keys;
}

void apply_override(json& doc, const std::string& dotted_key, const std::string& value) {
    const bool known = std::any_of(known_keys().begin(), known_keys().end(),
                                   [&](const KeyInfo& k) { return k.key == dotted_key; });
    if (!known) bad(dotted_key, "unknown key");
    json parsed = json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;
    if (!doc.is_object()) doc = json::object();
    json* node = &doc;
    std::size_t start = 0;
    for (std::size_t dot = dotted_key.find('.'); dot != std::string::npos; dot = dotted_key.find('.', start)) {
        node = &(*node)[dotted_key.substr(start, dot - start)];
        if (!node->is_object()) *node = json::object();
        start = dot + 1;
    }
    (*node)[dotted_key.substr(start)] = std::move(parsed);
}

json load_document(const fs::path& path) {
    const std::string text = io::read_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": byte " + std::to_string(e.byte > 0 ? e.byte - 1 : 0) + ": invalid JSON");
    }
}

fusion::Region region_from_json(const json& j, const std::string& what) {
    if (!j.is_array() || j.empty()) bad(what, "must be [x0,y0,x1,y1] or a list of [x, y] vertices");
    try {
        if (j[0].is_number()) {
            if (j.size() != 4) bad(what, "box regions need exactly 4 numbers");
            for (const json& v : j)
                if (!v.is_number()) bad(what, "box regions need exactly 4 numbers");
            return fusion::Region::from_box({j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()});
        }
        std::vector<Point> pts;
        for (const json& v : j) pts.push_back(point_of(v, what));
        return fusion::Region::from_polygon(std::move(pts));
    } catch (const ArgumentError& e) {
        bad(what, e.what());
    }
}

json region_to_json(const fusion::Region& r) {
    if (r.box()) return json::array({r.box()->x0, r.box()->y0, r.box()->x1, r.box()->y1});
    json out = json::array();
    for (const Point& p : r.polygon()) out.push_back(json::array({p.x, p.y}));
    return out;
}

fusion::EpisodeRuleTable rule_table_from_json(const json& doc) {
    const json* list = &doc;
    if (doc.is_object()) {
        if (!doc.contains("rules") || doc.size() != 1) bad("episode_rules", "expected {\"rules\": [...]}");
        list = &doc["rules"];
    }
    if (!list->is_array()) bad("episode_rules", "must be a list of rules");
    fusion::EpisodeRuleTable t;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& r = (*list)[i];
        const std::string where = "episode_rules[" + std::to_string(i) + "]";
        Section s(r, where);
        fusion::EpisodeRule rule;
        const json* pred = s.find("predicate");
        if (!pred || !pred->is_string()) bad(where, "needs a string \"predicate\"");
        const auto p = fusion::parse_predicate(pred->get<std::string>());
        if (!p) bad(where, "unknown predicate \"" + pred->get<std::string>() + "\"");
        rule.predicate = *p;
        const json* label = s.find("label");
        if (!label || !label->is_string() || label->get<std::string>().empty()) bad(where, "needs a string \"label\"");
        rule.label = label->get<std::string>();
        if (const json* o = s.find("objects")) {
            if (!o->is_array()) bad(s.name("objects"), "must be a list of labels");
            for (const json& v : *o) {
                if (!v.is_string()) bad(s.name("objects"), "must be a list of labels");
                rule.objects.push_back(v.get<std::string>());
            }
        }
        s.number("head_radius", rule.head_radius);
        s.number("max_dist", rule.max_dist);
        if (s.find("below_neck")) {
            double v = 0.0;
            s.number("below_neck", v);
            rule.below_neck = v;
        }
        if (s.find("above_neck")) {
            double v = 0.0;
            s.number("above_neck", v);
            rule.above_neck = v;
        }
        if (const json* reg = s.find("region")) rule.region = region_from_json(*reg, s.name("region"));
        if (rule.predicate == fusion::Predicate::offwheel_wrist_in_region && rule.region.empty())
            bad(where, "offwheel_wrist_in_region needs a \"region\"");
        const bool wants_objects = rule.predicate == fusion::Predicate::object_near_head ||
                                   rule.predicate == fusion::Predicate::object_near_offwheel_wrist ||
                                   rule.predicate == fusion::Predicate::object_overlaps_hand;
        if (wants_objects && rule.objects.empty()) bad(where, "needs a non-empty \"objects\" list");
        s.finish();
        t.rules.push_back(std::move(rule));
    }
    return t;
}

json rule_table_to_json(const fusion::EpisodeRuleTable& t) {
    json rules = json::array();
    for (const fusion::EpisodeRule& r : t.rules) {
        json j{{"predicate", fusion::predicate_name(r.predicate)}, {"label", r.label}};
        if (!r.objects.empty()) j["objects"] = r.objects;
        if (r.predicate == fusion::Predicate::object_near_head) j["head_radius"] = r.head_radius;
        if (r.predicate == fusion::Predicate::object_near_head || r.predicate == fusion::Predicate::object_near_offwheel_wrist)
            j["max_dist"] = r.max_dist;
        if (r.below_neck) j["below_neck"] = *r.below_neck;
        if (r.above_neck) j["above_neck"] = *r.above_neck;
        if (!r.region.empty()) j["region"] = region_to_json(r.region);
        rules.push_back(std::move(j));
    }
    return json{{"rules", rules}};
}

gfl::GflConfig SegmentSettings::solver(double lambda_value) const {
    gfl::GflConfig c;
    c.lambda = lambda_value;
    c.order = order;
    c.admm_penalty = admm_penalty;
    c.tolerance = tolerance;
    c.max_iterations = max_iterations;
    return c;
}

std::vector<double> SegmentSettings::absolute_thresholds(const std::vector<double>& strengths) const {
    if (!relative) return thresholds;
    const double top = strengths.empty() ? 0.0 : *std::max_element(strengths.begin(), strengths.end());
    std::vector<double> out;
    for (double t : thresholds) out.push_back(t * top);
    return out;
}

fusion::EpisodeRuleTable FusionSettings::table() const {
    return episode_rules ? *episode_rules : fusion::EpisodeRuleTable::defaults(radio_region);
}

PipelineConfig from_json(const json& doc, const fs::path& base_dir) {
    PipelineConfig c;
    Section root(doc, "");
    root.integer("downscale_limit", c.downscale_limit);
    if (c.downscale_limit == 0) bad("downscale_limit", "must be positive");
    root.integer("seed", c.seed);

    {
        const json* j = root.find("rpca");
        Section s(section_of(j), "rpca");
        s.number("lambda", c.rpca.solver.lambda);
        s.number("tolerance", c.rpca.solver.tolerance, true);
        s.integer("max_iterations", c.rpca.solver.max_iterations);
        s.number("penalty_growth", c.rpca.solver.penalty_growth, true);
        s.number("penalty_initial", c.rpca.solver.penalty_initial);
        s.number("penalty_cap", c.rpca.solver.penalty_cap);
        s.number("warning_sigma", c.rpca.warning_sigma);
        s.finish();
        try {
            c.rpca.solver.validate();
        } catch (const ArgumentError& e) {
            bad("rpca", e.what());
        }
    }
    {
        const json* j = root.find("segment");
        Section s(section_of(j), "segment");
        SegmentSettings& g = c.segment;
        s.number("lambda", g.lambda);
        s.number("lambda_factor", g.lambda_factor, true);
        s.integer("order", g.order);
        if (g.order == 0) bad("segment.order", "must be >= 1");
        s.number("admm_penalty", g.admm_penalty, true);
        s.number("tolerance", g.tolerance, true);
        s.integer("max_iterations", g.max_iterations);
        if (const json* t = s.find("thresholds")) {
            g.thresholds.clear();
            const auto take = [&](const json& v) {
                if (!v.is_number() || v.get<double>() < 0.0) bad("segment.thresholds", "must be non-negative numbers");
                g.thresholds.push_back(v.get<double>());
            };
            if (t->is_array()) {
                for (const json& v : *t) take(v);
            } else if (t->is_string()) {
                std::stringstream ss(t->get<std::string>());
                for (std::string item; std::getline(ss, item, ',');) {
                    const json v = json::parse(item, nullptr, false);
                    if (v.is_discarded()) bad("segment.thresholds", "cannot parse \"" + item + "\"");
                    take(v);
                }
            } else {
                take(*t);
            }
            if (g.thresholds.empty()) bad("segment.thresholds", "needs at least one value");
        }
        if (const json* m = s.find("threshold_mode")) {
            if (*m == "relative") g.relative = true;
            else if (*m == "absolute") g.relative = false;
            else bad("segment.threshold_mode", "must be \"relative\" or \"absolute\"");
        }
        s.integer("min_gap", g.min_gap);
        s.finish();
    }
    {
        const json* j = root.find("flow");
        Section s(section_of(j), "flow");
        flow::FlowConfig& f = c.flow.tracker;
        s.integer("window", f.window);
        s.number("eigen_floor_scale", f.eigen_floor_scale);
        s.integer("max_iterations", f.max_iterations);
        s.number("epsilon", f.epsilon, true);
        s.number("fb_max_error", f.fb_max_error);
        s.integer("canonical_size", f.canonical_size);
        s.integer("max_features", f.max_features);
        s.number("feature_quality", f.feature_quality, true);
        s.number("feature_min_distance", f.feature_min_distance);
        s.integer("gap_max", f.gap_max);
        s.number("threshold", c.flow.threshold);
        s.number("merge_threshold", c.flow.merge_threshold);
        s.finish();
        if (f.max_features == 0) bad("flow.max_features", "must be >= 1");
        try {
            f.validate();
        } catch (const ArgumentError& e) {
            bad("flow", e.what());
        }
    }
    {
        const json* j = root.find("fusion");
        Section s(section_of(j), "fusion");
        fusion::FusionConfig& f = c.fusion.rules;
        if (const json* w = s.find("wheel_region")) f.wheel_region = region_from_json(*w, "fusion.wheel_region");
        if (const json* r = s.find("radio_region")) c.fusion.radio_region = region_from_json(*r, "fusion.radio_region");
        s.number("pose_score_min", f.pose_score_min);
        s.number("hand_score_min", f.hand_score_min);
        s.number("hand_score_strict", f.hand_score_strict);
        s.number("wrist_edge_dist_max", f.wrist_edge_dist_max);
        s.number("wrist_edge_dist_strict", f.wrist_edge_dist_strict);
        s.number("elbow_angle_max_deg", f.elbow_angle_max_deg);
        s.number("frame_rate", f.frame_rate, true);
        s.integer("consistency_frames", f.consistency_frames);
        if (const json* r = s.find("episode_rules")) {
            if (r->is_string()) {
                const fs::path p = resolve(base_dir, r->get<std::string>());
                std::error_code ec;
                if (!fs::is_regular_file(p, ec)) bad("fusion.episode_rules", "file not found: " + p.string());
                try {
                    c.fusion.episode_rules = rule_table_from_json(load_document(p));
                } catch (const InputError& e) {
                    bad("fusion.episode_rules", e.what());
                }
            } else {
                c.fusion.episode_rules = rule_table_from_json(*r);
            }
        }
        s.finish();
        fusion::FusionConfig probe = f;
        if (probe.wheel_region.empty()) probe.wheel_region = fusion::Region::from_box({0, 0, 1, 1});
        try {
            probe.validate();
        } catch (const ArgumentError& e) {
            bad("fusion", e.what());
        }
    }
    root.finish();
    return c;
}

} // namespace epk::config
