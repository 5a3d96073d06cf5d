#include "epk/commands.hpp"

#include "epk/error.hpp"
#include "epk/io.hpp"
#include "epk/synth.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <set>
#include <sstream>

namespace epk::app {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(2) + "\n"; }

/// Re-throws library errors with the stage named, keeping the error kind.
template <class F>
auto in_stage(const std::string& stage, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const InputError& e) {
        throw InputError("stage " + stage + ": " + e.what());
    } catch (const SchemaError& e) {
        throw SchemaError("stage " + stage + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError("stage " + stage + ": " + e.what());
    } catch (const ArgumentError& e) {
        throw SchemaError("stage " + stage + ": " + e.what());
    } catch (const ConvergenceError& e) {
        throw std::runtime_error("stage " + stage + ": " + e.what());
    }
}

std::vector<DetectionFrame> load_detections(const fs::path& path) {
    auto frames = io::read_detections(path);
    if (frames.empty()) throw InputError(path.string() + ": no detection lines");
    return frames;
}

json rule_json(const fusion::RuleCheck& c) {
    json j{{"id", c.id}, {"passed", c.passed}, {"value", c.value}, {"scope", c.scope}};
    if (!c.reason.empty()) j["reason"] = c.reason;
    return j;
}

json hand_json(const HandDetection& h) {
    return {{"box", {h.box.x0, h.box.y0, h.box.x1, h.box.y1}},
            {"score", h.score},
            {"side", side_name(h.side)},
            {"side_score", h.side_score}};
}

json relabel_json(const fusion::Relabel& r) {
    return {{"hand", r.hand_index}, {"from", side_name(r.from)}, {"to", side_name(r.to)}};
}

std::string jsonl(const std::vector<json>& rows) {
    std::string out;
    for (const json& r : rows) out += r.dump() + "\n";
    return out;
}

// --- file writers shared by subcommands and the pipeline ---------------------

json rpca_summary(const RpcaOutcome& o, std::size_t rows, std::size_t cols) {
    const auto& r = o.result;
    json j{{"rows", rows},
           {"cols", cols},
           {"lambda", r.lambda},
           {"iterations", r.iterations},
           {"converged", r.converged},
           {"final_residual", r.final_residual},
           {"rank", r.singular_values.size()},
           {"singular_values", r.singular_values},
           {"outlier_energy", {{"mean", o.energy_mean}, {"std", o.energy_std}, {"warning_frames", o.warning_frames}}}};
    return j;
}

std::string energy_csv(const RpcaOutcome& o) {
    std::string s = "frame,energy,warning\n";
    std::set<std::size_t> warn(o.warning_frames.begin(), o.warning_frames.end());
    for (std::size_t t = 0; t < o.energy.size(); ++t)
        s += std::to_string(t) + "," + io::format_double(o.energy[t]) + "," + (warn.contains(t) ? "1" : "0") + "\n";
    return s;
}

json segmentation_json(const SegmentOutcome& s, const std::vector<DetectionFrame>& frames,
                       const config::SegmentSettings& settings) {
    json levels = json::array();
    for (std::size_t k = 0; k < s.labelings.size(); ++k) {
        std::vector<std::size_t> cps;
        for (std::size_t c : s.labelings[k].change_points) cps.push_back(frames[c].frame);
        levels.push_back({{"threshold", s.thresholds[k]},
                          {"setting", settings.thresholds[k]},
                          {"jump_indices", s.labelings[k].jump_indices},
                          {"change_points", cps},
                          {"segments", cps.size() + 1}});
    }
    return {{"lambda", s.lambda},
            {"order", settings.order},
            {"min_gap", settings.min_gap},
            {"threshold_mode", settings.relative ? "relative" : "absolute"},
            {"iterations", s.result.iterations},
            {"converged", s.result.converged},
            {"objective", s.result.objective},
            {"levels", levels}};
}

void write_segmentation(const fs::path& out, const SegmentOutcome& s, const std::vector<DetectionFrame>& frames,
                        const config::SegmentSettings& settings) {
    std::string strengths = "index,strength\n";
    for (std::size_t i = 0; i < s.result.jump_strengths.size(); ++i)
        strengths += std::to_string(i) + "," + io::format_double(s.result.jump_strengths[i]) + "\n";
    io::write_file(out / "jump_strengths.csv", strengths);
    io::write_file(out / "change_points.json", dump(segmentation_json(s, frames, settings)));

    std::string groups = "frame";
    for (std::size_t k = 0; k < s.labelings.size(); ++k) groups += ",group_" + std::to_string(k);
    groups += "\n";
    for (std::size_t t = 0; t < frames.size(); ++t) {
        groups += std::to_string(frames[t].frame);
        for (const auto& l : s.labelings) groups += "," + std::to_string(l.group_ids[t]);
        groups += "\n";
    }
    io::write_file(out / "group_ids.csv", groups);
    io::write_file(out / "strengths.svg",
                   io::line_plot_svg({{"jump strength", s.result.jump_strengths}}, s.thresholds, "jump strengths"));
}

json groups_json(const std::vector<flow::BoxTrackGroup>& groups, const config::FlowSettings& settings) {
    json list = json::array();
    for (const auto& g : groups)
        list.push_back({{"id", g.group_id},
                        {"size", g.members.size()},
                        {"first_frame", g.members.front().frame},
                        {"last_frame", g.members.back().frame}});
    return {{"threshold", settings.threshold}, {"merge_threshold", settings.merge_threshold}, {"groups", list}};
}

std::string groups_csv(const std::vector<flow::BoxTrackGroup>& groups) {
    std::vector<std::tuple<std::size_t, std::size_t, std::size_t>> rows;
    for (const auto& g : groups)
        for (const auto& m : g.members) rows.emplace_back(m.frame, m.box_index, g.group_id);
    std::sort(rows.begin(), rows.end());
    std::string s = "frame,box_index,group\n";
    for (const auto& [f, b, g] : rows) s += std::to_string(f) + "," + std::to_string(b) + "," + std::to_string(g) + "\n";
    return s;
}

void write_fusion(const fs::path& out, const FusionOutcome& f, const std::vector<DetectionFrame>& frames,
                  const std::vector<std::vector<std::string>>& warnings) {
    std::vector<json> verdicts;
    for (std::size_t t = 0; t < f.verdicts.size(); ++t)
        verdicts.push_back(verdict_json(f.verdicts[t], f.stabilized[t], warnings.empty() ? std::vector<std::string>{} : warnings[t]));
    io::write_file(out / "verdicts.jsonl", jsonl(verdicts));
    std::vector<json> records;
    for (const auto& r : f.records) records.push_back(record_json(r));
    io::write_file(out / "training_records.jsonl", jsonl(records));
    json eps = json::array();
    for (const auto& e : f.episodes) {
        json j = episode_json(e);
        j["first_frame"] = frames[e.first_frame].frame;
        j["last_frame"] = frames[e.end_frame - 1].frame;
        eps.push_back(std::move(j));
    }
    io::write_file(out / "episodes.json", dump(json{{"episodes", eps}}));
}

// --- synth parameters ---------------------------------------------------------

class Params {
public:
    explicit Params(const std::map<std::string, std::string>& p) : p_(p) {}

    std::string text(const std::string& key, const std::string& fallback) {
        used_.insert(key);
        const auto it = p_.find(key);
        return it == p_.end() ? fallback : it->second;
    }
    double real(const std::string& key, double fallback) {
        const std::string s = text(key, "");
        if (s.empty()) return fallback;
        try {
            std::size_t n = 0;
            const double v = std::stod(s, &n);
            if (n != s.size() || !std::isfinite(v)) throw std::invalid_argument(s);
            return v;
        } catch (const std::exception&) {
            throw ConfigError("synth: parameter " + key + " expects a number, got \"" + s + "\"");
        }
    }
    std::size_t count(const std::string& key, std::size_t fallback) {
        const double v = real(key, static_cast<double>(fallback));
        if (v < 0.0 || v != std::floor(v)) throw ConfigError("synth: parameter " + key + " expects a non-negative integer");
        return static_cast<std::size_t>(v);
    }
    std::vector<std::size_t> counts(const std::string& key, const std::string& fallback) {
        std::vector<std::size_t> out;
        std::stringstream ss(text(key, fallback));
        for (std::string item; std::getline(ss, item, ',');) {
            if (item.empty()) continue;
            try {
                out.push_back(static_cast<std::size_t>(std::stoull(item)));
            } catch (const std::exception&) {
                throw ConfigError("synth: parameter " + key + " expects comma-separated integers");
            }
        }
        return out;
    }
    void finish(const std::string& generator) const {
        for (const auto& [k, v] : p_)
            if (!used_.contains(k)) throw ConfigError("synth: generator " + generator + " has no parameter \"" + k + "\"");
    }

private:
    const std::map<std::string, std::string>& p_;
    std::set<std::string> used_;
};

std::vector<synth::EpisodeSpec> parse_schedule(const std::string& text) {
    std::vector<synth::EpisodeSpec> out;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
        if (item.empty()) continue;
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("synth: schedule items must be label:frames");
        try {
            out.push_back({item.substr(0, colon), static_cast<std::size_t>(std::stoull(item.substr(colon + 1)))});
        } catch (const std::exception&) {
            throw ConfigError("synth: schedule items must be label:frames");
        }
    }
    return out;
}

constexpr const char* kDefaultSchedule =
    "safe_driving:300,texting_right:300,drinking:300,reaching_behind:300,talking_on_phone_left:300";

/// Piecewise rows as arm-joint coordinates, so the bundle can be segmented from a detections file.
std::vector<DetectionFrame> piecewise_detections(const Matrix& x) {
    const double top = std::max(max_abs(x), 1e-9);
    std::vector<DetectionFrame> frames(x.cols());
    for (std::size_t t = 0; t < x.cols(); ++t) {
        DetectionFrame& f = frames[t];
        f.frame = t;
        f.pose.frame_index = t;
        f.pose[Joint::head] = Keypoint{0.5, 0.22, 0.9};
        f.pose[Joint::neck] = Keypoint{0.5, 0.32, 0.9};
        f.pose[Joint::r_shoulder] = Keypoint{0.4, 0.36, 0.9};
        f.pose[Joint::l_shoulder] = Keypoint{0.6, 0.36, 0.9};
        for (std::size_t k = 0; k < gfl::kArmJoints.size(); ++k) {
            const auto coord = [&](std::size_t row) { return 0.5 + 0.4 * x(row, t) / top; };
            f.pose[gfl::kArmJoints[k]] = Keypoint{coord(2 * k), coord(2 * k + 1), 0.9};
        }
    }
    return frames;
}

} // namespace

// ---------------------------------------------------------------------------
// Stage computations

Matrix frames_to_matrix(const std::vector<GrayFrame>& frames, std::size_t downscale_limit) {
    if (frames.empty()) throw InputError("no frames");
    std::vector<GrayFrame> small;
    small.reserve(frames.size());
    for (const auto& f : frames) small.push_back(downscale_to_limit(f, downscale_limit));
    const std::size_t d = small.front().pixels().size();
    Matrix x(d, small.size());
    for (std::size_t t = 0; t < small.size(); ++t) {
        const auto px = small[t].pixels();
        if (px.size() != d) throw SchemaError("frame " + std::to_string(t) + " differs in size");
        for (std::size_t i = 0; i < d; ++i) x(i, t) = px[i];
    }
    return x;
}

RpcaOutcome run_rpca(const Matrix& x, const config::RpcaSettings& settings) {
    RpcaOutcome o;
    o.result = rpca::decompose(x, settings.solver);
    o.energy = rpca::column_energy(o.result.sparse);
    const double n = static_cast<double>(o.energy.size());
    o.energy_mean = std::accumulate(o.energy.begin(), o.energy.end(), 0.0) / n;
    double var = 0.0;
    for (double e : o.energy) var += (e - o.energy_mean) * (e - o.energy_mean);
    o.energy_std = std::sqrt(var / n);
    if (o.energy_std > 0.0)
        for (std::size_t t = 0; t < o.energy.size(); ++t)
            if (o.energy[t] > o.energy_mean + settings.warning_sigma * o.energy_std) o.warning_frames.push_back(t);
    return o;
}

SegmentOutcome run_segment(const std::vector<DetectionFrame>& frames, const config::SegmentSettings& settings) {
    std::vector<PoseFrame> poses;
    poses.reserve(frames.size());
    for (const auto& f : frames) poses.push_back(f.pose);
    gfl::WeightedSeries series;
    try {
        series = gfl::normalize_and_weight(poses);
    } catch (const ArgumentError& e) {
        throw SchemaError(e.what());
    }
    SegmentOutcome s;
    if (frames.size() <= settings.order) {
        s.result.smoothed = series.x;
        s.result.converged = true;
    } else {
        s.lambda = settings.lambda ? *settings.lambda : settings.lambda_factor * gfl::suggest_lambda(series.x, series.w);
        try {
            s.result = gfl::solve(series.x, series.w, settings.solver(s.lambda));
        } catch (const ArgumentError& e) {
            throw SchemaError(e.what());
        }
    }
    s.thresholds = settings.absolute_thresholds(s.result.jump_strengths);
    for (double th : s.thresholds) {
        auto l = gfl::extract_change_points(s.result.jump_strengths, th, settings.min_gap, settings.order);
        if (l.group_ids.size() != frames.size()) l.group_ids = gfl::group_ids_from_change_points(l.change_points, frames.size());
        s.labelings.push_back(std::move(l));
    }
    return s;
}

std::vector<std::vector<Box>> hand_boxes(const std::vector<DetectionFrame>& frames) {
    std::vector<std::vector<Box>> out;
    for (const auto& f : frames) {
        std::vector<Box> b;
        for (const auto& h : f.hands) b.push_back(h.box);
        out.push_back(std::move(b));
    }
    return out;
}

std::vector<flow::BoxTrackGroup> run_flow_group(const std::vector<GrayFrame>& frames,
                                                const std::vector<std::vector<Box>>& normalized_boxes,
                                                const config::FlowSettings& settings) {
    if (frames.size() != normalized_boxes.size())
        throw SchemaError(std::to_string(frames.size()) + " frames but " + std::to_string(normalized_boxes.size()) +
                          " box lines");
    std::vector<std::vector<Box>> pixel(normalized_boxes.size());
    for (std::size_t f = 0; f < frames.size(); ++f) {
        const double w = static_cast<double>(frames[f].width());
        const double h = static_cast<double>(frames[f].height());
        for (const Box& b : normalized_boxes[f]) pixel[f].push_back({b.x0 * w, b.y0 * h, b.x1 * w, b.y1 * h});
    }
    const auto raw = flow::group_boxes(frames, pixel, settings.threshold, settings.tracker);
    return flow::merge_groups(raw, frames, settings.merge_threshold, settings.tracker);
}

FusionOutcome run_fusion(const std::vector<DetectionFrame>& frames, const config::FusionSettings& settings,
                         const gfl::SegmentLabeling& segments) {
    if (settings.rules.wheel_region.empty()) throw ConfigError("fusion.wheel_region is required");
    settings.rules.validate();
    FusionOutcome o;
    std::vector<fusion::EpisodeFrame> episode_frames;
    for (const auto& f : frames) {
        fusion::FrameFusion ff = fusion::fuse_frame(f.pose, f.hands, settings.rules);
        o.verdicts.push_back(std::move(ff.verdict));
        o.records.insert(o.records.end(), std::make_move_iterator(ff.records.begin()),
                         std::make_move_iterator(ff.records.end()));
        episode_frames.push_back({f.pose, std::move(ff.corrected_hands), f.objects});
    }
    o.stabilized = fusion::temporal_verdict(o.verdicts, settings.rules);
    o.episodes = fusion::classify_episode(episode_frames, segments, settings.table(), settings.rules);
    o.frame_labels.assign(frames.size(), std::string(fusion::kUnknownLabel));
    for (const auto& e : o.episodes)
        for (std::size_t t = e.first_frame; t < e.end_frame; ++t) o.frame_labels[t] = e.label;
    return o;
}

// ---------------------------------------------------------------------------
// Serialization

json verdict_json(const fusion::RuleVerdict& v, bool stabilized, const std::vector<std::string>& warnings) {
    json rules = json::array();
    for (const auto& c : v.rules) rules.push_back(rule_json(c));
    json assoc = json::array();
    for (const auto& a : v.associations) {
        json j{{"wrist", joint_name(wrist_of(a.wrist))}, {"hand", a.hand_index}, {"distance", a.distance}};
        j["angle_deg"] = a.angle_deg ? json(*a.angle_deg) : json(nullptr);
        assoc.push_back(std::move(j));
    }
    json relabels = json::array();
    for (const auto& r : v.relabels) relabels.push_back(relabel_json(r));
    return {{"frame", v.frame_index},
            {"safe_driving", v.safe_driving},
            {"strict_safe_driving", v.strict_safe_driving},
            {"stabilized", stabilized},
            {"rules", rules},
            {"associations", assoc},
            {"relabels", relabels},
            {"notes", v.notes},
            {"warnings", warnings}};
}

json record_json(const fusion::TrainingRecord& r) {
    json hands = json::array();
    for (const auto& h : r.hands) hands.push_back(hand_json(h));
    json prov = json::array();
    for (const auto& c : r.provenance) prov.push_back(rule_json(c));
    json j{{"frame", r.frame_index}, {"kind", fusion::record_kind_name(r.kind)}, {"hands", hands}, {"provenance", prov}};
    if (r.relabel) j["relabel"] = relabel_json(*r.relabel);
    if (r.joint && r.corrected)
        j["correction"] = {{"joint", joint_name(*r.joint)}, {"x", r.corrected->x}, {"y", r.corrected->y}, {"score", r.corrected->score}};
    return j;
}

json episode_json(const fusion::EpisodeLabel& e) {
    return {{"start", e.first_frame}, {"end", e.end_frame}, {"label", e.label}, {"votes", e.votes}, {"notes", e.notes}};
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_rpca(const std::vector<fs::path>& inputs, const fs::path& out, const config::PipelineConfig& cfg,
              const RpcaTruth& truth) {
    if (inputs.empty()) throw InputError("rpca: no input given");
    if (inputs.size() > 1 && (truth.low_rank || truth.sparse))
        throw ConfigError("rpca: truth files apply to a single input only");
    std::set<std::string> stems;
    for (const auto& in : inputs)
        if (!stems.insert(in.stem().string()).second)
            throw ConfigError("rpca: two inputs share the name " + in.stem().string());

    const auto process = [&](const fs::path& input, const fs::path& dir) {
        std::error_code ec;
        const Matrix x = fs::is_directory(input, ec) ? frames_to_matrix(io::read_frames(input), cfg.downscale_limit)
                                                     : io::read_matrix(input);
        if (x.rows() == 0 || x.cols() == 0) throw InputError(input.string() + ": empty matrix");
        RpcaOutcome o;
        try {
            o = run_rpca(x, cfg.rpca);
        } catch (const ArgumentError& e) {
            throw SchemaError(input.string() + ": " + e.what());
        }
        json summary = rpca_summary(o, x.rows(), x.cols());
        summary["input"] = input.filename().string();
        if (truth.low_rank || truth.sparse) {
            json rec = json::object();
            const auto compare = [&](const fs::path& p, const Matrix& got, const char* key) {
                const Matrix want = io::read_matrix(p);
                if (want.rows() != got.rows() || want.cols() != got.cols())
                    throw SchemaError(p.string() + ": shape differs from the input");
                rec[key] = relative_error(got, want);
            };
            if (truth.low_rank) compare(*truth.low_rank, o.result.low_rank, "low_rank_rel_error");
            if (truth.sparse) compare(*truth.sparse, o.result.sparse, "sparse_rel_error");
            summary["recovery"] = rec;
        }
        io::write_matrix(dir / "low_rank.epkmat", o.result.low_rank);
        io::write_matrix(dir / "sparse.epkmat", o.result.sparse);
        io::write_file(dir / "summary.json", dump(summary));
        io::write_file(dir / "outlier_energy.csv", energy_csv(o));
    };

    if (inputs.size() == 1) {
        process(inputs.front(), out);
        return;
    }
    std::vector<std::future<void>> jobs;
    for (const auto& in : inputs) jobs.push_back(std::async(std::launch::async, process, in, out / in.stem()));
    std::exception_ptr first;
    for (auto& j : jobs) {
        try {
            j.get();
        } catch (...) {
            if (!first) first = std::current_exception();
        }
    }
    if (first) std::rethrow_exception(first);
}

void cmd_segment(const fs::path& detections, const fs::path& out, const config::PipelineConfig& cfg) {
    const auto frames = load_detections(detections);
    const SegmentOutcome s = run_segment(frames, cfg.segment);
    write_segmentation(out, s, frames, cfg.segment);
}

void cmd_flow_group(const fs::path& frames_dir, const fs::path& boxes, const fs::path& out,
                    const config::PipelineConfig& cfg) {
    const auto frames = io::read_frames(frames_dir);
    const auto lists = io::read_box_lists(boxes);
    std::vector<flow::BoxTrackGroup> groups;
    try {
        groups = run_flow_group(frames, lists, cfg.flow);
    } catch (const ArgumentError& e) {
        throw SchemaError(e.what());
    }
    io::write_file(out / "groups.csv", groups_csv(groups));
    io::write_file(out / "groups.json", dump(groups_json(groups, cfg.flow)));
}

void cmd_fuse(const fs::path& detections, const fs::path& out, const config::PipelineConfig& cfg) {
    if (cfg.fusion.rules.wheel_region.empty()) throw ConfigError("fuse: fusion.wheel_region is required");
    const auto frames = load_detections(detections);
    gfl::SegmentLabeling segments;
    std::string note;
    try {
        segments = run_segment(frames, cfg.segment).labelings.front();
    } catch (const SchemaError& e) {
        // Episodes fall back to one segment when the pose stream cannot be segmented.
        note = e.what();
    }
    const FusionOutcome f = run_fusion(frames, cfg.fusion, segments);
    write_fusion(out, f, frames, {});
    if (!note.empty()) {
        json eps = config::load_document(out / "episodes.json");
        eps["notes"] = json::array({"segmentation unavailable: " + note});
        io::write_file(out / "episodes.json", dump(eps));
    }
}

const std::vector<std::string>& generator_names() {
    static const std::vector<std::string> names{"driver_session", "lowrank_sparse", "piecewise", "shifted_pair"};
    return names;
}

void cmd_synth(const std::string& generator, const std::map<std::string, std::string>& params, std::uint64_t seed,
               const fs::path& out) {
    Params p(params);
    if (generator == "lowrank_sparse") {
        const auto d = p.count("d", 200), t = p.count("t", 200), rank = p.count("rank", 10);
        const double fraction = p.real("sparse_fraction", 0.05), magnitude = p.real("magnitude", 5.0);
        p.finish(generator);
        const auto b = synth::gen_lowrank_sparse(d, t, rank, fraction, magnitude, seed);
        io::write_matrix(out / "x.epkmat", b.x);
        io::write_matrix(out / "low_rank.epkmat", b.low_rank);
        io::write_matrix(out / "sparse.epkmat", b.sparse);
        io::write_matrix(out / "factor_a.epkmat", b.factor_a);
        io::write_matrix(out / "factor_b.epkmat", b.factor_b);
        io::write_file(out / "truth.json", dump(json{{"generator", generator}, {"seed", seed}, {"d", d}, {"t", t},
                                                      {"rank", rank}, {"sparse_fraction", fraction},
                                                      {"magnitude", magnitude}, {"support", b.support}}));
    } else if (generator == "piecewise") {
        const auto d = p.count("d", 8), t = p.count("t", 240);
        const auto cps = p.counts("change_points", "40,90,150,200");
        const double jump = p.real("jump_scale", 2.0), noise = p.real("noise_sigma", 0.3);
        p.finish(generator);
        const auto b = synth::gen_piecewise(d, t, cps, jump, noise, seed);
        io::write_matrix(out / "x.epkmat", b.x);
        io::write_matrix(out / "clean.epkmat", b.clean);
        if (d == 2 * gfl::kArmJoints.size()) io::write_detections(out / "detections.jsonl", piecewise_detections(b.x));
        io::write_file(out / "truth.json", dump(json{{"generator", generator}, {"seed", seed}, {"d", d}, {"t", t},
                                                      {"jump_scale", jump}, {"noise_sigma", noise},
                                                      {"change_points", b.change_points}}));
    } else if (generator == "shifted_pair") {
        const auto size = p.count("size", 64);
        const double dx = p.real("dx", 1.0), dy = p.real("dy", 0.0), scale = p.real("texture_scale", 4.0);
        p.finish(generator);
        const auto b = synth::gen_shifted_pair(size, dx, dy, scale, seed);
        io::write_frames(out / "frames", {b.first, b.second});
        io::write_file(out / "truth.json", dump(json{{"generator", generator}, {"seed", seed}, {"size", size},
                                                      {"dx", dx}, {"dy", dy}, {"texture_scale", scale}}));
    } else if (generator == "driver_session") {
        const auto schedule = parse_schedule(p.text("schedule", kDefaultSchedule));
        const double rate = p.real("frame_rate", 30.0), noise = p.real("score_noise", 0.05),
                     flips = p.real("side_flip_fraction", 0.1);
        const auto width = p.count("width", 96), height = p.count("height", 72);
        const bool render = p.count("render", 1) != 0;
        p.finish(generator);
        const auto b = synth::gen_driver_session(schedule, rate, noise, flips, seed);
        io::write_detections(out / "detections.jsonl", b.frames);
        if (render) io::write_frames(out / "frames", synth::render_session(b, width, height, seed));

        json sched = json::array();
        for (const auto& e : b.schedule) sched.push_back({{"label", e.label}, {"duration", e.duration}});
        json flip_list = json::array();
        for (const auto& f : b.flips)
            flip_list.push_back({{"frame", f.frame}, {"hand", f.hand_index}, {"true_side", side_name(f.true_side)}});
        json sides = json::array();
        for (const auto& row : b.true_sides) {
            json r = json::array();
            for (Side s : row) r.push_back(side_name(s));
            sides.push_back(std::move(r));
        }
        io::write_file(out / "truth.json",
                       dump(json{{"generator", generator}, {"seed", seed}, {"frame_rate", rate}, {"score_noise", noise},
                                 {"side_flip_fraction", flips}, {"schedule", sched},
                                 {"episode_starts", b.episode_starts}, {"frame_labels", b.frame_labels},
                                 {"flips", flip_list}, {"true_sides", sides}}));

        fusion::EpisodeRuleTable rules = fusion::EpisodeRuleTable::defaults(fusion::Region::from_box(b.layout.radio));
        fusion::EpisodeRule behind;
        behind.predicate = fusion::Predicate::offwheel_wrist_in_region;
        behind.label = "reaching_behind";
        behind.region = fusion::Region::from_box(b.layout.behind);
        rules.rules.push_back(behind);
        // Rendered frames are small; RPCA runs on a 4x box-downscaled copy.
        const json cfg{{"downscale_limit", std::max<std::size_t>(width, height) / 4},
                       {"fusion",
                        {{"wheel_region", config::region_to_json(fusion::Region::from_box(b.layout.wheel))},
                         {"radio_region", config::region_to_json(fusion::Region::from_box(b.layout.radio))},
                         {"frame_rate", rate},
                         {"episode_rules", config::rule_table_to_json(rules)["rules"]}}}};
        io::write_file(out / "config.json", dump(cfg));
    } else {
        std::string names;
        for (const auto& n : generator_names()) names += (names.empty() ? "" : ", ") + n;
        throw InputError("synth: unknown generator \"" + generator + "\" (available: " + names + ")");
    }
}

void cmd_pipeline(const fs::path& session, const fs::path& out, const config::PipelineConfig& cfg) {
    std::error_code ec;
    const fs::path frames_dir = session / "frames";
    const fs::path det_path = session / "detections.jsonl";
    const bool have_frames = fs::is_directory(frames_dir, ec);
    const bool have_det = fs::is_regular_file(det_path, ec);
    if (!have_frames && !have_det)
        throw InputError(session.string() + ": expected frames/ and/or detections.jsonl");

    json report{{"session", session.filename().string()}};
    json stages = json::object();

    std::vector<GrayFrame> frames;
    std::vector<std::vector<std::string>> warnings;
    if (have_frames) {
        frames = in_stage("rpca", [&] { return io::read_frames(frames_dir); });
        const RpcaOutcome o = in_stage("rpca", [&] { return run_rpca(frames_to_matrix(frames, cfg.downscale_limit), cfg.rpca); });
        json summary = rpca_summary(o, 0, frames.size());
        summary.erase("rows");
        summary.erase("cols");
        const GrayFrame small = downscale_to_limit(frames.front(), cfg.downscale_limit);
        summary["downscaled_size"] = {small.width(), small.height()};
        summary["frames"] = frames.size();
        io::write_file(out / "rpca" / "summary.json", dump(summary));
        io::write_file(out / "rpca" / "outlier_energy.csv", energy_csv(o));
        warnings.assign(frames.size(), {});
        for (std::size_t t : o.warning_frames) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "rpca outlier energy %.3g is %.2f std above the mean", o.energy[t],
                          (o.energy[t] - o.energy_mean) / o.energy_std);
            warnings[t].push_back(buf);
        }
        report["rpca"] = summary;
        stages["rpca"] = "ok";
    } else {
        stages["rpca"] = "skipped: no frames";
    }

    if (!have_det) {
        stages["segmentation"] = stages["flow_groups"] = stages["fusion"] = "skipped: no detections";
        report["stages"] = stages;
        io::write_file(out / "report.json", dump(report));
        return;
    }
    const auto detections = in_stage("detections", [&] { return load_detections(det_path); });
    if (have_frames && frames.size() != detections.size())
        throw SchemaError("stage detections: " + std::to_string(frames.size()) + " frames but " +
                          std::to_string(detections.size()) + " detection lines");

    const SegmentOutcome seg = in_stage("segmentation", [&] { return run_segment(detections, cfg.segment); });
    write_segmentation(out / "segmentation", seg, detections, cfg.segment);
    report["segmentation"] = segmentation_json(seg, detections, cfg.segment);
    stages["segmentation"] = "ok";

    if (have_frames) {
        const auto groups = in_stage("flow_groups", [&] { return run_flow_group(frames, hand_boxes(detections), cfg.flow); });
        io::write_file(out / "flow" / "groups.csv", groups_csv(groups));
        json gj = groups_json(groups, cfg.flow);
        io::write_file(out / "flow" / "groups.json", dump(gj));
        json members = json::array();
        for (const auto& g : groups)
            for (const auto& m : g.members) members.push_back({m.frame, m.box_index, g.group_id});
        std::sort(members.begin(), members.end());
        gj["members"] = members;
        report["flow_groups"] = gj;
        stages["flow_groups"] = "ok";
    } else {
        stages["flow_groups"] = "skipped: no frames";
    }

    const FusionOutcome fz = in_stage("fusion", [&] { return run_fusion(detections, cfg.fusion, seg.labelings.front()); });
    write_fusion(out / "fusion", fz, detections, warnings);
    json verdicts = json::array();
    for (std::size_t t = 0; t < fz.verdicts.size(); ++t)
        verdicts.push_back(verdict_json(fz.verdicts[t], fz.stabilized[t], warnings.empty() ? std::vector<std::string>{} : warnings[t]));
    json records = json::array();
    for (const auto& r : fz.records) records.push_back(record_json(r));
    json episodes = json::array();
    for (const auto& e : fz.episodes) episodes.push_back(episode_json(e));
    report["verdicts"] = verdicts;
    report["training_records"] = records;
    report["episodes"] = episodes;
    report["frame_labels"] = fz.frame_labels;
    stages["fusion"] = "ok";
    report["stages"] = stages;
    io::write_file(out / "report.json", dump(report));
}

} // namespace epk::app
