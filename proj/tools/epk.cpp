#include "epk/commands.hpp"
#include "epk/config.hpp"
#include "epk/error.hpp"

#include "CLI11.hpp"

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

enum Exit { ok = 0, failure = 1, input = 2, schema = 3, config = 4 };

struct Globals {
    std::optional<std::string> config_path;
    std::optional<std::uint64_t> seed;
    std::map<std::string, std::string> overrides;
};

epk::config::PipelineConfig load_config(const Globals& g) {
    nlohmann::json doc = nlohmann::json::object();
    std::filesystem::path base;
    if (g.config_path) {
        doc = epk::config::load_document(*g.config_path);
        base = std::filesystem::path(*g.config_path).parent_path();
    }
    for (const auto& [key, value] : g.overrides) epk::config::apply_override(doc, key, value);
    if (g.seed) epk::config::apply_override(doc, "seed", std::to_string(*g.seed));
    return epk::config::from_json(doc, base);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"episodekit: driver-episode analysis from video frames and detector outputs"};
    app.require_subcommand(1);
    app.fallthrough();

    Globals g;
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "seed for randomized steps");
    std::map<std::string, std::string> raw;
    for (const auto& k : epk::config::known_keys())
        if (k.key != "seed") app.add_option("--" + k.key, raw[k.key], k.help)->group("Config keys");

    std::vector<std::string> rpca_inputs;
    std::string out_dir = "out";
    std::string truth_low_rank, truth_sparse;
    auto* rpca = app.add_subcommand("rpca", "low-rank + sparse split of frame directories or EPKMAT1 files");
    rpca->add_option("inputs", rpca_inputs, "frame directories or matrix files")->required();
    rpca->add_option("-o,--out", out_dir, "output directory");
    auto* tl = rpca->add_option("--truth-low-rank", truth_low_rank, "planted low-rank matrix for recovery errors");
    auto* ts = rpca->add_option("--truth-sparse", truth_sparse, "planted sparse matrix for recovery errors");

    std::string detections;
    auto* segment = app.add_subcommand("segment", "change points of the arm-joint stream");
    segment->add_option("detections", detections, "detections JSONL")->required();
    segment->add_option("-o,--out", out_dir, "output directory");

    std::string frames_dir, boxes;
    auto* flow = app.add_subcommand("flow-group", "group boxes across frames by optical flow");
    flow->add_option("frames", frames_dir, "directory of PGM frames")->required();
    flow->add_option("boxes", boxes, "boxes JSONL (normalized coordinates)")->required();
    flow->add_option("-o,--out", out_dir, "output directory");

    auto* fuse = app.add_subcommand("fuse", "safe-driving rules, hand relabeling and training records");
    fuse->add_option("detections", detections, "detections JSONL")->required();
    fuse->add_option("-o,--out", out_dir, "output directory");

    std::string generator;
    std::vector<std::string> params;
    std::string names;
    for (const auto& n : epk::app::generator_names()) names += (names.empty() ? "" : ", ") + n;
    auto* synth = app.add_subcommand("synth", "write a seeded synthetic bundle");
    synth->add_option("generator", generator, "one of: " + names)->required();
    synth->add_option("-p,--param", params, "generator parameter key=value (repeatable)");
    synth->add_option("-o,--out", out_dir, "output directory");

    std::string session;
    auto* pipeline = app.add_subcommand("pipeline", "all stages on a session directory");
    pipeline->add_option("session", session, "directory with frames/ and/or detections.jsonl")->required();
    pipeline->add_option("-o,--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return Exit::config;
    }

    try {
        if (!config_path.empty()) g.config_path = config_path;
        if (seed_opt->count() > 0) g.seed = seed;
        for (const auto& k : epk::config::known_keys())
            if (k.key != "seed" && app.get_option("--" + k.key)->count() > 0) g.overrides[k.key] = raw[k.key];
        const auto cfg = load_config(g);

        if (rpca->parsed()) {
            epk::app::RpcaTruth truth;
            if (tl->count() > 0) truth.low_rank = truth_low_rank;
            if (ts->count() > 0) truth.sparse = truth_sparse;
            std::vector<std::filesystem::path> paths(rpca_inputs.begin(), rpca_inputs.end());
            epk::app::cmd_rpca(paths, out_dir, cfg, truth);
        } else if (segment->parsed()) {
            epk::app::cmd_segment(detections, out_dir, cfg);
        } else if (flow->parsed()) {
            epk::app::cmd_flow_group(frames_dir, boxes, out_dir, cfg);
        } else if (fuse->parsed()) {
            epk::app::cmd_fuse(detections, out_dir, cfg);
        } else if (synth->parsed()) {
            std::map<std::string, std::string> kv;
            for (const auto& p : params) {
                const auto eq = p.find('=');
                if (eq == std::string::npos) throw epk::ConfigError("synth: parameter \"" + p + "\" is not key=value");
                kv[p.substr(0, eq)] = p.substr(eq + 1);
            }
            epk::app::cmd_synth(generator, kv, cfg.seed, out_dir);
        } else if (pipeline->parsed()) {
            epk::app::cmd_pipeline(session, out_dir, cfg);
        }
    } catch (const epk::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::input;
    } catch (const epk::SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::schema;
    } catch (const epk::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::config;
    } catch (const epk::ArgumentError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::config;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return Exit::failure;
    }
    return Exit::ok;
}
