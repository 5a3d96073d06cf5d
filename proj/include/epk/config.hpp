#pragma once

#include "epk/fusion.hpp"
#include "epk/gflasso.hpp"
#include "epk/optflow.hpp"
#include "epk/rpca.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace epk::config {

struct RpcaSettings {
    rpca::RpcaConfig solver;
    /// Frames whose outlier energy exceeds mean + warning_sigma·std are flagged.
    double warning_sigma = 3.0;
};

struct SegmentSettings {
    /// Fixed λ; unset means gfl::suggest_lambda scaled by lambda_factor.
    std::optional<double> lambda;
    double lambda_factor = 1.0;
    std::size_t order = 1;
    double admm_penalty = 1.0;
    double tolerance = 1e-7;
    std::size_t max_iterations = 20000;
    /// Thresholds are fractions of the largest strength when relative.
    std::vector<double> thresholds{0.1};
    bool relative = true;
    std::size_t min_gap = 5;

    gfl::GflConfig solver(double lambda_value) const;
    /// Absolute threshold values for the given strengths.
    std::vector<double> absolute_thresholds(const std::vector<double>& strengths) const;
};

struct FlowSettings {
    flow::FlowConfig tracker;
    double threshold = 0.5;
    double merge_threshold = 0.9;
};

struct FusionSettings {
    fusion::FusionConfig rules;
    fusion::Region radio_region;
    /// Loaded table; unset means EpisodeRuleTable::defaults(radio_region).
    std::optional<fusion::EpisodeRuleTable> episode_rules;

    fusion::EpisodeRuleTable table() const;
};

struct PipelineConfig {
    std::size_t downscale_limit = 80;
    std::uint64_t seed = 0;
    RpcaSettings rpca;
    SegmentSettings segment;
    FlowSettings flow;
    FusionSettings fusion;
};

/// Dotted keys accepted in config files and as --key command-line flags.
struct KeyInfo {
    std::string key;
    std::string help;
};
const std::vector<KeyInfo>& known_keys();

/// Set a dotted key in a config document; `value` is parsed as JSON and
/// falls back to a plain string.
void apply_override(nlohmann::json& doc, const std::string& dotted_key, const std::string& value);

/// Throws ConfigError on unknown keys, wrong types or missing referenced
/// files. Relative paths resolve against base_dir.
PipelineConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
nlohmann::json load_document(const std::filesystem::path& path);

fusion::Region region_from_json(const nlohmann::json& j, const std::string& what);
nlohmann::json region_to_json(const fusion::Region& r);
fusion::EpisodeRuleTable rule_table_from_json(const nlohmann::json& j);
nlohmann::json rule_table_to_json(const fusion::EpisodeRuleTable& t);

} // namespace epk::config
