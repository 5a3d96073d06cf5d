#pragma once

#include "epk/config.hpp"
#include "epk/detections.hpp"
#include "epk/fusion.hpp"
#include "epk/gflasso.hpp"
#include "epk/image.hpp"
#include "epk/optflow.hpp"
#include "epk/rpca.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace epk::app {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Stage computations (no file output)

/// One column per frame, each frame box-downscaled to the limit.
Matrix frames_to_matrix(const std::vector<GrayFrame>& frames, std::size_t downscale_limit);

struct RpcaOutcome {
    rpca::RpcaResult result;
    std::vector<double> energy;
    double energy_mean = 0.0;
    double energy_std = 0.0;
    std::vector<std::size_t> warning_frames;
};
RpcaOutcome run_rpca(const Matrix& x, const config::RpcaSettings& settings);

struct SegmentOutcome {
    double lambda = 0.0;
    gfl::GflResult result;
    std::vector<double> thresholds;                 // absolute values
    std::vector<gfl::SegmentLabeling> labelings;    // one per threshold
};
/// Throws SchemaError naming a joint that never appears.
SegmentOutcome run_segment(const std::vector<DetectionFrame>& frames, const config::SegmentSettings& settings);

std::vector<std::vector<Box>> hand_boxes(const std::vector<DetectionFrame>& frames);
/// Normalized boxes scaled to pixel coordinates of the frames.
std::vector<flow::BoxTrackGroup> run_flow_group(const std::vector<GrayFrame>& frames,
                                                const std::vector<std::vector<Box>>& normalized_boxes,
                                                const config::FlowSettings& settings);

struct FusionOutcome {
    std::vector<fusion::RuleVerdict> verdicts;
    std::vector<bool> stabilized;
    std::vector<fusion::TrainingRecord> records;
    std::vector<fusion::EpisodeLabel> episodes;
    std::vector<std::string> frame_labels;
};
/// Throws ConfigError when the wheel region is missing.
FusionOutcome run_fusion(const std::vector<DetectionFrame>& frames, const config::FusionSettings& settings,
                         const gfl::SegmentLabeling& segments);

// ---------------------------------------------------------------------------
// Serialization

nlohmann::json verdict_json(const fusion::RuleVerdict& v, bool stabilized, const std::vector<std::string>& warnings);
nlohmann::json record_json(const fusion::TrainingRecord& r);
nlohmann::json episode_json(const fusion::EpisodeLabel& e);

// ---------------------------------------------------------------------------
// Subcommands: read inputs, write result files into `out`.

struct RpcaTruth {
    std::optional<fs::path> low_rank;
    std::optional<fs::path> sparse;
};

/// Each input is a frame directory or an EPKMAT1 file. Several inputs are
/// processed concurrently, each into out/<input stem>/.
void cmd_rpca(const std::vector<fs::path>& inputs, const fs::path& out, const config::PipelineConfig& cfg,
              const RpcaTruth& truth = {});
void cmd_segment(const fs::path& detections, const fs::path& out, const config::PipelineConfig& cfg);
void cmd_flow_group(const fs::path& frames_dir, const fs::path& boxes, const fs::path& out,
                    const config::PipelineConfig& cfg);
void cmd_fuse(const fs::path& detections, const fs::path& out, const config::PipelineConfig& cfg);

const std::vector<std::string>& generator_names();
/// Unknown generator is an InputError listing the known names; unknown
/// parameters are a ConfigError.
void cmd_synth(const std::string& generator, const std::map<std::string, std::string>& params, std::uint64_t seed,
               const fs::path& out);

/// Session directory: frames/ (PGM) and/or detections.jsonl.
void cmd_pipeline(const fs::path& session, const fs::path& out, const config::PipelineConfig& cfg);

} // namespace epk::app
