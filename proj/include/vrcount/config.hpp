#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "vrcount/baseline.hpp"
#include "vrcount/count.hpp"
#include "vrcount/detect.hpp"
#include "vrcount/synth.hpp"
#include "vrcount/vr.hpp"

namespace vrc {

// Every tunable of a CLI run. Serialized as JSON; the record written next to
// each run's outputs is itself a loadable config file.
struct RunConfig {
    SegmentSpec segment;
    MatchParams match;
    MarkDetectorParams mark_params;
    TrackerParams tracker;
    DetectorNoise noise;
    SceneConfig scene = SceneConfig::defaults();

    std::string mark_detector = "classical";  // classical | oracle | external
    std::string vehicle_detector = "oracle";  // oracle | external
    std::string mark_external_command;        // defaults to external_command
    std::string external_command;
    double external_timeout_s = 30.0;
    std::vector<std::string> classes = ClassSet::vehicles().labels();

    std::filesystem::path manifest;
    std::filesystem::path ground_truth;
    std::filesystem::path output_dir = "vrcount_out";
    std::string video_format = "raw_video";  // synth output: raw_video | frame_dir

    int threads = 0;
    int edge_margin_px = 2;
    int match_tolerance_frames = 5;
    double stub_latency_ms = 0.0;

    void validate() const;
};

nlohmann::json to_json(const RunConfig& config);
// Keys absent from `j` keep their value from `base`; unknown keys are errors.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void save_config(const std::filesystem::path& path, const RunConfig& config);

}  // namespace vrc
