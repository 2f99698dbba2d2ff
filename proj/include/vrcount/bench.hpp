#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "vrcount/baseline.hpp"
#include "vrcount/count.hpp"
#include "vrcount/detect.hpp"
#include "vrcount/synth.hpp"

namespace vrc {

// Labels used in the confusion map for unpaired entries.
inline constexpr const char* kMissedLabel = "<missed>";
inline constexpr const char* kSpuriousLabel = "<spurious>";

struct AccuracyResult {
    std::int64_t predicted = 0;
    std::int64_t actual = 0;
    // 100 * (1 - |predicted - actual| / actual), floored at 0; 100 when both
    // are zero. Class-agnostic.
    double counting_accuracy_pct = 100.0;
    // Share of each ground-truth class's events paired with a prediction of
    // the same class, in percent.
    std::map<std::string, double> per_class_accuracy;
    std::map<std::pair<std::string, std::string>, std::int64_t> confusion;  // (gt, predicted)
    std::int64_t matched = 0;
};

double counting_accuracy(std::int64_t predicted, std::int64_t actual);

// Pairs predictions with events greedily, nearest frame first, within
// +/- tolerance and requiring x-extent overlap.
AccuracyResult score_counts(const CountReport& report, const std::vector<CrossingEvent>& events,
                            int match_tolerance_frames);
AccuracyResult score_counts(const CountReport& report, const GroundTruth& gt, CountingLine line,
                            int match_tolerance_frames);

struct SystemRun {
    std::string name;
    double wall_seconds = 0;
    std::int64_t frames_processed = 0;
    double fps = 0;
    std::int64_t mark_detector_invocations = 0;
    std::int64_t vehicle_detector_invocations = 0;
    CountReport report;
    std::optional<AccuracyResult> accuracy;
};

struct BenchResult {
    SystemRun vr;
    SystemRun baseline;
    double speedup = 0;  // fps_vr / fps_baseline
};

struct ComparisonSetup {
    std::function<std::unique_ptr<FrameSource>()> open_source;
    SegmentSpec spec;
    MatchParams match;
    TrackerParams tracker;
    CountOptions count_options;
    double stub_latency_ms = 0;  // slept per detector invocation, both systems
    int match_tolerance_frames = 5;
    std::shared_ptr<const GroundTruth> gt;  // optional; enables accuracy columns
};

// Runs the VR pipeline, then the baseline, on identical input with the same
// vehicle detector, timing each with a monotonic clock.
BenchResult run_comparison(const ComparisonSetup& setup, MarkDetector& mark_detector,
                           VehicleDetector& vehicle_detector);

void write_bench_json(const std::filesystem::path& path, const BenchResult& result);
void write_bench_table(const std::filesystem::path& path, const BenchResult& result);

}  // namespace vrc
