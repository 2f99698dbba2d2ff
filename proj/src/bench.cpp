#include "vrcount/bench.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

#include "vrcount/error.hpp"

namespace vrc {

using nlohmann::json;

double counting_accuracy(std::int64_t predicted, std::int64_t actual) {
    if (actual == 0) return predicted == 0 ? 100.0 : 0.0;
    const double err = std::abs(static_cast<double>(predicted - actual)) / static_cast<double>(actual);
    return std::max(0.0, 100.0 * (1.0 - err));
}

namespace {

std::pair<int, int> x_extent(const CountedVehicle& v) {
    if (v.mark) return {v.mark->bbox.x0, v.mark->bbox.x1};
    if (v.detection) return {v.detection->bbox.x0, v.detection->bbox.x1};
    return {0, 0};
}

}  // namespace

AccuracyResult score_counts(const CountReport& report, const std::vector<CrossingEvent>& events,
                            int match_tolerance_frames) {
    AccuracyResult r;
    r.predicted = report.total;
    r.actual = static_cast<std::int64_t>(events.size());
    r.counting_accuracy_pct = counting_accuracy(r.predicted, r.actual);

    // Candidate pairs keyed only on their content, so the outcome does not
    // depend on the order of either input.
    struct Pair {
        std::int64_t dt;
        std::int64_t pred_frame;
        int pred_x0;
        std::string pred_label;
        std::int64_t event_frame;
        int event_x0;
        int event_id;
        std::size_t pi;
        std::size_t ei;
    };
    std::vector<Pair> pairs;
    for (std::size_t pi = 0; pi < report.counted.size(); ++pi) {
        const auto& v = report.counted[pi];
        const auto [px0, px1] = x_extent(v);
        for (std::size_t ei = 0; ei < events.size(); ++ei) {
            const auto& e = events[ei];
            const std::int64_t dt = std::abs(v.global_frame - e.center_frame);
            if (dt > match_tolerance_frames) continue;
            if (std::min(px1, e.x1) <= std::max(px0, e.x0)) continue;
            pairs.push_back({dt, v.global_frame, px0, v.class_label, e.center_frame, e.x0, e.object_id, pi, ei});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        return std::tie(a.dt, a.pred_frame, a.pred_x0, a.pred_label, a.event_frame, a.event_x0, a.event_id) <
               std::tie(b.dt, b.pred_frame, b.pred_x0, b.pred_label, b.event_frame, b.event_x0, b.event_id);
    });

    std::vector<bool> pred_used(report.counted.size(), false);
    std::vector<bool> event_used(events.size(), false);
    std::map<std::string, std::int64_t> correct;
    std::map<std::string, std::int64_t> per_class_actual;
    for (const auto& e : events) ++per_class_actual[e.class_label];
    for (const auto& p : pairs) {
        if (pred_used[p.pi] || event_used[p.ei]) continue;
        pred_used[p.pi] = event_used[p.ei] = true;
        const auto& gt_label = events[p.ei].class_label;
        ++r.confusion[{gt_label, p.pred_label}];
        if (gt_label == p.pred_label) ++correct[gt_label];
        ++r.matched;
    }
    for (std::size_t ei = 0; ei < events.size(); ++ei)
        if (!event_used[ei]) ++r.confusion[{events[ei].class_label, kMissedLabel}];
    for (std::size_t pi = 0; pi < report.counted.size(); ++pi)
        if (!pred_used[pi]) ++r.confusion[{kSpuriousLabel, report.counted[pi].class_label}];
    for (const auto& [label, n] : per_class_actual)
        r.per_class_accuracy[label] = 100.0 * static_cast<double>(correct[label]) / static_cast<double>(n);
    return r;
}

AccuracyResult score_counts(const CountReport& report, const GroundTruth& gt, CountingLine line,
                            int match_tolerance_frames) {
    return score_counts(report, crossings(gt, line), match_tolerance_frames);
}

namespace {

template <typename Fn>
double timed(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

BenchResult run_comparison(const ComparisonSetup& setup, MarkDetector& mark_detector,
                           VehicleDetector& vehicle_detector) {
    BenchResult result;

    {
        InstrumentedMarkDetector marks(mark_detector, setup.stub_latency_ms);
        InstrumentedVehicleDetector vehicles(vehicle_detector, setup.stub_latency_ms);
        auto source = setup.open_source();
        SystemRun& run = result.vr;
        run.name = "Visual Rhythm";
        run.frames_processed = source->meta().frame_count;
        try {
            run.wall_seconds = timed(
                [&] { run.report = count_video(*source, setup.spec, marks, vehicles, setup.match, setup.count_options); });
        } catch (const Error& e) {
            throw Error(std::string("[Visual Rhythm] ") + e.what());
        }
        run.mark_detector_invocations = marks.invocations();
        run.vehicle_detector_invocations = vehicles.invocations();
    }
    {
        InstrumentedVehicleDetector vehicles(vehicle_detector, setup.stub_latency_ms);
        auto source = setup.open_source();
        SystemRun& run = result.baseline;
        run.name = "Tracking baseline";
        run.frames_processed = source->meta().frame_count;
        try {
            run.wall_seconds = timed(
                [&] { run.report = baseline_count(*source, setup.spec.line, vehicles, setup.tracker); });
        } catch (const Error& e) {
            throw Error(std::string("[Tracking baseline] ") + e.what());
        }
        run.vehicle_detector_invocations = vehicles.invocations();
    }

    for (SystemRun* run : {&result.vr, &result.baseline}) {
        run->fps = run->wall_seconds > 0 ? static_cast<double>(run->frames_processed) / run->wall_seconds : 0.0;
        if (setup.gt) run->accuracy = score_counts(run->report, *setup.gt, setup.spec.line, setup.match_tolerance_frames);
    }
    result.speedup = result.baseline.fps > 0 ? result.vr.fps / result.baseline.fps : 0.0;
    return result;
}

namespace {

json run_json(const SystemRun& run) {
    json j = {{"system", run.name},
              {"wall_seconds", run.wall_seconds},
              {"frames_processed", run.frames_processed},
              {"fps", run.fps},
              {"mark_detector_invocations", run.mark_detector_invocations},
              {"vehicle_detector_invocations", run.vehicle_detector_invocations},
              {"total", run.report.total},
              {"per_class", run.report.per_class},
              {"rejected_marks", run.report.rejected_marks}};
    if (run.accuracy) {
        j["counting_accuracy_pct"] = run.accuracy->counting_accuracy_pct;
        j["actual"] = run.accuracy->actual;
        j["per_class_accuracy"] = run.accuracy->per_class_accuracy;
    }
    return j;
}

}  // namespace

void write_bench_json(const std::filesystem::path& path, const BenchResult& result) {
    json j = {{"systems", {run_json(result.vr), run_json(result.baseline)}}, {"speedup", result.speedup}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_bench_table(const std::filesystem::path& path, const BenchResult& result) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::left << std::setw(20) << "System" << std::setw(14) << "Frame rate" << std::setw(12) << "Accuracy"
        << std::setw(12) << "Counted" << "Detector calls\n";
    for (const SystemRun* run : {&result.vr, &result.baseline}) {
        std::ostringstream fps;
        fps << std::fixed << std::setprecision(1) << run->fps << " FPS";
        std::ostringstream acc;
        if (run->accuracy)
            acc << std::fixed << std::setprecision(2) << run->accuracy->counting_accuracy_pct << "%";
        else
            acc << "-";
        out << std::left << std::setw(20) << run->name << std::setw(14) << fps.str() << std::setw(12) << acc.str()
            << std::setw(12) << run->report.total
            << (run->mark_detector_invocations + run->vehicle_detector_invocations) << '\n';
    }
    out << "\nspeedup: " << std::fixed << std::setprecision(2) << result.speedup << "x\n";
}

}  // namespace vrc
