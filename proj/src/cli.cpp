#include "vrcount/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>

#include "vrcount/bench.hpp"
#include "vrcount/config.hpp"
#include "vrcount/error.hpp"
#include "vrcount/external.hpp"
#include "vrcount/image_io.hpp"

namespace vrc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Override = std::function<void(RunConfig&)>;

class FlagSet {
public:
    template <typename T>
    void add(CLI::App* app, const std::string& name, const std::string& help, std::function<T&(RunConfig&)> field) {
        app->add_option_function<T>(
            name, [this, field](const T& v) { overrides_.push_back([field, v](RunConfig& c) { field(c) = v; }); }, help);
    }
    void add_custom(CLI::App* app, const std::string& name, const std::string& help,
                    std::function<void(RunConfig&, const std::string&)> apply) {
        app->add_option_function<std::string>(
            name, [this, apply](const std::string& v) { overrides_.push_back([apply, v](RunConfig& c) { apply(c, v); }); },
            help);
    }
    void apply(RunConfig& c) const {
        for (const auto& o : overrides_) o(c);
    }

private:
    std::vector<Override> overrides_;
};

#define VRC_FIELD(expr) [](RunConfig& c) -> auto& { return c.expr; }

void add_segment_flags(CLI::App* app, FlagSet& f) {
    f.add<int>(app, "--segment-length", "frames per VR segment (default 900)", VRC_FIELD(segment.segment_length_frames));
    f.add<int>(app, "--line-row", "counting line row in pixels (default 120)", VRC_FIELD(segment.line.row_px));
}

void add_detector_flags(CLI::App* app, FlagSet& f) {
    f.add_custom(app, "--detector", "backend for both roles: classical|oracle|external (classical applies to marks only)",
                 [](RunConfig& c, const std::string& v) {
                     c.mark_detector = v;
                     c.vehicle_detector = v == "classical" ? "oracle" : v;
                 });
    f.add<std::string>(app, "--mark-detector", "classical|oracle|external", VRC_FIELD(mark_detector));
    f.add<std::string>(app, "--vehicle-detector", "oracle|external", VRC_FIELD(vehicle_detector));
    f.add<std::string>(app, "--external-cmd", "command speaking the detection exchange protocol",
                       VRC_FIELD(external_command));
    f.add<std::string>(app, "--mark-external-cmd", "external command for the mark role (defaults to --external-cmd)",
                       VRC_FIELD(mark_external_command));
    f.add<double>(app, "--external-timeout", "seconds to wait for one external response",
                  VRC_FIELD(external_timeout_s));
    f.add<int>(app, "--luma-threshold", "classical marks: |luma - background| threshold",
               VRC_FIELD(mark_params.luma_threshold));
    f.add<int>(app, "--min-area", "classical marks: minimum component area", VRC_FIELD(mark_params.min_area_px));
    f.add<int>(app, "--min-height", "classical marks: minimum component height", VRC_FIELD(mark_params.min_height_px));
    f.add<int>(app, "--close-radius", "classical marks: closing radius", VRC_FIELD(mark_params.morph_close_radius));
    f.add<int>(app, "--jitter", "oracle noise: box edge jitter in px", VRC_FIELD(noise.jitter_px));
    f.add<double>(app, "--miss-rate", "oracle noise: per-box drop probability", VRC_FIELD(noise.miss_rate));
    f.add<double>(app, "--spurious-rate", "oracle noise: false boxes per call", VRC_FIELD(noise.spurious_rate));
    f.add<std::uint64_t>(app, "--noise-seed", "oracle noise seed", VRC_FIELD(noise.seed));
}

void add_match_flags(CLI::App* app, FlagSet& f) {
    f.add<int>(app, "--band-margin", "candidate band half-height around the line", VRC_FIELD(match.band_margin_px));
    f.add<double>(app, "--max-interval-dist-frac", "reject threshold as a fraction of mark width",
                  VRC_FIELD(match.max_interval_dist_frac));
    f.add<double>(app, "--min-det-conf", "minimum detection confidence", VRC_FIELD(match.min_det_conf));
    f.add<int>(app, "--edge-margin", "rows from a VR edge that count as touching it", VRC_FIELD(edge_margin_px));
    f.add<int>(app, "--threads", "mark-detection workers (0 = all cores)", VRC_FIELD(threads));
}

void add_tracker_flags(CLI::App* app, FlagSet& f) {
    f.add<double>(app, "--iou-threshold", "tracker association IoU threshold", VRC_FIELD(tracker.iou_threshold));
    f.add<int>(app, "--max-age", "frames a track survives unseen", VRC_FIELD(tracker.max_age_frames));
    f.add<int>(app, "--min-hits", "observations before a track may count", VRC_FIELD(tracker.min_hits));
}

void add_scene_flags(CLI::App* app, FlagSet& f) {
    f.add<std::uint64_t>(app, "--seed", "scene seed", VRC_FIELD(scene.seed));
    f.add<int>(app, "--width", "frame width", VRC_FIELD(scene.meta.width_px));
    f.add<int>(app, "--height", "frame height", VRC_FIELD(scene.meta.height_px));
    f.add<std::int64_t>(app, "--frames", "frame count", VRC_FIELD(scene.meta.frame_count));
    f.add<std::int64_t>(app, "--fps", "frames per second", VRC_FIELD(scene.meta.fps.num));
    f.add<int>(app, "--lanes", "number of lanes", VRC_FIELD(scene.lanes));
    f.add_custom(app, "--lane-directions", "comma-separated down|up per lane", [](RunConfig& c, const std::string& v) {
        c.scene.lane_directions.clear();
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ',')) c.scene.lane_directions.push_back(parse_direction(item));
    });
    f.add<double>(app, "--spawn-rate", "expected vehicles per 100 frames per lane", VRC_FIELD(scene.spawn_rate));
    f.add<double>(app, "--speed-min", "minimum speed, px/frame", VRC_FIELD(scene.speed_min));
    f.add<double>(app, "--speed-max", "maximum speed, px/frame", VRC_FIELD(scene.speed_max));
    f.add<int>(app, "--contrast", "vehicle luma minus background luma", VRC_FIELD(scene.contrast));
    f.add<int>(app, "--background", "background luma", VRC_FIELD(scene.background_luma));
    f.add<std::string>(app, "--format", "raw_video|frame_dir", VRC_FIELD(video_format));
}

#undef VRC_FIELD

struct Detectors {
    std::shared_ptr<const GroundTruth> gt;
    std::unique_ptr<MarkDetector> marks;
    std::unique_ptr<VehicleDetector> vehicles;
};

std::shared_ptr<const GroundTruth> load_gt_if_any(const RunConfig& c, bool required, const char* why) {
    if (c.ground_truth.empty()) {
        if (required) throw ConfigError(std::string("--gt: required ") + why);
        return nullptr;
    }
    return std::make_shared<const GroundTruth>(load_ground_truth(c.ground_truth));
}

Detectors make_detectors(const RunConfig& c, bool need_marks, bool need_vehicles = true) {
    Detectors d;
    const bool oracle =
        (need_marks && c.mark_detector == "oracle") || (need_vehicles && c.vehicle_detector == "oracle");
    d.gt = load_gt_if_any(c, oracle, "by the oracle detector");
    ExternalDetectorConfig ext{c.external_command, c.external_timeout_s, {}};
    if (need_marks) {
        if (c.mark_detector == "classical")
            d.marks = std::make_unique<ClassicalMarkDetector>(c.mark_params);
        else if (c.mark_detector == "oracle")
            d.marks = std::make_unique<OracleMarkDetector>(d.gt, c.segment);
        else {
            ExternalDetectorConfig mext = ext;
            if (!c.mark_external_command.empty()) mext.command = c.mark_external_command;
            if (mext.command.empty()) throw ConfigError("--external-cmd: required by the external mark detector");
            d.marks = std::make_unique<ExternalMarkDetector>(mext);
        }
    }
    if (!need_vehicles) return d;
    if (c.vehicle_detector == "oracle") {
        d.vehicles = std::make_unique<OracleVehicleDetector>(d.gt, c.noise, ClassSet(c.classes));
    } else {
        if (ext.command.empty()) throw ConfigError("--external-cmd: required by the external vehicle detector");
        d.vehicles = std::make_unique<ExternalVehicleDetector>(ext, ClassSet(c.classes));
    }
    return d;
}

void require_manifest(const RunConfig& c) {
    if (c.manifest.empty()) throw ConfigError("--manifest: required");
}

void print_report(std::ostream& out, const CountReport& r) {
    for (const auto& [label, n] : r.per_class) out << "  " << std::left << std::setw(12) << label << n << '\n';
    out << "  total " << r.total << ", rejected marks " << r.rejected_marks << '\n';
}

void write_accuracy(const fs::path& path, const AccuracyResult& a) {
    json confusion = json::array();
    for (const auto& [key, n] : a.confusion) confusion.push_back({{"gt", key.first}, {"pred", key.second}, {"n", n}});
    json j = {{"predicted", a.predicted},
              {"actual", a.actual},
              {"counting_accuracy_pct", a.counting_accuracy_pct},
              {"per_class_accuracy", a.per_class_accuracy},
              {"matched", a.matched},
              {"confusion", confusion}};
    std::ofstream o(path);
    if (!o) throw IoError("cannot write " + path.string());
    o << j.dump(2) << '\n';
}

int run_synth(const RunConfig& c, std::ostream& out) {
    c.scene.validate();
    const auto gt = std::make_shared<const GroundTruth>(gen_scene(c.scene));
    const auto scene = std::make_shared<const SceneConfig>(c.scene);
    SyntheticSource source(gt, scene);
    if (c.video_format == "raw_video")
        write_raw_video(source, c.output_dir / "video.rgb", c.output_dir / "manifest.json");
    else
        write_frame_dir(source, c.output_dir / "frames", c.output_dir / "manifest.json");
    write_ground_truth(c.output_dir / "ground_truth.json", *gt, c.segment.line);
    out << "synth: " << gt->objects.size() << " objects, " << crossings(*gt, c.segment.line).size()
        << " crossings of line " << c.segment.line.row_px << " -> " << c.output_dir.string() << '\n';
    return 0;
}

int run_count(const RunConfig& c, std::ostream& out) {
    require_manifest(c);
    auto source = open_source(c.manifest);
    c.segment.validate(source->meta());
    auto det = make_detectors(c, true);
    const auto report = count_video(*source, c.segment, *det.marks, *det.vehicles, c.match,
                                    CountOptions{c.edge_margin_px, c.threads});
    write_report_json(c.output_dir / "count_report.json", report);
    write_report_table(c.output_dir / "count_report.txt", report);
    out << "count: " << report.segments << " segments\n";
    print_report(out, report);
    if (!c.ground_truth.empty()) {
        const auto gt = det.gt ? det.gt : load_gt_if_any(c, true, "");
        const auto acc = score_counts(report, *gt, c.segment.line, c.match_tolerance_frames);
        write_accuracy(c.output_dir / "count_accuracy.json", acc);
        out << "  ground truth " << acc.actual << ", counting accuracy " << acc.counting_accuracy_pct << "%\n";
    }
    return 0;
}

int run_baseline(const RunConfig& c, std::ostream& out) {
    require_manifest(c);
    auto source = open_source(c.manifest);
    c.segment.validate(source->meta());
    auto det = make_detectors(c, false);
    const auto report = baseline_count(*source, c.segment.line, *det.vehicles, c.tracker);
    write_report_json(c.output_dir / "baseline_report.json", report);
    write_report_table(c.output_dir / "baseline_report.txt", report);
    out << "baseline:\n";
    print_report(out, report);
    if (!c.ground_truth.empty()) {
        const auto gt = det.gt ? det.gt : load_gt_if_any(c, true, "");
        const auto acc = score_counts(report, *gt, c.segment.line, c.match_tolerance_frames);
        write_accuracy(c.output_dir / "baseline_accuracy.json", acc);
        out << "  ground truth " << acc.actual << ", counting accuracy " << acc.counting_accuracy_pct << "%\n";
    }
    return 0;
}

int run_bench(const RunConfig& c, std::ostream& out) {
    require_manifest(c);
    const auto manifest = load_manifest(c.manifest);
    open_source(manifest)->meta();  // validate once up front
    c.segment.validate(manifest.meta);
    auto det = make_detectors(c, true);
    ComparisonSetup setup;
    setup.open_source = [manifest] { return open_source(manifest); };
    setup.spec = c.segment;
    setup.match = c.match;
    setup.tracker = c.tracker;
    setup.count_options = {c.edge_margin_px, c.threads};
    setup.stub_latency_ms = c.stub_latency_ms;
    setup.match_tolerance_frames = c.match_tolerance_frames;
    setup.gt = det.gt ? det.gt : load_gt_if_any(c, false, "");
    const auto result = run_comparison(setup, *det.marks, *det.vehicles);
    write_bench_json(c.output_dir / "bench_report.json", result);
    write_bench_table(c.output_dir / "bench_report.txt", result);
    std::ifstream table(c.output_dir / "bench_report.txt");
    out << table.rdbuf();
    return 0;
}

int run_vr_render(const RunConfig& c, std::ostream& out) {
    require_manifest(c);
    auto source = open_source(c.manifest);
    c.segment.validate(source->meta());
    auto det = make_detectors(c, true, false);
    const fs::path dir = c.output_dir / "vr";
    fs::create_directories(dir);
    VRBuilder builder(*source, c.segment);
    json index = json::array();
    while (auto vr = builder.next()) {
        const auto marks = det.marks->detect(*vr);
        char name[64];
        std::snprintf(name, sizeof name, "segment_%06lld.ppm", static_cast<long long>(vr->segment_index));
        vr_render(*vr, marks, dir / name);
        json jm = json::array();
        for (const auto& m : marks)
            jm.push_back({{"x0", m.bbox.x0}, {"y0", m.bbox.y0}, {"x1", m.bbox.x1}, {"y1", m.bbox.y1},
                          {"conf", m.confidence}});
        index.push_back({{"segment", vr->segment_index}, {"start_frame", vr->start_frame}, {"image", name},
                         {"marks", jm}});
        out << "vr-render: " << name << " (" << vr->row_count() << " rows, " << marks.size() << " marks)\n";
    }
    std::ofstream o(dir / "marks.json");
    o << index.dump(2) << '\n';
    return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Visual Rhythm line-crossing counter"};
    app.require_subcommand(1);
    std::string config_path;
    std::string output_dir;
    std::string manifest;
    std::string gt_path;
    double stub_latency = -1;
    int match_tolerance = -1;
    FlagSet flags;

    struct Sub {
        CLI::App* app;
        std::function<int(const RunConfig&, std::ostream&)> run;
    };
    std::vector<Sub> subs;
    auto make_sub = [&](const char* name, const char* help, auto run) {
        CLI::App* s = app.add_subcommand(name, help);
        s->add_option("--config", config_path, "JSON config file; flags override it");
        s->add_option("--output-dir", output_dir, std::string("output directory (env ") + kOutputDirEnv + ")");
        subs.push_back({s, run});
        return s;
    };

    auto* count = make_sub("count", "run the VR counting pipeline", run_count);
    auto* baseline = make_sub("baseline", "run the frame-by-frame tracking counter", run_baseline);
    auto* synth = make_sub("synth", "generate a synthetic scene: video, manifest, ground truth", run_synth);
    auto* bench = make_sub("bench", "compare the VR pipeline with the tracking baseline", run_bench);
    auto* render = make_sub("vr-render", "write VR images with mark overlays", run_vr_render);

    for (auto* s : {count, baseline, bench, render}) {
        s->add_option("--manifest", manifest, "video manifest (JSON)");
        s->add_option("--gt", gt_path, "ground-truth file (needed by oracle detectors)");
        add_segment_flags(s, flags);
        add_detector_flags(s, flags);
    }
    for (auto* s : {count, baseline, bench}) s->add_option("--match-tolerance", match_tolerance, "frames, for scoring");
    for (auto* s : {count, bench}) add_match_flags(s, flags);
    for (auto* s : {baseline, bench}) add_tracker_flags(s, flags);
    bench->add_option("--stub-latency-ms", stub_latency, "sleep per detector call");
    add_segment_flags(synth, flags);
    add_scene_flags(synth, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 2;
    }

    const Sub* chosen = nullptr;
    for (const auto& s : subs)
        if (s.app->parsed()) chosen = &s;

    RunConfig cfg;
    try {
        if (!config_path.empty()) cfg = load_config(config_path, cfg);
        if (const char* env = std::getenv(kOutputDirEnv); env && *env) cfg.output_dir = env;
        flags.apply(cfg);
        if (!output_dir.empty()) cfg.output_dir = output_dir;
        if (!manifest.empty()) cfg.manifest = manifest;
        if (!gt_path.empty()) cfg.ground_truth = gt_path;
        if (stub_latency >= 0) cfg.stub_latency_ms = stub_latency;
        if (match_tolerance >= 0) cfg.match_tolerance_frames = match_tolerance;
        cfg.validate();
        fs::create_directories(cfg.output_dir);
        save_config(cfg.output_dir / (chosen->app->get_name() + ".run_config.json"), cfg);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        return chosen->run(cfg, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace vrc
