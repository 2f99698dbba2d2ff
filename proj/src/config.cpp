#include "vrcount/config.hpp"

#include <fstream>
#include <set>

#include "vrcount/error.hpp"

namespace vrc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads keys from one JSON object into fields, rejecting keys nobody claimed.
class Section {
public:
    Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
        if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
    }

    template <typename T>
    void get(const char* key, T& field) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            field = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(qualified(key) + ": wrong type");
        }
    }

    void get(const char* key, fs::path& field) {
        std::string s = field.string();
        get(key, s);
        field = s;
    }

    const json* sub(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    std::string qualified(const std::string& key) const { return name_.empty() ? key : name_ + "." + key; }

    void finish() const {
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError(qualified(key) + ": unknown config key");
    }

private:
    const json& j_;
    std::string name_;
    std::set<std::string> seen_;
};

}  // namespace

void RunConfig::validate() const {
    if (segment.segment_length_frames < 2) throw ConfigError("segment.length: must be >= 2");
    if (segment.line.row_px < 0) throw ConfigError("segment.line_row: must be non-negative");
    match.validate();
    mark_params.validate();
    tracker.validate();
    noise.validate();
    if (mark_detector != "classical" && mark_detector != "oracle" && mark_detector != "external")
        throw ConfigError("detectors.mark: expected classical, oracle or external, got '" + mark_detector + "'");
    if (vehicle_detector != "oracle" && vehicle_detector != "external")
        throw ConfigError("detectors.vehicle: expected oracle or external, got '" + vehicle_detector + "'");
    if (external_timeout_s <= 0) throw ConfigError("external.timeout_s: must be positive");
    ClassSet check(classes);
    if (video_format != "raw_video" && video_format != "frame_dir")
        throw ConfigError("video_format: expected raw_video or frame_dir");
    if (threads < 0) throw ConfigError("threads: must be non-negative");
    if (edge_margin_px < 0) throw ConfigError("edge_margin_px: must be non-negative");
    if (match_tolerance_frames < 0) throw ConfigError("match_tolerance_frames: must be non-negative");
    if (stub_latency_ms < 0) throw ConfigError("stub_latency_ms: must be non-negative");
}

json to_json(const RunConfig& c) {
    json directions = json::array();
    for (auto d : c.scene.lane_directions) directions.push_back(to_string(d));
    json sizes = json::object();
    for (const auto& [label, s] : c.scene.size_table) sizes[label] = {s.width_px, s.length_px};
    return {
        {"segment", {{"length", c.segment.segment_length_frames}, {"line_row", c.segment.line.row_px}}},
        {"match",
         {{"band_margin_px", c.match.band_margin_px},
          {"max_interval_dist_frac", c.match.max_interval_dist_frac},
          {"min_det_conf", c.match.min_det_conf}}},
        {"mark_detector_params",
         {{"luma_threshold", c.mark_params.luma_threshold},
          {"min_area_px", c.mark_params.min_area_px},
          {"min_height_px", c.mark_params.min_height_px},
          {"morph_close_radius", c.mark_params.morph_close_radius}}},
        {"tracker",
         {{"iou_threshold", c.tracker.iou_threshold},
          {"max_age_frames", c.tracker.max_age_frames},
          {"min_hits", c.tracker.min_hits}}},
        {"noise",
         {{"jitter_px", c.noise.jitter_px},
          {"miss_rate", c.noise.miss_rate},
          {"spurious_rate", c.noise.spurious_rate},
          {"seed", c.noise.seed}}},
        {"scene",
         {{"width", c.scene.meta.width_px},
          {"height", c.scene.meta.height_px},
          {"frame_count", c.scene.meta.frame_count},
          {"fps_num", c.scene.meta.fps.num},
          {"fps_den", c.scene.meta.fps.den},
          {"lanes", c.scene.lanes},
          {"lane_directions", directions},
          {"spawn_rate", c.scene.spawn_rate},
          {"speed_min", c.scene.speed_min},
          {"speed_max", c.scene.speed_max},
          {"class_mix", c.scene.class_mix},
          {"size_table", sizes},
          {"background_luma", c.scene.background_luma},
          {"contrast", c.scene.contrast},
          {"min_headway_px", c.scene.min_headway_px},
          {"max_spawn_delay_frames", c.scene.max_spawn_delay_frames},
          {"seed", c.scene.seed}}},
        {"detectors", {{"mark", c.mark_detector}, {"vehicle", c.vehicle_detector}}},
        {"external",
         {{"command", c.external_command},
          {"mark_command", c.mark_external_command},
          {"timeout_s", c.external_timeout_s}}},
        {"classes", c.classes},
        {"manifest", c.manifest.string()},
        {"ground_truth", c.ground_truth.string()},
        {"output_dir", c.output_dir.string()},
        {"video_format", c.video_format},
        {"threads", c.threads},
        {"edge_margin_px", c.edge_margin_px},
        {"match_tolerance_frames", c.match_tolerance_frames},
        {"stub_latency_ms", c.stub_latency_ms},
    };
}

RunConfig config_from_json(const json& j, RunConfig c) {
    Section top(j, "");
    if (const json* s = top.sub("segment")) {
        Section sec(*s, "segment");
        sec.get("length", c.segment.segment_length_frames);
        sec.get("line_row", c.segment.line.row_px);
        sec.finish();
    }
    if (const json* s = top.sub("match")) {
        Section sec(*s, "match");
        sec.get("band_margin_px", c.match.band_margin_px);
        sec.get("max_interval_dist_frac", c.match.max_interval_dist_frac);
        sec.get("min_det_conf", c.match.min_det_conf);
        sec.finish();
    }
    if (const json* s = top.sub("mark_detector_params")) {
        Section sec(*s, "mark_detector_params");
        sec.get("luma_threshold", c.mark_params.luma_threshold);
        sec.get("min_area_px", c.mark_params.min_area_px);
        sec.get("min_height_px", c.mark_params.min_height_px);
        sec.get("morph_close_radius", c.mark_params.morph_close_radius);
        sec.finish();
    }
    if (const json* s = top.sub("tracker")) {
        Section sec(*s, "tracker");
        sec.get("iou_threshold", c.tracker.iou_threshold);
        sec.get("max_age_frames", c.tracker.max_age_frames);
        sec.get("min_hits", c.tracker.min_hits);
        sec.finish();
    }
    if (const json* s = top.sub("noise")) {
        Section sec(*s, "noise");
        sec.get("jitter_px", c.noise.jitter_px);
        sec.get("miss_rate", c.noise.miss_rate);
        sec.get("spurious_rate", c.noise.spurious_rate);
        sec.get("seed", c.noise.seed);
        sec.finish();
    }
    if (const json* s = top.sub("scene")) {
        Section sec(*s, "scene");
        auto& sc = c.scene;
        sec.get("width", sc.meta.width_px);
        sec.get("height", sc.meta.height_px);
        sec.get("frame_count", sc.meta.frame_count);
        sec.get("fps_num", sc.meta.fps.num);
        sec.get("fps_den", sc.meta.fps.den);
        sec.get("lanes", sc.lanes);
        std::vector<std::string> dirs;
        for (auto d : sc.lane_directions) dirs.push_back(to_string(d));
        sec.get("lane_directions", dirs);
        sc.lane_directions.clear();
        for (const auto& d : dirs) sc.lane_directions.push_back(parse_direction(d));
        sec.get("spawn_rate", sc.spawn_rate);
        sec.get("speed_min", sc.speed_min);
        sec.get("speed_max", sc.speed_max);
        sec.get("class_mix", sc.class_mix);
        if (const json* t = sec.sub("size_table")) {
            if (!t->is_object()) throw ConfigError("scene.size_table: expected an object");
            sc.size_table.clear();
            for (const auto& [label, wl] : t->items()) {
                if (!wl.is_array() || wl.size() != 2 || !wl[0].is_number_integer() || !wl[1].is_number_integer())
                    throw ConfigError("scene.size_table." + label + ": expected [width, length]");
                sc.size_table[label] = {wl[0].get<int>(), wl[1].get<int>()};
            }
        }
        sec.get("background_luma", sc.background_luma);
        sec.get("contrast", sc.contrast);
        sec.get("min_headway_px", sc.min_headway_px);
        sec.get("max_spawn_delay_frames", sc.max_spawn_delay_frames);
        sec.get("seed", sc.seed);
        sec.finish();
    }
    if (const json* s = top.sub("detectors")) {
        Section sec(*s, "detectors");
        sec.get("mark", c.mark_detector);
        sec.get("vehicle", c.vehicle_detector);
        sec.finish();
    }
    if (const json* s = top.sub("external")) {
        Section sec(*s, "external");
        sec.get("command", c.external_command);
        sec.get("mark_command", c.mark_external_command);
        sec.get("timeout_s", c.external_timeout_s);
        sec.finish();
    }
    top.get("classes", c.classes);
    top.get("manifest", c.manifest);
    top.get("ground_truth", c.ground_truth);
    top.get("output_dir", c.output_dir);
    top.get("video_format", c.video_format);
    top.get("threads", c.threads);
    top.get("edge_margin_px", c.edge_margin_px);
    top.get("match_tolerance_frames", c.match_tolerance_frames);
    top.get("stub_latency_ms", c.stub_latency_ms);
    top.finish();
    return c;
}

RunConfig load_config(const fs::path& path, RunConfig base) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config: " + path.string() + " does not parse (byte " + std::to_string(e.byte) + ")");
    }
    return config_from_json(j, std::move(base));
}

void save_config(const fs::path& path, const RunConfig& config) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << to_json(config).dump(2) << '\n';
}

}  // namespace vrc
