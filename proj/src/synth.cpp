#include "vrcount/synth.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>

#include "vrcount/error.hpp"

namespace vrc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

// Portable draws on top of mt19937_64, whose output sequence is fixed by
// the standard (the <random> distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    int uniform_int(int lo, int hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<int>(eng_() % span);
    }
    template <typename Weights>
    std::size_t pick(const Weights& w) {
        const double total = std::accumulate(w.begin(), w.end(), 0.0);
        double u = uniform() * total;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (u < w[i]) return i;
            u -= w[i];
        }
        return w.size() - 1;
    }

private:
    std::mt19937_64 eng_;
};

// Per-class tint on red/blue, chosen so BT.601 luma is (nearly) unchanged.
constexpr int kTints[] = {0, 14, -14, 24, -24, 7, -7};

struct Rgb {
    std::uint8_t r, g, b;
};

Rgb vehicle_color(const SceneConfig& cfg, const std::string& label) {
    const int y = std::clamp(cfg.background_luma + cfg.contrast, 0, 255);
    std::size_t idx = 0;
    for (const auto& [name, size] : cfg.size_table) {
        if (name == label) break;
        ++idx;
    }
    const int dr = kTints[idx % std::size(kTints)];
    const int db = static_cast<int>(std::lround(-dr * 0.299 / 0.114));
    auto c = [](int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); };
    return {c(y + dr), c(y), c(y + db)};
}

// Progress of the object's leading edge in 1/kSpeedScale px since spawn.
std::int64_t progress_q(const SceneObject& o, std::int64_t t) { return static_cast<std::int64_t>(o.speed_q) * (t - o.spawn_frame); }

// True when `follower` (spawned after `leader` in the same lane) keeps at
// least `headway` px of clearance over their common lifetime. Clearance is
// linear in t, so the two ends of the common interval suffice.
bool keeps_headway(const SceneObject& leader, const SceneObject& follower, int headway, int frame_height) {
    const std::int64_t t0 = follower.spawn_frame;
    const std::int64_t t1 = std::min(leader.exit_frame(frame_height), follower.exit_frame(frame_height));
    if (t1 < t0) return true;
    auto clearance = [&](std::int64_t t) {
        return progress_q(leader, t) - static_cast<std::int64_t>(leader.length) * kSpeedScale - progress_q(follower, t);
    };
    const std::int64_t need = static_cast<std::int64_t>(headway) * kSpeedScale;
    return clearance(t0) >= need && clearance(t1) >= need;
}

struct LaneGeometry {
    int x0;
    int width;
};

LaneGeometry lane_geometry(const SceneConfig& cfg, int lane) {
    const int w = cfg.meta.width_px;
    const int a = lane * w / cfg.lanes;
    const int b = (lane + 1) * w / cfg.lanes;
    return {a, b - a};
}

int draw_speed_q(Rng& rng, double vmin, double vmax) {
    const int lo = static_cast<int>(std::ceil(vmin * kSpeedScale - 1e-9));
    const int hi = static_cast<int>(std::floor(vmax * kSpeedScale + 1e-9));
    return rng.uniform_int(lo, std::max(lo, hi));
}

int place_x(Rng& rng, const LaneGeometry& lane, int width) {
    const int slack = (lane.width - width) / 2;
    const int jitter = std::clamp(slack - 2, 0, 4);
    return lane.x0 + slack + rng.uniform_int(-jitter, jitter);
}

std::vector<std::string> weighted_labels(const SceneConfig& cfg, std::vector<double>& weights) {
    std::vector<std::string> labels;
    for (const auto& [label, w] : cfg.class_mix) {
        labels.push_back(label);
        weights.push_back(w);
    }
    return labels;
}

}  // namespace

const char* to_string(Direction d) { return d == Direction::down ? "down" : "up"; }

Direction parse_direction(const std::string& s) {
    if (s == "down") return Direction::down;
    if (s == "up") return Direction::up;
    throw ConfigError("lane_directions: expected 'down' or 'up', got '" + s + "'");
}

SceneConfig SceneConfig::defaults() {
    SceneConfig c;
    c.size_table = {{"Bus", {36, 90}},   {"Car", {24, 40}},   {"Motorbike", {20, 24}},
                    {"Pickup", {26, 46}}, {"Truck", {34, 70}}, {"Van", {28, 50}}};
    for (const auto& [label, size] : c.size_table) c.class_mix[label] = 1.0;
    return c;
}

Direction SceneConfig::direction(int lane) const {
    if (lane_directions.empty()) return Direction::down;
    return lane_directions.at(static_cast<std::size_t>(lane));
}

void SceneConfig::validate() const {
    meta.validate();
    if (lanes < 1) throw ConfigError("lanes: must be >= 1");
    if (!lane_directions.empty() && static_cast<int>(lane_directions.size()) != lanes)
        throw ConfigError("lane_directions: expected " + std::to_string(lanes) + " entries");
    if (spawn_rate < 0) throw ConfigError("spawn_rate: must be non-negative");
    if (speed_min < 1.0) throw ConfigError("speed_min: must be >= 1 px/frame");
    if (speed_max < speed_min) throw ConfigError("speed_max: must be >= speed_min");
    if (class_mix.empty()) throw ConfigError("class_mix: must not be empty");
    double total = 0;
    int min_length = std::numeric_limits<int>::max();
    for (const auto& [label, w] : class_mix) {
        if (w < 0) throw ConfigError("class_mix: weight for '" + label + "' is negative");
        total += w;
        const auto it = size_table.find(label);
        if (it == size_table.end()) throw ConfigError("size_table: no entry for class '" + label + "'");
        if (it->second.width_px < 1 || it->second.length_px < 1)
            throw ConfigError("size_table: '" + label + "' must have positive size");
        if (w > 0) min_length = std::min(min_length, it->second.length_px);
        for (int lane = 0; lane < lanes; ++lane)
            if (w > 0 && it->second.width_px > lane_geometry(*this, lane).width - 4)
                throw ConfigError("size_table: '" + label + "' is too wide for " + std::to_string(lanes) +
                                  " lanes");
    }
    if (total <= 0) throw ConfigError("class_mix: weights must not all be zero");
    if (speed_max > min_length)
        throw ConfigError("speed_max: " + std::to_string(speed_max) +
                          " px/frame exceeds the shortest vehicle length (" + std::to_string(min_length) + ")");
    if (background_luma < 0 || background_luma > 255) throw ConfigError("background_luma: must be in [0,255]");
    if (min_headway_px < 0) throw ConfigError("min_headway_px: must be non-negative");
    if (max_spawn_delay_frames < 0) throw ConfigError("max_spawn_delay_frames: must be non-negative");
}

std::int64_t SceneObject::top_q(std::int64_t t, int frame_height) const {
    const std::int64_t p = progress_q(*this, t);
    if (direction == Direction::down) return -static_cast<std::int64_t>(length) * kSpeedScale + p;
    return static_cast<std::int64_t>(frame_height) * kSpeedScale - p;
}

BBox SceneObject::box_at(std::int64_t t, int frame_height) const {
    const int top = static_cast<int>(floor_div(top_q(t, frame_height), kSpeedScale));
    return {x0, top, x0 + width, top + length};
}

std::int64_t SceneObject::exit_frame(int frame_height) const {
    const std::int64_t m = frame_height;
    const std::int64_t l = length;
    // down: gone once top >= M, i.e. progress >= S*(M+L)
    // up:   gone once top+L <= 0, i.e. progress >= S*(M+L-1)+1
    const std::int64_t need = direction == Direction::down ? kSpeedScale * (m + l) : kSpeedScale * (m + l - 1) + 1;
    return spawn_frame + ceil_div(need, speed_q);
}

std::pair<std::int64_t, std::int64_t> crossing_offsets(const SceneObject& o, CountingLine line, int frame_height) {
    // Drawn rows [top, top+L) contain R  <=>  top_q in [S(R-L+1), S(R+1)-1].
    const std::int64_t s = kSpeedScale;
    const std::int64_t r = line.row_px;
    const std::int64_t l = o.length;
    const std::int64_t m = frame_height;
    if (o.direction == Direction::down) {
        // progress = top_q + S*L
        return {ceil_div(s * (r + 1), o.speed_q), floor_div(s * (r + l + 1) - 1, o.speed_q)};
    }
    // progress = S*M - top_q
    return {ceil_div(s * (m - r - 1) + 1, o.speed_q), floor_div(s * (m - r + l - 1), o.speed_q)};
}

GroundTruth gen_scene(const SceneConfig& cfg) {
    cfg.validate();
    GroundTruth gt{cfg.meta, {}};
    Rng rng(cfg.seed);
    std::vector<double> weights;
    const auto labels = weighted_labels(cfg, weights);
    const double p = cfg.spawn_rate / 100.0;
    const int m = cfg.meta.height_px;
    int next_id = 0;

    for (int lane = 0; lane < cfg.lanes; ++lane) {
        const LaneGeometry geom = lane_geometry(cfg, lane);
        std::optional<std::size_t> leader;
        std::int64_t earliest = 0;
        for (std::int64_t req = 0; req < cfg.meta.frame_count; ++req) {
            if (!(rng.uniform() < p)) continue;
            const auto& label = labels[rng.pick(weights)];
            const VehicleSize size = cfg.size_table.at(label);
            SceneObject o;
            o.id = next_id;
            o.class_label = label;
            o.lane = lane;
            o.direction = cfg.direction(lane);
            o.speed_q = draw_speed_q(rng, cfg.speed_min, cfg.speed_max);
            o.width = size.width_px;
            o.length = size.length_px;
            o.x0 = place_x(rng, geom, o.width);

            // Spawns queue up behind the lane's last vehicle until it is clear.
            bool placed = false;
            for (std::int64_t s = std::max(req, earliest);; ++s) {
                o.spawn_frame = s;
                if (o.exit_frame(m) > cfg.meta.frame_count) break;  // would not finish before the video ends
                if (s - req > cfg.max_spawn_delay_frames)
                    throw ConfigError("spawn_rate: " + std::to_string(cfg.spawn_rate) +
                                      " per 100 frames exceeds lane capacity (lane " + std::to_string(lane) +
                                      ", spawn delayed more than " + std::to_string(cfg.max_spawn_delay_frames) +
                                      " frames)");
                if (!leader || keeps_headway(gt.objects[*leader], o, cfg.min_headway_px, m)) {
                    placed = true;
                    break;
                }
            }
            if (!placed) continue;
            gt.objects.push_back(o);
            leader = gt.objects.size() - 1;
            earliest = o.spawn_frame + 1;
            ++next_id;
        }
    }
    return gt;
}

GroundTruth gen_straddling_scene(const SceneConfig& cfg, int segment_length, CountingLine line) {
    cfg.validate();
    if (segment_length < 2) throw ConfigError("segment_length: must be >= 2");
    GroundTruth gt{cfg.meta, {}};
    Rng rng(cfg.seed);
    std::vector<double> weights;
    const auto labels = weighted_labels(cfg, weights);
    const int m = cfg.meta.height_px;
    int next_id = 0;

    for (int lane = 0; lane < cfg.lanes; ++lane) {
        const LaneGeometry geom = lane_geometry(cfg, lane);
        std::size_t leader = gt.objects.size();
        for (std::int64_t b = segment_length; b < cfg.meta.frame_count; b += segment_length) {
            const auto& label = labels[rng.pick(weights)];
            const VehicleSize size = cfg.size_table.at(label);
            SceneObject o;
            o.id = next_id;
            o.class_label = label;
            o.lane = lane;
            o.direction = cfg.direction(lane);
            // At most L/2 px per frame, so the crossing spans >= 2 frames.
            o.speed_q = std::min(draw_speed_q(rng, cfg.speed_min, cfg.speed_max), size.length_px * kSpeedScale / 2);
            o.width = size.width_px;
            o.length = size.length_px;
            o.x0 = place_x(rng, geom, o.width);

            const auto [first_off, last_off] = crossing_offsets(o, line, m);
            const std::int64_t dur = last_off - first_off + 1;
            const std::int64_t before = 1 + static_cast<std::int64_t>(rng.uniform() * static_cast<double>(dur - 1));
            o.spawn_frame = b - before - first_off;
            if (o.spawn_frame < 0 || o.exit_frame(m) > cfg.meta.frame_count) continue;
            if (leader < gt.objects.size() && !keeps_headway(gt.objects[leader], o, cfg.min_headway_px, m)) continue;
            gt.objects.push_back(o);
            leader = gt.objects.size() - 1;
            ++next_id;
        }
    }
    return gt;
}

Image render_frame(const GroundTruth& gt, const SceneConfig& cfg, std::int64_t t) {
    if (t < 0 || t >= gt.meta.frame_count)
        throw ContractError("render_frame: t=" + std::to_string(t) + " outside [0, " +
                            std::to_string(gt.meta.frame_count) + ")");
    const int w = gt.meta.width_px;
    const int h = gt.meta.height_px;
    Image img(w, h, static_cast<std::uint8_t>(cfg.background_luma));
    for (const auto& o : gt.objects) {
        if (t < o.spawn_frame) continue;
        const BBox b = clamp_box(o.box_at(t, h), w, h);
        if (!b.valid()) continue;
        const Rgb c = vehicle_color(cfg, o.class_label);
        for (int y = b.y0; y < b.y1; ++y) {
            std::uint8_t* p = img.pixel(b.x0, y);
            for (int x = b.x0; x < b.x1; ++x, p += 3) {
                p[0] = c.r;
                p[1] = c.g;
                p[2] = c.b;
            }
        }
    }
    return img;
}

std::vector<CrossingEvent> crossings(const GroundTruth& gt, CountingLine line) {
    std::vector<CrossingEvent> out;
    const int m = gt.meta.height_px;
    const std::int64_t last_video_frame = gt.meta.frame_count - 1;
    for (const auto& o : gt.objects) {
        const auto [first_off, last_off] = crossing_offsets(o, line, m);
        const std::int64_t first = std::max<std::int64_t>(o.spawn_frame + first_off, 0);
        const std::int64_t last = std::min(o.spawn_frame + last_off, last_video_frame);
        if (first > last) continue;

        // Frame where the drawn center is nearest the line's pixel center;
        // compared in doubled units to stay integral. Earlier frame wins ties.
        std::int64_t best = first;
        std::int64_t best_dist = std::numeric_limits<std::int64_t>::max();
        for (std::int64_t t = first; t <= last; ++t) {
            const BBox b = o.box_at(t, m);
            const std::int64_t d = std::abs(static_cast<std::int64_t>(b.y0) * 2 + o.length - 2 * line.row_px - 1);
            if (d < best_dist) {
                best_dist = d;
                best = t;
            }
        }
        out.push_back({o.id, o.class_label, best, first, last, o.x0, o.x0 + o.width});
    }
    std::stable_sort(out.begin(), out.end(), [](const CrossingEvent& a, const CrossingEvent& b) {
        if (a.center_frame != b.center_frame) return a.center_frame < b.center_frame;
        return a.x0 < b.x0;
    });
    return out;
}

SyntheticSource::SyntheticSource(std::shared_ptr<const GroundTruth> gt, std::shared_ptr<const SceneConfig> config)
    : FrameSource(gt->meta), gt_(std::move(gt)), config_(std::move(config)) {}

std::unique_ptr<FrameSource> SyntheticSource::reopen() const { return std::make_unique<SyntheticSource>(gt_, config_); }

Image SyntheticSource::read(std::int64_t index) { return render_frame(*gt_, *config_, index); }

void write_ground_truth(const fs::path& path, const GroundTruth& gt, CountingLine line) {
    json objects = json::array();
    for (const auto& o : gt.objects)
        objects.push_back({{"id", o.id},
                           {"class", o.class_label},
                           {"lane", o.lane},
                           {"direction", to_string(o.direction)},
                           {"speed_q", o.speed_q},
                           {"speed_px_per_frame", o.speed()},
                           {"spawn_frame", o.spawn_frame},
                           {"x0", o.x0},
                           {"width", o.width},
                           {"length", o.length}});
    json events = json::array();
    for (const auto& e : crossings(gt, line))
        events.push_back({{"object_id", e.object_id},
                          {"class", e.class_label},
                          {"center_frame", e.center_frame},
                          {"first_frame", e.first_frame},
                          {"last_frame", e.last_frame},
                          {"x0", e.x0},
                          {"x1", e.x1}});
    json j = {{"width", gt.meta.width_px},
              {"height", gt.meta.height_px},
              {"frame_count", gt.meta.frame_count},
              {"fps_num", gt.meta.fps.num},
              {"fps_den", gt.meta.fps.den},
              {"speed_scale", kSpeedScale},
              {"line_row", line.row_px},
              {"objects", objects},
              {"crossings", events}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

GroundTruth load_ground_truth(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open ground truth " + path.string());
    GroundTruth gt;
    try {
        const json j = json::parse(in);
        gt.meta.width_px = j.at("width").get<int>();
        gt.meta.height_px = j.at("height").get<int>();
        gt.meta.frame_count = j.at("frame_count").get<std::int64_t>();
        gt.meta.fps = {j.at("fps_num").get<std::int64_t>(), j.at("fps_den").get<std::int64_t>()};
        if (j.value("speed_scale", kSpeedScale) != kSpeedScale)
            throw ManifestError("speed_scale", "unsupported value");
        for (const auto& jo : j.at("objects")) {
            SceneObject o;
            o.id = jo.at("id").get<int>();
            o.class_label = jo.at("class").get<std::string>();
            o.lane = jo.at("lane").get<int>();
            o.direction = parse_direction(jo.at("direction").get<std::string>());
            o.speed_q = jo.at("speed_q").get<int>();
            o.spawn_frame = jo.at("spawn_frame").get<std::int64_t>();
            o.x0 = jo.at("x0").get<int>();
            o.width = jo.at("width").get<int>();
            o.length = jo.at("length").get<int>();
            if (o.speed_q < 1) throw ManifestError("speed_q", "must be positive");
            gt.objects.push_back(std::move(o));
        }
    } catch (const json::exception& e) {
        throw ManifestError("ground_truth", e.what());
    }
    gt.meta.validate();
    return gt;
}

}  // namespace vrc
