#include "vrcount/detect.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <random>
#include <thread>

#include "vrcount/error.hpp"

namespace vrc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class NoiseRng {
public:
    NoiseRng(std::uint64_t seed, std::int64_t frame)
        : eng_(splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(frame)))) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(eng_() % (static_cast<std::uint64_t>(hi - lo) + 1));
    }
    // Knuth's product-of-uniforms sampler; fine for the small rates used here.
    int poisson(double mean) {
        if (mean <= 0) return 0;
        const double limit = std::exp(-mean);
        int k = 0;
        double p = uniform();
        while (p > limit) {
            ++k;
            p *= uniform();
        }
        return k;
    }

private:
    std::mt19937_64 eng_;
};

// Square min/max filter of radius r along rows then columns.
// `outside` is the value assumed beyond the raster.
void box_filter(std::vector<std::uint8_t>& mask, int w, int h, int r, bool take_max, std::uint8_t outside) {
    std::vector<std::uint8_t> tmp(mask.size());
    auto combine = [take_max](std::uint8_t a, std::uint8_t b) { return take_max ? std::max(a, b) : std::min(a, b); };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = mask[static_cast<std::size_t>(y) * w + x];
            for (int dx = -r; dx <= r; ++dx) {
                const int xx = x + dx;
                v = combine(v, (xx < 0 || xx >= w) ? outside : mask[static_cast<std::size_t>(y) * w + xx]);
            }
            tmp[static_cast<std::size_t>(y) * w + x] = v;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            std::uint8_t v = tmp[static_cast<std::size_t>(y) * w + x];
            for (int dy = -r; dy <= r; ++dy) {
                const int yy = y + dy;
                v = combine(v, (yy < 0 || yy >= h) ? outside : tmp[static_cast<std::size_t>(yy) * w + x]);
            }
            mask[static_cast<std::size_t>(y) * w + x] = v;
        }
}

}  // namespace

void MarkDetectorParams::validate() const {
    if (luma_threshold < 0 || luma_threshold > 255) throw ConfigError("luma_threshold: must be in [0,255]");
    if (min_area_px < 0) throw ConfigError("min_area_px: must be non-negative");
    if (min_height_px < 1) throw ConfigError("min_height_px: must be >= 1");
    if (morph_close_radius < 0) throw ConfigError("morph_close_radius: must be non-negative");
}

void DetectorNoise::validate() const {
    if (jitter_px < 0) throw ConfigError("jitter_px: must be non-negative");
    if (miss_rate < 0 || miss_rate > 1) throw ConfigError("miss_rate: must be in [0,1]");
    if (spurious_rate < 0) throw ConfigError("spurious_rate: must be non-negative");
}

std::vector<std::uint8_t> estimate_background(const VRImage& vr) {
    const int w = vr.width();
    const int h = vr.row_count();
    std::vector<std::uint8_t> bg(static_cast<std::size_t>(w), 0);
    if (h == 0) return bg;
    std::vector<std::vector<std::uint8_t>> columns(static_cast<std::size_t>(w), std::vector<std::uint8_t>(h));
    for (int y = 0; y < h; ++y) {
        const auto l = luma(vr.rows.row(y));
        for (int x = 0; x < w; ++x) columns[x][y] = l[x];
    }
    for (int x = 0; x < w; ++x) {
        auto& c = columns[x];
        auto mid = c.begin() + (h - 1) / 2;
        std::nth_element(c.begin(), mid, c.end());
        bg[x] = *mid;
    }
    return bg;
}

std::vector<Mark> detect_marks_classical(const VRImage& vr, const MarkDetectorParams& params) {
    params.validate();
    const int w = vr.width();
    const int h = vr.row_count();
    if (w == 0 || h == 0) return {};

    const auto bg = estimate_background(vr);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(w) * h, 0);
    for (int y = 0; y < h; ++y) {
        const auto l = luma(vr.rows.row(y));
        for (int x = 0; x < w; ++x)
            mask[static_cast<std::size_t>(y) * w + x] = std::abs(int(l[x]) - int(bg[x])) > params.luma_threshold;
    }

    if (params.morph_close_radius > 0) {
        // Erosion treats the outside as foreground so that closing never
        // trims marks that touch the raster edges.
        box_filter(mask, w, h, params.morph_close_radius, true, 0);
        box_filter(mask, w, h, params.morph_close_radius, false, 1);
    }

    std::vector<Mark> marks;
    std::vector<std::uint8_t> seen(mask.size(), 0);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * w + x;
            if (!mask[i] || seen[i]) continue;
            seen[i] = 1;
            stack.assign(1, {x, y});
            BBox box{x, y, x + 1, y + 1};
            std::int64_t area = 0;
            while (!stack.empty()) {
                const auto [cx, cy] = stack.back();
                stack.pop_back();
                ++area;
                box.x0 = std::min(box.x0, cx);
                box.y0 = std::min(box.y0, cy);
                box.x1 = std::max(box.x1, cx + 1);
                box.y1 = std::max(box.y1, cy + 1);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = cx + dx;
                        const int ny = cy + dy;
                        if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
                        const std::size_t j = static_cast<std::size_t>(ny) * w + nx;
                        if (mask[j] && !seen[j]) {
                            seen[j] = 1;
                            stack.emplace_back(nx, ny);
                        }
                    }
            }
            if (area < params.min_area_px || box.height() < params.min_height_px) continue;
            const double conf =
                params.min_area_px > 0 ? std::min(1.0, static_cast<double>(area) / (2.0 * params.min_area_px)) : 1.0;
            marks.push_back({box, conf});
        }

    std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) {
        return a.bbox.y0 != b.bbox.y0 ? a.bbox.y0 < b.bbox.y0 : a.bbox.x0 < b.bbox.x0;
    });
    return marks;
}

std::vector<Mark> oracle_detect_marks(const GroundTruth& gt, std::int64_t segment_index, const SegmentSpec& spec) {
    const std::int64_t start = segment_index * spec.segment_length_frames;
    const std::int64_t end = std::min<std::int64_t>(start + spec.segment_length_frames, gt.meta.frame_count);
    std::vector<Mark> marks;
    for (const auto& e : crossings(gt, spec.line)) {
        const std::int64_t a = std::max(e.first_frame, start);
        const std::int64_t b = std::min(e.last_frame + 1, end);
        if (a >= b) continue;
        marks.push_back({{e.x0, static_cast<int>(a - start), e.x1, static_cast<int>(b - start)}, 1.0});
    }
    std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) {
        return a.bbox.y0 != b.bbox.y0 ? a.bbox.y0 < b.bbox.y0 : a.bbox.x0 < b.bbox.x0;
    });
    return marks;
}

std::vector<Detection> oracle_detect_vehicles(const GroundTruth& gt, std::int64_t frame_index,
                                              const DetectorNoise& noise, const ClassSet& spurious_labels) {
    if (frame_index < 0 || frame_index >= gt.meta.frame_count)
        throw ContractError("oracle_detect_vehicles: frame " + std::to_string(frame_index) + " outside video");
    const int w = gt.meta.width_px;
    const int h = gt.meta.height_px;
    NoiseRng rng(noise.seed, frame_index);
    std::vector<Detection> out;
    for (const auto& o : gt.objects) {
        if (frame_index < o.spawn_frame) continue;
        BBox b = clamp_box(o.box_at(frame_index, h), w, h);
        if (!b.valid()) continue;
        if (noise.miss_rate > 0 && rng.uniform() < noise.miss_rate) continue;
        if (noise.jitter_px > 0) {
            const int j = noise.jitter_px;
            b.x0 += rng.uniform_int(-j, j);
            b.y0 += rng.uniform_int(-j, j);
            b.x1 += rng.uniform_int(-j, j);
            b.y1 += rng.uniform_int(-j, j);
            b = clamp_box(b, w, h);
            if (!b.valid()) continue;
        }
        out.push_back({b, o.class_label, 1.0});
    }
    const int extra = rng.poisson(noise.spurious_rate);
    const auto& labels = spurious_labels.labels();
    for (int k = 0; k < extra && !labels.empty(); ++k) {
        const int bw = rng.uniform_int(8, std::max(8, w / 4));
        const int bh = rng.uniform_int(8, std::max(8, h / 4));
        const int x0 = rng.uniform_int(0, std::max(0, w - bw));
        const int y0 = rng.uniform_int(0, std::max(0, h - bh));
        const auto& label = labels[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(labels.size()) - 1))];
        const BBox b = clamp_box({x0, y0, x0 + bw, y0 + bh}, w, h);
        if (b.valid()) out.push_back({b, label, rng.uniform()});
    }
    return out;
}

namespace {
void simulate_latency(double ms) {
    if (ms > 0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}
}  // namespace

std::vector<Mark> InstrumentedMarkDetector::detect(const VRImage& vr) {
    ++calls_;
    simulate_latency(latency_ms_);
    return inner_.detect(vr);
}

std::vector<Detection> InstrumentedVehicleDetector::detect(const Frame& frame) {
    ++calls_;
    simulate_latency(latency_ms_);
    return inner_.detect(frame);
}

}  // namespace vrc
