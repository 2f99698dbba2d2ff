#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "vrcount/synth.hpp"

namespace vrtest {

namespace fs = std::filesystem;

class TempDir {
public:
    TempDir() {
        std::string tmpl = (fs::temp_directory_path() / "vrcount_test_XXXXXX").string();
        if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
        path_ = tmpl;
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& name) const { return path_ / name; }

private:
    fs::path path_;
};

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

// Frames held in memory.
class VectorSource final : public vrc::FrameSource {
public:
    explicit VectorSource(std::shared_ptr<const std::vector<vrc::Image>> frames, vrc::Rational fps = {30, 1})
        : FrameSource(meta_of(*frames, fps)), frames_(std::move(frames)) {}
    std::unique_ptr<vrc::FrameSource> reopen() const override {
        return std::make_unique<VectorSource>(frames_, meta().fps);
    }

protected:
    vrc::Image read(std::int64_t index) override { return (*frames_)[static_cast<std::size_t>(index)]; }

private:
    static vrc::VideoMeta meta_of(const std::vector<vrc::Image>& f, vrc::Rational fps) {
        return {f.empty() ? 1 : f[0].width, f.empty() ? 1 : f[0].height, static_cast<std::int64_t>(f.size()), fps};
    }
    std::shared_ptr<const std::vector<vrc::Image>> frames_;
};

// One object placed by hand: moves down from above the frame.
inline vrc::SceneObject make_object(int id, const std::string& label, int x0, int width, int length, int speed_q,
                                    std::int64_t spawn, vrc::Direction dir = vrc::Direction::down) {
    vrc::SceneObject o;
    o.id = id;
    o.class_label = label;
    o.lane = 0;
    o.direction = dir;
    o.speed_q = speed_q;
    o.spawn_frame = spawn;
    o.x0 = x0;
    o.width = width;
    o.length = length;
    return o;
}

struct Scene {
    std::shared_ptr<const vrc::SceneConfig> config;
    std::shared_ptr<const vrc::GroundTruth> gt;

    std::unique_ptr<vrc::SyntheticSource> source() const {
        return std::make_unique<vrc::SyntheticSource>(gt, config);
    }
};

inline Scene make_scene(const vrc::SceneConfig& cfg) {
    return {std::make_shared<const vrc::SceneConfig>(cfg), std::make_shared<const vrc::GroundTruth>(vrc::gen_scene(cfg))};
}

inline Scene make_scene(const vrc::SceneConfig& cfg, vrc::GroundTruth gt) {
    return {std::make_shared<const vrc::SceneConfig>(cfg), std::make_shared<const vrc::GroundTruth>(std::move(gt))};
}

// Per-frame brute force: every frame whose drawn box covers the line row.
struct ScanCrossing {
    int object_id;
    std::int64_t first;
    std::int64_t last;
    std::int64_t nearest;  // frame whose drawn center is nearest the line
};

inline std::vector<ScanCrossing> scan_crossings(const vrc::GroundTruth& gt, int row) {
    std::vector<ScanCrossing> out;
    const int h = gt.meta.height_px;
    for (const auto& o : gt.objects) {
        ScanCrossing c{o.id, -1, -1, -1};
        double best = 1e18;
        for (std::int64_t t = o.spawn_frame; t < gt.meta.frame_count; ++t) {
            const vrc::BBox b = o.box_at(t, h);
            if (b.y0 <= row && row < b.y1) {
                if (c.first < 0) c.first = t;
                c.last = t;
                const double d = std::abs(0.5 * (b.y0 + b.y1) - (row + 0.5));
                if (d < best) {
                    best = d;
                    c.nearest = t;
                }
            }
        }
        if (c.first >= 0) out.push_back(c);
    }
    return out;
}

}  // namespace vrtest
