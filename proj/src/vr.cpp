#include "vrcount/vr.hpp"

#include <algorithm>
#include <cstring>

#include "vrcount/error.hpp"
#include "vrcount/image_io.hpp"

namespace vrc {

void SegmentSpec::validate(const VideoMeta& meta) const {
    if (segment_length_frames < 2)
        throw ConfigError("segment_length: must be >= 2, got " + std::to_string(segment_length_frames));
    if (line.row_px < 0 || line.row_px >= meta.height_px)
        throw ConfigError("line_row: " + std::to_string(line.row_px) + " is outside frame height " +
                          std::to_string(meta.height_px));
}

VRBuilder::VRBuilder(FrameSource& source, SegmentSpec spec) : source_(source), spec_(spec) {
    spec_.validate(source.meta());
    if (source.cursor() != 0) throw ContractError("VR build must start at frame 0");
}

std::int64_t VRBuilder::segment_count() const {
    const auto n = source_.meta().frame_count;
    return (n + spec_.segment_length_frames - 1) / spec_.segment_length_frames;
}

std::optional<VRImage> VRBuilder::next() {
    if (next_segment_ >= segment_count()) return std::nullopt;
    const auto& meta = source_.meta();
    const std::int64_t start = next_segment_ * spec_.segment_length_frames;
    const int rows = static_cast<int>(std::min<std::int64_t>(spec_.segment_length_frames, meta.frame_count - start));

    VRImage vr{next_segment_, start, Image(meta.width_px, rows)};
    for (int r = 0; r < rows; ++r) {
        std::optional<Frame> f;
        try {
            f = source_.next();
        } catch (const Error& e) {
            throw IoError("segment " + std::to_string(next_segment_) + ", frame " + std::to_string(start + r) +
                          ": " + e.what());
        }
        if (!f) throw IoError("segment " + std::to_string(next_segment_) + ": stream ended early");
        const auto src = f->pixels.row(spec_.line.row_px);
        std::memcpy(vr.rows.row(r).data(), src.data(), src.size());
    }
    ++next_segment_;
    return vr;
}

std::vector<VRImage> vr_build(FrameSource& source, const SegmentSpec& spec) {
    VRBuilder builder(source, spec);
    std::vector<VRImage> out;
    while (auto vr = builder.next()) out.push_back(std::move(*vr));
    return out;
}

Image vr_overlay(const VRImage& vr, const std::vector<Mark>& marks) {
    Image img = vr.rows;
    auto paint = [&](int x, int y) {
        auto* p = img.pixel(x, y);
        p[0] = 0;
        p[1] = 255;
        p[2] = 0;
    };
    for (const auto& m : marks) {
        const BBox b = clamp_box(m.bbox, img.width, img.height);
        if (!b.valid()) throw ContractError("mark outside VR raster");
        for (int x = b.x0; x < b.x1; ++x) {
            paint(x, b.y0);
            paint(x, b.y1 - 1);
        }
        for (int y = b.y0; y < b.y1; ++y) {
            paint(b.x0, y);
            paint(b.x1 - 1, y);
        }
    }
    return img;
}

void vr_render(const VRImage& vr, const std::vector<Mark>& marks, const std::filesystem::path& out) {
    write_ppm(out, vr_overlay(vr, marks));
}

}  // namespace vrc
