#include "vrcount/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vrcount/error.hpp"

namespace vrc {

void VideoMeta::validate() const {
    if (width_px < 1) throw GeometryError("width", "must be >= 1, got " + std::to_string(width_px));
    if (height_px < 1) throw GeometryError("height", "must be >= 1, got " + std::to_string(height_px));
    if (frame_count < 0)
        throw GeometryError("frame_count", "must be >= 0, got " + std::to_string(frame_count));
    if (fps.num <= 0 || fps.den <= 0) throw GeometryError("fps", "numerator and denominator must be positive");
}

BBox clamp_box(const BBox& b, int w, int h) {
    return {std::clamp(b.x0, 0, w), std::clamp(b.y0, 0, h), std::clamp(b.x1, 0, w), std::clamp(b.y1, 0, h)};
}

double bbox_iou(const BBox& a, const BBox& b) {
    const int ix = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const int iy = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    if (ix <= 0 || iy <= 0) return 0.0;
    const double inter = static_cast<double>(ix) * iy;
    return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

ClassSet::ClassSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
    if (labels_.empty()) throw ConfigError("class set must not be empty");
    std::set<std::string> seen;
    for (const auto& l : labels_)
        if (!seen.insert(l).second) throw ConfigError("duplicate class label '" + l + "'");
}

ClassSet ClassSet::vehicles() { return ClassSet({"Bus", "Car", "Motorbike", "Pickup", "Truck", "Van"}); }

bool ClassSet::contains(const std::string& label) const {
    return std::find(labels_.begin(), labels_.end(), label) != labels_.end();
}

std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const double y = 0.299 * r + 0.587 * g + 0.114 * b;
    return static_cast<std::uint8_t>(std::clamp<long>(std::lround(y), 0, 255));
}

std::vector<std::uint8_t> luma(std::span<const std::uint8_t> rgb_row) {
    std::vector<std::uint8_t> out(rgb_row.size() / 3);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = luma(rgb_row[3 * i], rgb_row[3 * i + 1], rgb_row[3 * i + 2]);
    return out;
}

}  // namespace vrc
