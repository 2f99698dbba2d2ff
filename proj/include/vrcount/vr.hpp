#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "vrcount/ingest.hpp"
#include "vrcount/model.hpp"

namespace vrc {

struct SegmentSpec {
    int segment_length_frames = 900;
    CountingLine line;

    void validate(const VideoMeta& meta) const;
};

// Time-spatial image of one segment. Row r is the counting-line row of
// frame start_frame + r; the last segment of a video may be short.
struct VRImage {
    std::int64_t segment_index = 0;
    std::int64_t start_frame = 0;
    Image rows;

    int row_count() const { return rows.height; }
    int width() const { return rows.width; }
};

// Box in VR coordinates: y is time (rows), x is the line's spatial axis.
struct Mark {
    BBox bbox;
    double confidence = 1.0;
    bool operator==(const Mark&) const = default;
};

// Sequential producer of VR images. Frames are consumed as they stream by;
// only the image under construction is resident.
class VRBuilder {
public:
    VRBuilder(FrameSource& source, SegmentSpec spec);

    std::optional<VRImage> next();
    std::int64_t segment_count() const;

private:
    FrameSource& source_;
    SegmentSpec spec_;
    std::int64_t next_segment_ = 0;
};

std::vector<VRImage> vr_build(FrameSource& source, const SegmentSpec& spec);

// Writes the VR raster with a one-pixel outline per mark. Every pixel not on
// an outline is copied unchanged.
void vr_render(const VRImage& vr, const std::vector<Mark>& marks, const std::filesystem::path& out);
Image vr_overlay(const VRImage& vr, const std::vector<Mark>& marks);

}  // namespace vrc
