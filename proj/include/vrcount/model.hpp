#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace vrc {

struct Rational {
    std::int64_t num = 30;
    std::int64_t den = 1;

    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
    bool operator==(const Rational&) const = default;
};

struct VideoMeta {
    int width_px = 0;
    int height_px = 0;
    std::int64_t frame_count = 0;
    Rational fps;

    // Throws GeometryError naming the first bad field.
    void validate() const;
    std::size_t frame_bytes() const {
        return static_cast<std::size_t>(width_px) * static_cast<std::size_t>(height_px) * 3;
    }
    bool operator==(const VideoMeta&) const = default;
};

// Packed RGB24, row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> data;

    Image() = default;
    Image(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::span<std::uint8_t> row(int y) {
        return {data.data() + static_cast<std::size_t>(y) * width * 3, static_cast<std::size_t>(width) * 3};
    }
    std::span<const std::uint8_t> row(int y) const {
        return {data.data() + static_cast<std::size_t>(y) * width * 3, static_cast<std::size_t>(width) * 3};
    }
    std::uint8_t* pixel(int x, int y) { return data.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const {
        return data.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }
    bool operator==(const Image&) const = default;
};

struct Frame {
    std::int64_t index = 0;
    Image pixels;
};

struct CountingLine {
    int row_px = 120;
};

// Half-open on the max side: covers [x0, x1) x [y0, y1).
struct BBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    std::int64_t area() const { return static_cast<std::int64_t>(width()) * height(); }
    bool valid() const { return x0 < x1 && y0 < y1; }
    double center_x() const { return 0.5 * (x0 + x1); }
    double center_y() const { return 0.5 * (y0 + y1); }
    bool operator==(const BBox&) const = default;
};

// Intersection with [0,w) x [0,h). The result may be invalid (empty).
BBox clamp_box(const BBox& b, int w, int h);

double bbox_iou(const BBox& a, const BBox& b);

struct Detection {
    BBox bbox;
    std::string class_label;
    double confidence = 1.0;
    bool operator==(const Detection&) const = default;
};

class ClassSet {
public:
    ClassSet() = default;
    explicit ClassSet(std::vector<std::string> labels);

    // Bus, Car, Motorbike, Pickup, Truck, Van.
    static ClassSet vehicles();

    const std::vector<std::string>& labels() const { return labels_; }
    bool contains(const std::string& label) const;

private:
    std::vector<std::string> labels_;
};

// BT.601 luma, rounded to nearest.
std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b);
std::vector<std::uint8_t> luma(std::span<const std::uint8_t> rgb_row);

}  // namespace vrc
