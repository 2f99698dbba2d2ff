#pragma once

#include <filesystem>

#include "vrcount/model.hpp"

namespace vrc {

// Binary PPM (P6, maxval 255). Lossless, so rendered VR images and frame
// directories round-trip byte for byte.
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);

struct PpmHeader {
    int width = 0;
    int height = 0;
    std::size_t data_offset = 0;
};
PpmHeader read_ppm_header(const std::filesystem::path& path);

}  // namespace vrc
