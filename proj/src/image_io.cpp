#include "vrcount/image_io.hpp"

#include <cctype>
#include <fstream>

#include "vrcount/error.hpp"

namespace vrc {

namespace {

// Reads one whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in) {
    std::string tok;
    int c;
    while ((c = in.get()) != EOF) {
        if (c == '#') {
            while ((c = in.get()) != EOF && c != '\n') {
            }
            continue;
        }
        if (std::isspace(c)) {
            if (!tok.empty()) return tok;
            continue;
        }
        tok.push_back(static_cast<char>(c));
    }
    return tok;
}

PpmHeader parse_header(std::istream& in, const std::filesystem::path& path) {
    if (next_token(in) != "P6") throw IoError(path.string() + ": not a binary PPM (P6)");
    PpmHeader h;
    try {
        h.width = std::stoi(next_token(in));
        h.height = std::stoi(next_token(in));
        if (std::stoi(next_token(in)) != 255) throw IoError(path.string() + ": only maxval 255 is supported");
    } catch (const std::logic_error&) {
        throw IoError(path.string() + ": malformed PPM header");
    }
    if (h.width < 1 || h.height < 1) throw IoError(path.string() + ": bad PPM dimensions");
    h.data_offset = static_cast<std::size_t>(in.tellg());
    return h;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

PpmHeader read_ppm_header(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_header(in, path);
}

Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    const PpmHeader h = parse_header(in, path);
    Image img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw IoError(path.string() + ": truncated pixel data");
    return img;
}

}  // namespace vrc
