#include "vrcount/ingest.hpp"

#include <json.hpp>

#include <cstdio>
#include <regex>
#include <set>

#include "vrcount/error.hpp"
#include "vrcount/image_io.hpp"

namespace vrc {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(SourceKind kind) { return kind == SourceKind::frame_dir ? "frame_dir" : "raw_video"; }

namespace {

template <typename T>
T required(const json& j, const char* key) {
    if (!j.contains(key)) throw ManifestError(key, "missing key");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ManifestError(key, "wrong type");
    }
}

fs::path relative_to_manifest(const fs::path& target, const fs::path& manifest_path) {
    const fs::path base = manifest_path.parent_path().empty() ? fs::path(".") : manifest_path.parent_path();
    return fs::relative(target, base);
}

}  // namespace

SourceManifest load_manifest(const fs::path& manifest_path) {
    if (!fs::exists(manifest_path)) throw IoError("manifest not found: " + manifest_path.string());
    std::ifstream in(manifest_path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ManifestError("manifest", std::string("parse error at byte ") + std::to_string(e.byte));
    }
    if (!j.is_object()) throw ManifestError("manifest", "top level must be an object");

    SourceManifest m;
    const auto kind = required<std::string>(j, "kind");
    if (kind == "frame_dir")
        m.kind = SourceKind::frame_dir;
    else if (kind == "raw_video")
        m.kind = SourceKind::raw_video;
    else
        throw ManifestError("kind", "expected frame_dir or raw_video, got '" + kind + "'");

    m.meta.width_px = required<int>(j, "width");
    m.meta.height_px = required<int>(j, "height");
    m.meta.frame_count = required<std::int64_t>(j, "frame_count");
    m.meta.fps.num = required<std::int64_t>(j, "fps_num");
    m.meta.fps.den = required<std::int64_t>(j, "fps_den");
    fs::path p = required<std::string>(j, "path");
    m.path = p.is_absolute() ? p : manifest_path.parent_path() / p;
    return m;
}

void write_manifest(const fs::path& manifest_path, const SourceManifest& m) {
    json j = {{"kind", to_string(m.kind)},          {"width", m.meta.width_px},
              {"height", m.meta.height_px},         {"frame_count", m.meta.frame_count},
              {"fps_num", m.meta.fps.num},          {"fps_den", m.meta.fps.den},
              {"path", m.path.generic_string()}};
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot write manifest " + manifest_path.string());
    out << j.dump(2) << '\n';
}

std::string frame_file_name(std::int64_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%06lld.ppm", static_cast<long long>(index));
    return buf;
}

std::optional<Frame> FrameSource::next() {
    if (cursor_ >= meta_.frame_count) {
        if (ended_) throw ContractError("next_frame called after end-of-stream");
        ended_ = true;
        return std::nullopt;
    }
    Frame f{cursor_, read(cursor_)};
    ++cursor_;
    return f;
}

void FrameSource::skip_to(std::int64_t index) {
    if (index < cursor_)
        throw ContractError("cannot rewind source from frame " + std::to_string(cursor_) + " to " +
                            std::to_string(index));
    if (index > meta_.frame_count) throw ContractError("frame " + std::to_string(index) + " is past the end");
    if (index == cursor_) return;
    cursor_ = index;
    on_skip(index);
}

RawVideoSource::RawVideoSource(const fs::path& file, const VideoMeta& meta) : FrameSource(meta), file_(file) {
    meta.validate();
    if (!fs::exists(file)) throw IoError("raw video not found: " + file.string());
    const auto actual = fs::file_size(file);
    const auto expected = static_cast<std::uintmax_t>(meta.frame_count) * meta.frame_bytes();
    if (actual != expected)
        throw GeometryError("frame_count", "expected " + std::to_string(meta.frame_count) + " frames of " +
                                               std::to_string(meta.width_px) + "x" +
                                               std::to_string(meta.height_px) + " RGB24 (" +
                                               std::to_string(expected) + " bytes), file has " +
                                               std::to_string(actual) + " bytes");
    in_.open(file, std::ios::binary);
    if (!in_) throw IoError("cannot open " + file.string());
}

std::unique_ptr<FrameSource> RawVideoSource::reopen() const {
    return std::make_unique<RawVideoSource>(file_, meta());
}

Image RawVideoSource::read(std::int64_t index) {
    Image img(meta().width_px, meta().height_px);
    in_.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
    if (in_.gcount() != static_cast<std::streamsize>(img.data.size()))
        throw IoError("read failed at frame " + std::to_string(index) + " of " + file_.string());
    return img;
}

void RawVideoSource::on_skip(std::int64_t index) {
    in_.clear();
    in_.seekg(static_cast<std::streamoff>(index) * static_cast<std::streamoff>(meta().frame_bytes()));
}

FrameDirSource::FrameDirSource(const fs::path& dir, const VideoMeta& meta) : FrameDirSource(dir, meta, false) {}

FrameDirSource::FrameDirSource(const fs::path& dir, const VideoMeta& meta, bool validated)
    : FrameSource(meta), dir_(dir) {
    if (validated) return;
    meta.validate();
    if (!fs::is_directory(dir)) throw IoError("frame directory not found: " + dir.string());
    static const std::regex name_re(R"(\d{6}\.ppm)");
    std::set<std::string> names;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, name_re)) names.insert(name);
    }
    if (static_cast<std::int64_t>(names.size()) != meta.frame_count)
        throw GeometryError("frame_count", "manifest declares " + std::to_string(meta.frame_count) +
                                               " frames, directory holds " + std::to_string(names.size()));
    std::int64_t t = 0;
    for (const auto& name : names) {
        if (name != frame_file_name(t))
            throw GeometryError("frame_count", "missing frame " + frame_file_name(t));
        const auto h = read_ppm_header(dir / name);
        if (h.width != meta.width_px)
            throw GeometryError("width", name + " is " + std::to_string(h.width) + " px wide");
        if (h.height != meta.height_px)
            throw GeometryError("height", name + " is " + std::to_string(h.height) + " px high");
        ++t;
    }
}

std::unique_ptr<FrameSource> FrameDirSource::reopen() const {
    return std::unique_ptr<FrameSource>(new FrameDirSource(dir_, meta(), true));
}

Image FrameDirSource::read(std::int64_t index) {
    try {
        Image img = read_ppm(dir_ / frame_file_name(index));
        if (img.width != meta().width_px || img.height != meta().height_px)
            throw IoError("dimensions changed on disk");
        return img;
    } catch (const IoError& e) {
        throw IoError("frame " + std::to_string(index) + ": " + e.what());
    }
}

std::unique_ptr<FrameSource> open_source(const SourceManifest& m) {
    if (m.kind == SourceKind::raw_video) return std::make_unique<RawVideoSource>(m.path, m.meta);
    return std::make_unique<FrameDirSource>(m.path, m.meta);
}

std::unique_ptr<FrameSource> open_source(const fs::path& manifest_path) {
    return open_source(load_manifest(manifest_path));
}

void write_raw_video(FrameSource& source, const fs::path& video_file, const fs::path& manifest_path) {
    std::ofstream out(video_file, std::ios::binary);
    if (!out) throw IoError("cannot write " + video_file.string());
    while (auto f = source.next())
        out.write(reinterpret_cast<const char*>(f->pixels.data.data()),
                  static_cast<std::streamsize>(f->pixels.data.size()));
    out.close();
    if (!out) throw IoError("write failed: " + video_file.string());

    SourceManifest m{SourceKind::raw_video, relative_to_manifest(video_file, manifest_path), source.meta()};
    write_manifest(manifest_path, m);
}

void write_frame_dir(FrameSource& source, const fs::path& dir, const fs::path& manifest_path) {
    fs::create_directories(dir);
    while (auto f = source.next()) write_ppm(dir / frame_file_name(f->index), f->pixels);
    SourceManifest m{SourceKind::frame_dir, relative_to_manifest(dir, manifest_path), source.meta()};
    write_manifest(manifest_path, m);
}

}  // namespace vrc
