#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>

#include "vrcount/model.hpp"

namespace vrc {

enum class SourceKind { frame_dir, raw_video };

const char* to_string(SourceKind kind);

// Sidecar manifest, stored as JSON with keys
//   kind, width, height, frame_count, fps_num, fps_den, path
// `path` may be relative; it is resolved against the manifest's directory.
struct SourceManifest {
    SourceKind kind = SourceKind::raw_video;
    std::filesystem::path path;
    VideoMeta meta;
};

SourceManifest load_manifest(const std::filesystem::path& manifest_path);
void write_manifest(const std::filesystem::path& manifest_path, const SourceManifest& manifest);

// Frame-directory file name for index t: zero-padded six digits + ".ppm".
std::string frame_file_name(std::int64_t index);

// Ordered, single-consumer frame stream. Frames come out strictly in index
// order; next() yields end-of-stream (nullopt) exactly once.
class FrameSource {
public:
    explicit FrameSource(VideoMeta meta) : meta_(meta) {}
    virtual ~FrameSource() = default;
    FrameSource(const FrameSource&) = delete;
    FrameSource& operator=(const FrameSource&) = delete;

    const VideoMeta& meta() const { return meta_; }
    std::int64_t cursor() const { return cursor_; }

    std::optional<Frame> next();

    // Moves the cursor forward so the next frame returned is `index`.
    // Rewinding is a contract error; open a second source instead.
    void skip_to(std::int64_t index);

    // A fresh, independent source over the same data, positioned at frame 0.
    virtual std::unique_ptr<FrameSource> reopen() const = 0;

protected:
    virtual Image read(std::int64_t index) = 0;
    virtual void on_skip(std::int64_t /*index*/) {}

private:
    VideoMeta meta_;
    std::int64_t cursor_ = 0;
    bool ended_ = false;
};

class RawVideoSource final : public FrameSource {
public:
    RawVideoSource(const std::filesystem::path& file, const VideoMeta& meta);
    std::unique_ptr<FrameSource> reopen() const override;

protected:
    Image read(std::int64_t index) override;
    void on_skip(std::int64_t index) override;

private:
    std::filesystem::path file_;
    std::ifstream in_;
};

class FrameDirSource final : public FrameSource {
public:
    FrameDirSource(const std::filesystem::path& dir, const VideoMeta& meta);
    std::unique_ptr<FrameSource> reopen() const override;

protected:
    Image read(std::int64_t index) override;

private:
    FrameDirSource(const std::filesystem::path& dir, const VideoMeta& meta, bool validated);
    std::filesystem::path dir_;
};

// Validates the manifest against the data and returns a source at frame 0.
std::unique_ptr<FrameSource> open_source(const std::filesystem::path& manifest_path);
std::unique_ptr<FrameSource> open_source(const SourceManifest& manifest);

// Streams every frame of `source` into a raw RGB24 file plus manifest.
void write_raw_video(FrameSource& source, const std::filesystem::path& video_file,
                     const std::filesystem::path& manifest_path);
void write_frame_dir(FrameSource& source, const std::filesystem::path& dir,
                     const std::filesystem::path& manifest_path);

}  // namespace vrc
