#pragma once

#include <sys/types.h>

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vrcount/detect.hpp"
#include "vrcount/model.hpp"

namespace vrc {

struct ExternalDetectorConfig {
    std::string command;  // run through /bin/sh -c
    double timeout_s = 30.0;
    std::filesystem::path temp_dir;  // empty: the system temp directory
};

// A long-lived child process speaking the detection exchange protocol:
// one JSON request line on its stdin, one JSON response line on its stdout.
// Requests are serialized; at most one is in flight.
class ExternalProcess {
public:
    explicit ExternalProcess(ExternalDetectorConfig config);
    ~ExternalProcess();
    ExternalProcess(const ExternalProcess&) = delete;
    ExternalProcess& operator=(const ExternalProcess&) = delete;

    struct Reply {
        std::string line;
        std::size_t stream_offset = 0;  // byte offset of `line` in the child's stdout
    };

    // Sends one line and waits for one line back.
    Reply round_trip(const std::string& request_line);

    const ExternalDetectorConfig& config() const { return config_; }

private:
    void spawn();
    void shutdown();
    Reply read_line();

    ExternalDetectorConfig config_;
    std::mutex mutex_;
    pid_t pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::size_t consumed_ = 0;
};

// Writes `image` to a temporary PPM, asks the process for detections and
// maps the response. Boxes are clamped to the image; when `classes` is set,
// labels outside it are dropped.
std::vector<Detection> external_detect(const Image& image, const std::optional<ClassSet>& classes,
                                       ExternalProcess& process);

// Parses one response record. `expected_id` must match the record's id.
std::vector<Detection> parse_detection_response(const std::string& line, const std::string& expected_id,
                                                std::size_t stream_offset);

class ExternalVehicleDetector final : public VehicleDetector {
public:
    ExternalVehicleDetector(ExternalDetectorConfig config, ClassSet classes)
        : process_(std::move(config)), classes_(std::move(classes)) {}
    std::vector<Detection> detect(const Frame& frame) override {
        return external_detect(frame.pixels, classes_, process_);
    }

private:
    ExternalProcess process_;
    ClassSet classes_;
};

// Mark role: every returned box becomes a Mark; labels are ignored.
class ExternalMarkDetector final : public MarkDetector {
public:
    explicit ExternalMarkDetector(ExternalDetectorConfig config) : process_(std::move(config)) {}
    std::vector<Mark> detect(const VRImage& vr) override;

private:
    ExternalProcess process_;
};

}  // namespace vrc
