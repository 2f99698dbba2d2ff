#include "vrcount/external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>

#include "vrcount/error.hpp"
#include "vrcount/image_io.hpp"

namespace vrc {

namespace fs = std::filesystem;
using nlohmann::json;

ExternalProcess::ExternalProcess(ExternalDetectorConfig config) : config_(std::move(config)) {
    if (config_.command.empty()) throw ConfigError("external_command: must not be empty");
    if (config_.timeout_s <= 0) throw ConfigError("external_timeout_s: must be positive");
}

ExternalProcess::~ExternalProcess() { shutdown(); }

void ExternalProcess::spawn() {
    // A dead child must surface as an error, not kill us on write().
    ::signal(SIGPIPE, SIG_IGN);
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
        throw SpawnError(std::string("pipe: ") + std::strerror(errno));
    const pid_t pid = ::fork();
    if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));
    if (pid == 0) {
        ::dup2(in_pipe[0], STDIN_FILENO);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::execl("/bin/sh", "sh", "-c", config_.command.c_str(), static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    buffer_.clear();
    consumed_ = 0;
}

void ExternalProcess::shutdown() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ > 0) {
        // Closing stdin asks the child to finish; give it a moment, then kill.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return;
            }
            ::usleep(10000);
        }
        ::kill(pid_, SIGKILL);
        ::waitpid(pid_, &status, 0);
        pid_ = -1;
    }
}

ExternalProcess::Reply ExternalProcess::read_line() {
    using clock = std::chrono::steady_clock;
    const auto deadline = clock::now() + std::chrono::duration<double>(config_.timeout_s);
    for (;;) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            Reply r{buffer_.substr(0, nl), consumed_};
            buffer_.erase(0, nl + 1);
            consumed_ += nl + 1;
            return r;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
        if (left <= 0) {
            shutdown();
            throw TimeoutError("external detector did not answer within " + std::to_string(config_.timeout_s) + " s");
        }
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = ::poll(&pfd, 1, static_cast<int>(left));
        if (rc < 0 && errno == EINTR) continue;
        if (rc == 0) continue;
        char chunk[4096];
        const ssize_t n = ::read(from_child_, chunk, sizeof chunk);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) {
            int status = 0;
            ::waitpid(pid_, &status, 0);
            pid_ = -1;
            shutdown();
            const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
            throw SpawnError("external detector exited (status " + std::to_string(code) +
                             ") without answering: '" + config_.command + "'");
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

ExternalProcess::Reply ExternalProcess::round_trip(const std::string& request_line) {
    std::lock_guard lock(mutex_);
    if (pid_ < 0) spawn();
    std::string msg = request_line + '\n';
    std::size_t off = 0;
    while (off < msg.size()) {
        const ssize_t n = ::write(to_child_, msg.data() + off, msg.size() - off);
        if (n < 0 && errno == EINTR) continue;
        if (n < 0) {
            shutdown();
            throw SpawnError(std::string("external detector is not accepting input: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
    return read_line();
}

std::vector<Detection> parse_detection_response(const std::string& line, const std::string& expected_id,
                                                std::size_t stream_offset) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        const std::size_t at = e.byte > 0 ? e.byte - 1 : 0;
        throw ProtocolError("malformed response record", stream_offset + at);
    }
    if (!j.is_object()) throw ProtocolError("response record is not an object", stream_offset);
    if (!j.contains("id") || !j["id"].is_string() || j["id"].get<std::string>() != expected_id)
        throw ProtocolError("response id does not match request id '" + expected_id + "'", stream_offset);
    if (j.contains("error"))
        throw ProtocolError("external detector reported: " + j["error"].dump(), stream_offset);
    if (!j.contains("detections") || !j["detections"].is_array())
        throw ProtocolError("response lacks a detections array", stream_offset);

    std::vector<Detection> out;
    for (const auto& d : j["detections"]) {
        if (!d.is_object() || !d.contains("class") || !d["class"].is_string())
            throw ProtocolError("detection lacks a class string", stream_offset);
        for (const char* k : {"conf", "x0", "y0", "x1", "y1"})
            if (!d.contains(k) || !d[k].is_number())
                throw ProtocolError(std::string("detection field '") + k + "' missing or not a number", stream_offset);
        Detection det;
        det.class_label = d["class"].get<std::string>();
        det.confidence = d["conf"].get<double>();
        if (det.confidence < 0.0 || det.confidence > 1.0)
            throw ProtocolError("detection conf outside [0,1]", stream_offset);
        det.bbox = {static_cast<int>(std::lround(d["x0"].get<double>())),
                    static_cast<int>(std::lround(d["y0"].get<double>())),
                    static_cast<int>(std::lround(d["x1"].get<double>())),
                    static_cast<int>(std::lround(d["y1"].get<double>()))};
        out.push_back(std::move(det));
    }
    return out;
}

std::vector<Detection> external_detect(const Image& image, const std::optional<ClassSet>& classes,
                                       ExternalProcess& process) {
    static std::atomic<std::uint64_t> counter{0};
    const std::string id = std::to_string(::getpid()) + "-" + std::to_string(counter++);
    const fs::path dir = process.config().temp_dir.empty() ? fs::temp_directory_path() : process.config().temp_dir;
    const fs::path file = fs::absolute(dir / ("vrcount-req-" + id + ".ppm"));
    write_ppm(file, image);

    std::vector<Detection> raw;
    try {
        const json request = {{"image", file.string()}, {"id", id}};
        const auto reply = process.round_trip(request.dump());
        raw = parse_detection_response(reply.line, id, reply.stream_offset);
    } catch (...) {
        std::error_code ec;
        fs::remove(file, ec);
        throw;
    }
    std::error_code ec;
    fs::remove(file, ec);

    std::vector<Detection> out;
    for (auto& d : raw) {
        if (classes && !classes->contains(d.class_label)) continue;
        d.bbox = clamp_box(d.bbox, image.width, image.height);
        if (!d.bbox.valid()) continue;
        out.push_back(std::move(d));
    }
    return out;
}

std::vector<Mark> ExternalMarkDetector::detect(const VRImage& vr) {
    std::vector<Mark> marks;
    for (const auto& d : external_detect(vr.rows, std::nullopt, process_)) marks.push_back({d.bbox, d.confidence});
    std::sort(marks.begin(), marks.end(), [](const Mark& a, const Mark& b) {
        return a.bbox.y0 != b.bbox.y0 ? a.bbox.y0 < b.bbox.y0 : a.bbox.x0 < b.bbox.x0;
    });
    return marks;
}

}  // namespace vrc
