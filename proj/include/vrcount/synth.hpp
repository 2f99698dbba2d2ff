#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "vrcount/ingest.hpp"
#include "vrcount/model.hpp"

namespace vrc {

enum class Direction { down, up };

const char* to_string(Direction d);
Direction parse_direction(const std::string& s);

struct VehicleSize {
    int width_px = 0;   // across the direction of travel
    int length_px = 0;  // along the direction of travel
    bool operator==(const VehicleSize&) const = default;
};

// Speeds are quantized to 1/kSpeedScale px per frame so that positions and
// crossing intervals are exact integers.
inline constexpr int kSpeedScale = 16;

struct SceneConfig {
    VideoMeta meta{320, 240, 1800, {30, 1}};
    int lanes = 2;
    std::vector<Direction> lane_directions;  // empty: every lane moves down
    double spawn_rate = 3.0;                 // expected vehicles per 100 frames, per lane
    double speed_min = 2.0;                  // px/frame
    double speed_max = 6.0;
    std::map<std::string, double> class_mix;
    std::map<std::string, VehicleSize> size_table;
    int background_luma = 90;
    int contrast = 100;
    int min_headway_px = 40;  // bumper gap kept between vehicles sharing a lane
    int max_spawn_delay_frames = 600;
    std::uint64_t seed = 1;

    // Six vehicle classes with the default size table and an even mix.
    static SceneConfig defaults();

    Direction direction(int lane) const;
    void validate() const;
};

struct SceneObject {
    int id = 0;
    std::string class_label;
    int lane = 0;
    Direction direction = Direction::down;
    int speed_q = kSpeedScale;  // px/frame * kSpeedScale
    std::int64_t spawn_frame = 0;
    int x0 = 0;
    int width = 0;
    int length = 0;

    double speed() const { return static_cast<double>(speed_q) / kSpeedScale; }
    // Top edge in 1/kSpeedScale px. At spawn the object sits just outside
    // the frame on its entry side.
    std::int64_t top_q(std::int64_t t, int frame_height) const;
    // Drawn box at frame t (positions truncated toward -inf), unclamped.
    BBox box_at(std::int64_t t, int frame_height) const;
    // First frame at which the object has fully left the frame.
    std::int64_t exit_frame(int frame_height) const;
    bool operator==(const SceneObject&) const = default;
};

struct GroundTruth {
    VideoMeta meta;
    std::vector<SceneObject> objects;
    bool operator==(const GroundTruth&) const = default;
};

struct CrossingEvent {
    int object_id = 0;
    std::string class_label;
    std::int64_t center_frame = 0;
    std::int64_t first_frame = 0;
    std::int64_t last_frame = 0;
    int x0 = 0;
    int x1 = 0;

    std::int64_t duration() const { return last_frame - first_frame + 1; }
};

GroundTruth gen_scene(const SceneConfig& config);

// A scene where every crossing straddles a segment boundary: at most one
// vehicle per lane per interior boundary, timed so its crossing interval
// holds both boundary frames. A boundary is left empty when its vehicle
// would not finish inside the video or would crowd the one ahead.
GroundTruth gen_straddling_scene(const SceneConfig& config, int segment_length, CountingLine line);

Image render_frame(const GroundTruth& gt, const SceneConfig& config, std::int64_t t);

// Closed-form crossing events, clipped to the video and sorted by center frame.
std::vector<CrossingEvent> crossings(const GroundTruth& gt, CountingLine line);

// Frames, relative to spawn, of the first and last line intersection.
std::pair<std::int64_t, std::int64_t> crossing_offsets(const SceneObject& obj, CountingLine line, int frame_height);

// Frames rendered on demand; nothing touches the disk.
class SyntheticSource final : public FrameSource {
public:
    SyntheticSource(std::shared_ptr<const GroundTruth> gt, std::shared_ptr<const SceneConfig> config);
    std::unique_ptr<FrameSource> reopen() const override;

protected:
    Image read(std::int64_t index) override;

private:
    std::shared_ptr<const GroundTruth> gt_;
    std::shared_ptr<const SceneConfig> config_;
};

// Ground-truth file: JSON with meta, objects and (for the given line) the
// derived crossing events.
void write_ground_truth(const std::filesystem::path& path, const GroundTruth& gt, CountingLine line);
GroundTruth load_ground_truth(const std::filesystem::path& path);

}  // namespace vrc
