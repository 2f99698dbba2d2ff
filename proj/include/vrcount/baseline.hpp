#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "vrcount/count.hpp"
#include "vrcount/detect.hpp"
#include "vrcount/ingest.hpp"
#include "vrcount/model.hpp"

namespace vrc {

struct Track {
    int id = 0;
    BBox last_bbox;
    std::int64_t last_frame = 0;
    std::map<std::string, int> class_votes;
    bool crossed = false;
    std::vector<std::pair<std::int64_t, double>> history;  // (frame, y-center)

    int hits() const { return static_cast<int>(history.size()); }
    // Most-voted label; ties go to the lexicographically smallest.
    std::string majority_class() const;
};

struct TrackerParams {
    double iou_threshold = 0.3;
    int max_age_frames = 5;
    int min_hits = 2;

    void validate() const;
};

struct TrackerState {
    std::vector<Track> tracks;
    int next_id = 0;
};

// One association step: greedy one-to-one matching by descending IoU,
// new tracks for unmatched detections, retirement of stale tracks.
void tracker_step(TrackerState& state, const std::vector<Detection>& detections, std::int64_t frame,
                  const TrackerParams& params);

// Frame-by-frame detect + track + line-crossing latch. Calls the detector
// on every frame.
CountReport baseline_count(FrameSource& source, CountingLine line, VehicleDetector& detector,
                           const TrackerParams& params);

}  // namespace vrc
