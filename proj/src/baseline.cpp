#include "vrcount/baseline.hpp"

#include <algorithm>
#include <tuple>

#include "vrcount/error.hpp"

namespace vrc {

std::string Track::majority_class() const {
    std::string best;
    int votes = -1;
    for (const auto& [label, n] : class_votes)
        if (n > votes) {
            best = label;
            votes = n;
        }
    return best;
}

void TrackerParams::validate() const {
    if (!(iou_threshold > 0 && iou_threshold <= 1)) throw ConfigError("iou_threshold: must be in (0,1]");
    if (max_age_frames < 1) throw ConfigError("max_age_frames: must be >= 1");
    if (min_hits < 1) throw ConfigError("min_hits: must be >= 1");
}

void tracker_step(TrackerState& state, const std::vector<Detection>& detections, std::int64_t frame,
                  const TrackerParams& params) {
    auto& tracks = state.tracks;
    for (const auto& t : tracks)
        if (frame <= t.last_frame)
            throw ContractError("tracker_step: frame " + std::to_string(frame) + " is not after track " +
                                std::to_string(t.id) + "'s last frame");

    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t ti = 0; ti < tracks.size(); ++ti)
        for (std::size_t di = 0; di < detections.size(); ++di) {
            const double iou = bbox_iou(tracks[ti].last_bbox, detections[di].bbox);
            if (iou >= params.iou_threshold) pairs.emplace_back(iou, ti, di);
        }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
        return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
    });

    std::vector<bool> track_used(tracks.size(), false);
    std::vector<bool> det_used(detections.size(), false);
    for (const auto& [iou, ti, di] : pairs) {
        if (track_used[ti] || det_used[di]) continue;
        track_used[ti] = det_used[di] = true;
        Track& t = tracks[ti];
        const Detection& d = detections[di];
        t.last_bbox = d.bbox;
        t.last_frame = frame;
        ++t.class_votes[d.class_label];
        t.history.emplace_back(frame, d.bbox.center_y());
    }

    std::erase_if(tracks, [&](const Track& t) { return frame - t.last_frame > params.max_age_frames; });

    for (std::size_t di = 0; di < detections.size(); ++di) {
        if (det_used[di]) continue;
        Track t;
        t.id = state.next_id++;
        t.last_bbox = detections[di].bbox;
        t.last_frame = frame;
        t.class_votes[detections[di].class_label] = 1;
        t.history.emplace_back(frame, detections[di].bbox.center_y());
        tracks.push_back(std::move(t));
    }
}

CountReport baseline_count(FrameSource& source, CountingLine line, VehicleDetector& detector,
                           const TrackerParams& params) {
    params.validate();
    if (line.row_px < 0 || line.row_px >= source.meta().height_px)
        throw ConfigError("line_row: outside frame height");
    CountReport report;
    report.frames = source.meta().frame_count;
    TrackerState state;
    // The line sits at the pixel center of its row.
    const double level = line.row_px + 0.5;
    while (auto frame = source.next()) {
        std::vector<Detection> dets;
        try {
            dets = detector.detect(*frame);
        } catch (const Error& e) {
            throw Error("frame " + std::to_string(frame->index) + ": " + e.what());
        }
        tracker_step(state, dets, frame->index, params);
        for (Track& t : state.tracks) {
            if (t.crossed || t.last_frame != frame->index || t.hits() < 2 || t.hits() < params.min_hits) continue;
            const double prev = t.history[t.history.size() - 2].second;
            const double cur = t.history.back().second;
            if ((prev < level && cur >= level) || (prev > level && cur <= level)) {
                t.crossed = true;
                const std::string label = t.majority_class();
                report.add({frame->index, label, -1, std::nullopt, Detection{t.last_bbox, label, 1.0}, std::nullopt});
            }
        }
    }
    return report;
}

}  // namespace vrc
