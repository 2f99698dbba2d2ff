#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vrcount/detect.hpp"
#include "vrcount/ingest.hpp"
#include "vrcount/model.hpp"
#include "vrcount/vr.hpp"

namespace vrc {

struct MatchParams {
    int band_margin_px = 100;             // candidates must overlap [row - m, row + m]
    double max_interval_dist_frac = 0.5;  // reject when best score > frac * mark width
    double min_det_conf = 0.25;

    void validate() const;
};

// x-intervals of the marks that touched the lower edge of one segment.
struct EdgeMarkLedger {
    std::int64_t segment_index = 0;
    std::vector<std::pair<int, int>> intervals;
};

struct CountedVehicle {
    std::int64_t global_frame = 0;
    std::string class_label;
    std::int64_t segment_index = -1;
    std::optional<Mark> mark;            // absent for the tracking baseline
    std::optional<Detection> detection;  // the matched (or tracked) detection
    std::optional<int> score;            // x-interval distance of the match
};

struct CountReport {
    std::map<std::string, std::int64_t> per_class;
    std::int64_t total = 0;
    std::vector<CountedVehicle> counted;
    std::int64_t rejected_marks = 0;
    std::int64_t segments = 0;
    std::int64_t frames = 0;

    void add(CountedVehicle v);
};

// Global frame at the mark's center row, flooring on ties.
std::int64_t mark_to_frame(const Mark& mark, std::int64_t segment_start);

struct MatchResult {
    std::size_t index = 0;  // into the detection list
    int score = 0;          // |dx0| + |dx1|
};

// Best detection for `mark` among `detections` (already restricted to one
// frame). Ties on score go to the box whose vertical center is closest to
// the counting line, then to the smaller x0, then to the earlier entry.
std::optional<MatchResult> match_mark(const Mark& mark, std::span<const Detection> detections,
                                      CountingLine line, const MatchParams& params);

struct DedupResult {
    std::vector<Mark> kept;
    EdgeMarkLedger ledger_next;
    std::size_t discarded = 0;
    // Per input mark: the ledger_prev interval it duplicated, if discarded.
    std::vector<std::optional<std::size_t>> duplicate_of;
    // Per ledger_next interval: the input mark that produced it.
    std::vector<std::size_t> ledger_source;
};

// Drops upper-edge marks whose x-center lies inside an interval carried over
// from the previous segment, and records this segment's lower-edge marks.
// Throws ContractError when `ledger_prev` is not from segment_index - 1.
DedupResult dedup_filter(const std::vector<Mark>& marks, const std::optional<EdgeMarkLedger>& ledger_prev,
                         std::int64_t segment_index, int vr_height, int edge_margin_px);

struct CountOptions {
    int edge_margin_px = 2;
    int threads = 0;  // mark-detection workers; 0 = hardware concurrency
};

// The full VR pipeline. Mark detection runs concurrently across segments;
// dedup and matching run in segment order. Frames for matching are read
// from a second source opened with source.reopen().
// A kept mark touching a segment's lower edge is matched once the next
// segment is deduplicated; its frame is taken from the center of the joined
// extent of the mark and the upper-edge pieces discarded against it.
CountReport count_video(FrameSource& source, const SegmentSpec& spec, MarkDetector& mark_detector,
                        VehicleDetector& vehicle_detector, const MatchParams& params,
                        const CountOptions& options = {});

void write_report_json(const std::filesystem::path& path, const CountReport& report);
void write_report_table(const std::filesystem::path& path, const CountReport& report);

}  // namespace vrc
