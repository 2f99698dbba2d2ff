#include "vrcount/count.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <future>
#include <iomanip>
#include <map>
#include <thread>

#include "vrcount/error.hpp"

namespace vrc {

using nlohmann::json;

void MatchParams::validate() const {
    if (band_margin_px < 0) throw ConfigError("band_margin_px: must be non-negative");
    if (!(max_interval_dist_frac > 0)) throw ConfigError("max_interval_dist_frac: must be positive");
    if (min_det_conf < 0 || min_det_conf > 1) throw ConfigError("min_det_conf: must be in [0,1]");
}

void CountReport::add(CountedVehicle v) {
    ++per_class[v.class_label];
    ++total;
    counted.push_back(std::move(v));
}

std::int64_t mark_to_frame(const Mark& mark, std::int64_t segment_start) {
    return segment_start + (mark.bbox.y0 + mark.bbox.y1 - 1) / 2;
}

std::optional<MatchResult> match_mark(const Mark& mark, std::span<const Detection> detections, CountingLine line,
                                      const MatchParams& params) {
    const int band_lo = line.row_px - params.band_margin_px;
    const int band_hi = line.row_px + params.band_margin_px;
    std::optional<MatchResult> best;
    double best_dy = 0;
    for (std::size_t i = 0; i < detections.size(); ++i) {
        const Detection& d = detections[i];
        if (d.confidence < params.min_det_conf) continue;
        // [y0, y1) against the closed band [band_lo, band_hi]
        if (d.bbox.y0 > band_hi || d.bbox.y1 <= band_lo) continue;
        const int score = std::abs(d.bbox.x0 - mark.bbox.x0) + std::abs(d.bbox.x1 - mark.bbox.x1);
        const double dy = std::abs(d.bbox.center_y() - line.row_px);
        bool better = !best || score < best->score;
        if (best && score == best->score) {
            if (dy != best_dy)
                better = dy < best_dy;
            else
                better = d.bbox.x0 < detections[best->index].bbox.x0;
        }
        if (better) {
            best = MatchResult{i, score};
            best_dy = dy;
        }
    }
    if (best && best->score > params.max_interval_dist_frac * mark.bbox.width()) return std::nullopt;
    return best;
}

DedupResult dedup_filter(const std::vector<Mark>& marks, const std::optional<EdgeMarkLedger>& ledger_prev,
                         std::int64_t segment_index, int vr_height, int edge_margin_px) {
    if (ledger_prev && ledger_prev->segment_index != segment_index - 1)
        throw ContractError("dedup_filter: ledger from segment " + std::to_string(ledger_prev->segment_index) +
                            " handed to segment " + std::to_string(segment_index));
    DedupResult out;
    out.ledger_next.segment_index = segment_index;
    for (std::size_t i = 0; i < marks.size(); ++i) {
        const BBox& b = marks[i].bbox;
        std::optional<std::size_t> duplicate;
        if (ledger_prev && b.y0 <= edge_margin_px) {
            // x-center (x0+x1)/2 inside [a, c), compared in doubled units
            const int twice_center = b.x0 + b.x1;
            for (std::size_t j = 0; j < ledger_prev->intervals.size(); ++j) {
                const auto [a, c] = ledger_prev->intervals[j];
                if (2 * a <= twice_center && twice_center < 2 * c) {
                    duplicate = j;
                    break;
                }
            }
        }
        // Recorded even when discarded, so a vehicle spanning three segments
        // is still matched in the third.
        if (b.y1 >= vr_height - edge_margin_px) {
            out.ledger_next.intervals.emplace_back(b.x0, b.x1);
            out.ledger_source.push_back(i);
        }
        out.duplicate_of.push_back(duplicate);
        if (duplicate)
            ++out.discarded;
        else
            out.kept.push_back(marks[i]);
    }
    return out;
}

namespace {

// Reads frames for matching. Requests are mostly increasing; a request
// behind the cursor reopens the source.
class FrameFetcher {
public:
    explicit FrameFetcher(const FrameSource& origin) : origin_(origin), source_(origin.reopen()) {}

    const Frame& get(std::int64_t index) {
        if (current_ && current_->index == index) return *current_;
        if (index < source_->cursor()) source_ = origin_.reopen();
        source_->skip_to(index);
        current_ = source_->next();
        if (!current_) throw IoError("frame " + std::to_string(index) + " unavailable for matching");
        return *current_;
    }

private:
    const FrameSource& origin_;
    std::unique_ptr<FrameSource> source_;
    std::optional<Frame> current_;
};

// A mark to be matched, with its global row extent [begin, end).
struct MarkJob {
    Mark mark;
    std::int64_t segment_index;
    std::int64_t begin;
    std::int64_t end;

    std::int64_t frame() const { return (begin + end - 1) / 2; }
};

struct SegmentMarks {
    std::int64_t segment_index;
    std::int64_t start_frame;
    int rows;
    std::vector<Mark> marks;
};

}  // namespace

CountReport count_video(FrameSource& source, const SegmentSpec& spec, MarkDetector& mark_detector,
                        VehicleDetector& vehicle_detector, const MatchParams& params, const CountOptions& options) {
    params.validate();
    if (options.edge_margin_px < 0) throw ConfigError("edge_margin_px: must be non-negative");
    CountReport report;
    report.frames = source.meta().frame_count;
    VRBuilder builder(source, spec);
    if (builder.segment_count() == 0) return report;

    FrameFetcher fetcher(source);
    std::optional<EdgeMarkLedger> ledger;
    const int workers =
        options.threads > 0 ? options.threads : std::max(1, static_cast<int>(std::thread::hardware_concurrency()));

    // Lower-edge marks waiting for the next segment, and for each interval
    // of `ledger` the pending job it extends.
    std::vector<MarkJob> pending;
    std::vector<std::size_t> ledger_owner;
    // Detections already claimed, per frame.
    std::map<std::int64_t, std::vector<Detection>> consumed;

    auto match_jobs = [&](std::vector<MarkJob> jobs) {
        std::stable_sort(jobs.begin(), jobs.end(), [](const auto& a, const auto& b) { return a.frame() < b.frame(); });
        for (const MarkJob& job : jobs) {
            const std::int64_t frame_index = job.frame();
            std::vector<Detection> pool;
            try {
                const Frame& frame = fetcher.get(frame_index);
                pool = vehicle_detector.detect(frame);
            } catch (const Error& e) {
                throw Error("segment " + std::to_string(job.segment_index) + ", frame " +
                            std::to_string(frame_index) + ": " + e.what());
            }
            auto& claimed = consumed[frame_index];
            // one removal per claim, so identical boxes from the detector stay distinct
            for (const Detection& c : claimed)
                if (auto it = std::find(pool.begin(), pool.end(), c); it != pool.end()) pool.erase(it);
            const auto match = match_mark(job.mark, pool, spec.line, params);
            if (!match) {
                ++report.rejected_marks;
                continue;
            }
            const Detection& d = pool[match->index];
            claimed.push_back(d);
            report.add({frame_index, d.class_label, job.segment_index, job.mark, d, match->score});
        }
    };

    auto consume = [&](SegmentMarks seg) {
        auto dedup = dedup_filter(seg.marks, ledger, seg.segment_index, seg.rows, options.edge_margin_px);
        ++report.segments;

        std::vector<MarkJob> jobs;
        std::vector<std::optional<std::size_t>> owner_of_mark(seg.marks.size());
        std::vector<MarkJob> next_pending;
        std::vector<std::size_t> carried(pending.size(), SIZE_MAX);  // old pending index -> new
        for (std::size_t i = 0; i < seg.marks.size(); ++i) {
            const BBox& b = seg.marks[i].bbox;
            if (const auto j = dedup.duplicate_of[i]) {
                MarkJob& owner = pending[ledger_owner[*j]];
                owner.end = std::max(owner.end, seg.start_frame + b.y1);
                owner_of_mark[i] = ledger_owner[*j];
            }
        }
        std::vector<std::size_t> next_owner;
        for (std::size_t q = 0; q < dedup.ledger_source.size(); ++q) {
            const std::size_t i = dedup.ledger_source[q];
            if (const auto old = owner_of_mark[i]) {
                if (carried[*old] == SIZE_MAX) {
                    carried[*old] = next_pending.size();
                    next_pending.push_back(pending[*old]);
                }
                next_owner.push_back(carried[*old]);
            } else {
                next_owner.push_back(next_pending.size());
                next_pending.push_back({seg.marks[i], seg.segment_index, seg.start_frame + seg.marks[i].bbox.y0,
                                        seg.start_frame + seg.marks[i].bbox.y1});
            }
        }
        for (std::size_t p = 0; p < pending.size(); ++p)
            if (carried[p] == SIZE_MAX) jobs.push_back(pending[p]);
        for (std::size_t i = 0; i < seg.marks.size(); ++i) {
            if (dedup.duplicate_of[i]) continue;
            const bool lower_edge = std::find(dedup.ledger_source.begin(), dedup.ledger_source.end(), i) !=
                                    dedup.ledger_source.end();
            if (lower_edge) continue;
            const BBox& b = seg.marks[i].bbox;
            jobs.push_back({seg.marks[i], seg.segment_index, seg.start_frame + b.y0, seg.start_frame + b.y1});
        }
        pending = std::move(next_pending);
        ledger_owner = std::move(next_owner);
        ledger = std::move(dedup.ledger_next);
        match_jobs(std::move(jobs));
    };

    // Mark detection fans out; results are consumed strictly in segment order.
    std::deque<std::future<SegmentMarks>> inflight;
    auto drain_one = [&] {
        auto next = std::move(inflight.front());
        inflight.pop_front();
        consume(next.get());
    };
    try {
        while (auto vr = builder.next()) {
            auto task = [&mark_detector, image = std::move(*vr)]() -> SegmentMarks {
                try {
                    return {image.segment_index, image.start_frame, image.row_count(), mark_detector.detect(image)};
                } catch (const Error& e) {
                    throw Error("segment " + std::to_string(image.segment_index) + ": mark detection: " + e.what());
                }
            };
            if (workers == 1) {
                consume(task());
                continue;
            }
            inflight.push_back(std::async(std::launch::async, std::move(task)));
            if (static_cast<int>(inflight.size()) >= workers) drain_one();
        }
        while (!inflight.empty()) drain_one();
        match_jobs(std::move(pending));
    } catch (...) {
        for (auto& f : inflight) f.wait();
        throw;
    }
    return report;
}

namespace {

json box_json(const BBox& b) { return {{"x0", b.x0}, {"y0", b.y0}, {"x1", b.x1}, {"y1", b.y1}}; }

}  // namespace

void write_report_json(const std::filesystem::path& path, const CountReport& report) {
    json counted = json::array();
    for (const auto& v : report.counted) {
        json row = {{"global_frame", v.global_frame}, {"class", v.class_label}, {"segment", v.segment_index}};
        row["mark"] = v.mark ? json(box_json(v.mark->bbox)) : json(nullptr);
        if (v.mark) row["mark"]["conf"] = v.mark->confidence;
        row["detection"] = v.detection ? json(box_json(v.detection->bbox)) : json(nullptr);
        if (v.detection) row["detection"]["conf"] = v.detection->confidence;
        row["score"] = v.score ? json(*v.score) : json(nullptr);
        counted.push_back(std::move(row));
    }
    json j = {{"per_class", report.per_class}, {"total", report.total},       {"rejected_marks", report.rejected_marks},
              {"segments", report.segments},   {"frames", report.frames},     {"counted", counted}};
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

void write_report_table(const std::filesystem::path& path, const CountReport& report) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "class           count\n";
    for (const auto& [label, n] : report.per_class) out << std::left << std::setw(16) << label << n << '\n';
    out << std::left << std::setw(16) << "TOTAL" << report.total << '\n';
    out << std::left << std::setw(16) << "rejected marks" << report.rejected_marks << "\n\n";

    auto box = [](const std::optional<BBox>& b) {
        if (!b) return std::string("-");
        return std::to_string(b->x0) + "," + std::to_string(b->y0) + "," + std::to_string(b->x1) + "," +
               std::to_string(b->y1);
    };
    out << std::left << std::setw(10) << "frame" << std::setw(12) << "class" << std::setw(22) << "mark"
        << std::setw(22) << "detection" << "score\n";
    for (const auto& v : report.counted) {
        out << std::left << std::setw(10) << v.global_frame << std::setw(12) << v.class_label << std::setw(22)
            << box(v.mark ? std::optional<BBox>(v.mark->bbox) : std::nullopt) << std::setw(22)
            << box(v.detection ? std::optional<BBox>(v.detection->bbox) : std::nullopt)
            << (v.score ? std::to_string(*v.score) : "-") << '\n';
    }
}

}  // namespace vrc
