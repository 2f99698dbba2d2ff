#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <vector>

#include "vrcount/model.hpp"
#include "vrcount/synth.hpp"
#include "vrcount/vr.hpp"

namespace vrc {

struct MarkDetectorParams {
    int luma_threshold = 25;  // |luma - background| must exceed this
    int min_area_px = 40;
    int min_height_px = 2;
    int morph_close_radius = 1;  // square structuring element of side 2r+1

    void validate() const;
};

// Controlled degradation applied by the vehicle oracle.
struct DetectorNoise {
    int jitter_px = 0;           // each box edge moves uniformly in [-jitter, +jitter]
    double miss_rate = 0.0;      // per-box drop probability
    double spurious_rate = 0.0;  // expected false boxes per invocation
    std::uint64_t seed = 0;

    void validate() const;
};

// Mark detection on VR images. Implementations must be reentrant: the
// counting pipeline calls detect() for different segments concurrently.
class MarkDetector {
public:
    virtual ~MarkDetector() = default;
    virtual std::vector<Mark> detect(const VRImage& vr) = 0;
};

// Vehicle detection on single frames.
class VehicleDetector {
public:
    virtual ~VehicleDetector() = default;
    virtual std::vector<Detection> detect(const Frame& frame) = 0;
};

// Per-column temporal median of the luma-converted VR raster (lower median
// for even row counts).
std::vector<std::uint8_t> estimate_background(const VRImage& vr);

// Background subtraction, morphological closing, 8-connected components.
// Marks come back sorted by y0 then x0.
std::vector<Mark> detect_marks_classical(const VRImage& vr, const MarkDetectorParams& params);

// Exact marks from ground truth for one segment, confidence 1.
std::vector<Mark> oracle_detect_marks(const GroundTruth& gt, std::int64_t segment_index, const SegmentSpec& spec);

// Ground-truth boxes of the objects visible in frame `frame_index`, with
// noise drawn deterministically from (noise.seed, frame_index). Spurious
// boxes take labels from `spurious_labels`.
std::vector<Detection> oracle_detect_vehicles(const GroundTruth& gt, std::int64_t frame_index,
                                              const DetectorNoise& noise,
                                              const ClassSet& spurious_labels = ClassSet::vehicles());

class ClassicalMarkDetector final : public MarkDetector {
public:
    explicit ClassicalMarkDetector(MarkDetectorParams params) : params_(params) { params_.validate(); }
    std::vector<Mark> detect(const VRImage& vr) override { return detect_marks_classical(vr, params_); }

private:
    MarkDetectorParams params_;
};

class OracleMarkDetector final : public MarkDetector {
public:
    OracleMarkDetector(std::shared_ptr<const GroundTruth> gt, SegmentSpec spec) : gt_(std::move(gt)), spec_(spec) {}
    std::vector<Mark> detect(const VRImage& vr) override {
        return oracle_detect_marks(*gt_, vr.segment_index, spec_);
    }

private:
    std::shared_ptr<const GroundTruth> gt_;
    SegmentSpec spec_;
};

class OracleVehicleDetector final : public VehicleDetector {
public:
    OracleVehicleDetector(std::shared_ptr<const GroundTruth> gt, DetectorNoise noise,
                          ClassSet labels = ClassSet::vehicles())
        : gt_(std::move(gt)), noise_(noise), labels_(std::move(labels)) {
        noise_.validate();
    }
    std::vector<Detection> detect(const Frame& frame) override {
        return oracle_detect_vehicles(*gt_, frame.index, noise_, labels_);
    }

private:
    std::shared_ptr<const GroundTruth> gt_;
    DetectorNoise noise_;
    ClassSet labels_;
};

// Counts every call and optionally sleeps to model inference cost.
class InstrumentedMarkDetector final : public MarkDetector {
public:
    explicit InstrumentedMarkDetector(MarkDetector& inner, double latency_ms = 0.0)
        : inner_(inner), latency_ms_(latency_ms) {}
    std::vector<Mark> detect(const VRImage& vr) override;
    std::int64_t invocations() const { return calls_.load(); }

private:
    MarkDetector& inner_;
    double latency_ms_;
    std::atomic<std::int64_t> calls_{0};
};

class InstrumentedVehicleDetector final : public VehicleDetector {
public:
    explicit InstrumentedVehicleDetector(VehicleDetector& inner, double latency_ms = 0.0)
        : inner_(inner), latency_ms_(latency_ms) {}
    std::vector<Detection> detect(const Frame& frame) override;
    std::int64_t invocations() const { return calls_.load(); }

private:
    VehicleDetector& inner_;
    double latency_ms_;
    std::atomic<std::int64_t> calls_{0};
};

}  // namespace vrc
