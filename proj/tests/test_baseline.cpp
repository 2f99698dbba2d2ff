#include <doctest.h>

#include <algorithm>

#include "support.hpp"
#include "vrcount/baseline.hpp"
#include "vrcount/error.hpp"

using namespace vrc;

namespace {

Detection det(int x0, int y0, int x1, int y1, const std::string& label = "Car") {
    return {{x0, y0, x1, y1}, label, 1.0};
}

// Returns a scripted detection list per frame index.
class ScriptedDetector final : public VehicleDetector {
public:
    explicit ScriptedDetector(std::vector<std::vector<Detection>> per_frame) : per_frame_(std::move(per_frame)) {}
    std::vector<Detection> detect(const Frame& f) override { return per_frame_.at(static_cast<std::size_t>(f.index)); }

private:
    std::vector<std::vector<Detection>> per_frame_;
};

std::unique_ptr<vrtest::VectorSource> blank_video(int frames, int w = 100, int h = 100) {
    return std::make_unique<vrtest::VectorSource>(std::make_shared<std::vector<Image>>(frames, Image(w, h)));
}

}  // namespace

TEST_CASE("tracker_step: new tracks, association, retirement") {
    TrackerState s;
    const TrackerParams p;
    tracker_step(s, {det(0, 0, 10, 10), det(50, 50, 60, 60)}, 0, p);
    CHECK(s.tracks.size() == 2);
    CHECK(s.next_id == 2);

    tracker_step(s, {det(0, 1, 10, 11)}, 1, p);  // IoU 0.82 with track 0
    REQUIRE(s.tracks.size() == 2);
    CHECK(s.tracks[0].last_frame == 1);
    CHECK(s.tracks[0].hits() == 2);
    CHECK(s.tracks[1].last_frame == 0);

    // track 1 unseen for more than max_age frames
    tracker_step(s, {det(0, 2, 10, 12)}, 5, p);
    CHECK(s.tracks.size() == 2);
    tracker_step(s, {det(0, 3, 10, 13)}, 6, p);
    REQUIRE(s.tracks.size() == 1);
    CHECK(s.tracks[0].id == 0);

    CHECK_THROWS_AS(tracker_step(s, {}, 6, p), ContractError);
}

TEST_CASE("tracker_step: greedy order agrees with exhaustive enumeration") {
    // IoU(A,d1)=0.8, IoU(B,d2)=7/13, IoU(A,d2)=3/17, IoU(B,d1)=0
    const BBox A{0, 0, 10, 10}, B{10, 0, 20, 10};
    const std::vector<Detection> ds{det(0, 0, 8, 10), det(7, 0, 17, 10)};
    TrackerParams p;
    p.iou_threshold = 0.1;
    TrackerState s;
    s.tracks = {Track{0, A, 0, {{"Car", 1}}, false, {{0, 5.0}}}, Track{1, B, 0, {{"Car", 1}}, false, {{0, 5.0}}}};
    s.next_id = 2;
    tracker_step(s, ds, 1, p);
    REQUIRE(s.tracks.size() == 2);
    CHECK(s.tracks[0].last_bbox == ds[0].bbox);
    CHECK(s.tracks[1].last_bbox == ds[1].bbox);

    // exhaustive: both one-to-one assignments, best total IoU
    const double keep = bbox_iou(A, ds[0].bbox) + bbox_iou(B, ds[1].bbox);
    const double swap = bbox_iou(A, ds[1].bbox) + bbox_iou(B, ds[0].bbox);
    CHECK(keep > swap);
    CHECK(bbox_iou(A, ds[0].bbox) == doctest::Approx(0.8));
}

TEST_CASE("tracker_step: pairs below the threshold stay unmatched") {
    TrackerState s;
    tracker_step(s, {det(0, 0, 10, 10)}, 0, {});
    tracker_step(s, {det(8, 0, 18, 10)}, 1, {});  // IoU 2/18
    CHECK(s.tracks.size() == 2);
}

TEST_CASE("majority class, ties to the smallest label") {
    Track t;
    t.class_votes = {{"Van", 2}, {"Bus", 2}, {"Car", 1}};
    CHECK(t.majority_class() == "Bus");
    t.class_votes["Car"] = 3;
    CHECK(t.majority_class() == "Car");
}

TEST_CASE("baseline_count: empty video") {
    auto src = blank_video(0);
    ScriptedDetector d({});
    CHECK(baseline_count(*src, {0}, d, {}).total == 0);
}

TEST_CASE("baseline_count: one car, zero-noise oracle") {
    SceneConfig cfg = SceneConfig::defaults();
    cfg.meta.frame_count = 300;
    const auto s =
        vrtest::make_scene(cfg, GroundTruth{cfg.meta, {vrtest::make_object(0, "Car", 60, 24, 40, 60, 10)}});
    OracleVehicleDetector oracle(s.gt, {});
    InstrumentedVehicleDetector counted(oracle);
    auto src = s.source();
    const auto r = baseline_count(*src, {120}, counted, {});
    CHECK(r.per_class == std::map<std::string, std::int64_t>{{"Car", 1}});
    CHECK(counted.invocations() == 300);
}

TEST_CASE("baseline_count: the crossed latch fires once") {
    // a box bouncing across row 50 for 20 frames
    std::vector<std::vector<Detection>> script;
    for (int t = 0; t < 20; ++t) {
        const int y = t % 2 ? 49 : 52;
        script.push_back({det(10, y - 5, 30, y + 5, t < 10 ? "Van" : "Car")});
    }
    ScriptedDetector d(script);
    auto src = blank_video(20);
    const auto r = baseline_count(*src, {50}, d, {});
    CHECK(r.total == 1);
}

TEST_CASE("baseline_count: min_hits gates the count") {
    // crossing between the first and second observation
    std::vector<std::vector<Detection>> script{{det(10, 43, 30, 53)}, {det(10, 47, 30, 57)}, {det(10, 50, 30, 60)}};
    auto src1 = blank_video(3);
    ScriptedDetector d1(script);
    TrackerParams p;
    p.min_hits = 2;
    CHECK(baseline_count(*src1, {50}, d1, p).total == 1);
    auto src2 = blank_video(3);
    ScriptedDetector d2(script);
    p.min_hits = 3;
    CHECK(baseline_count(*src2, {50}, d2, p).total == 0);
}

TEST_CASE("baseline_count equals ground truth on 20 random scenes") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        SceneConfig cfg = SceneConfig::defaults();
        cfg.meta.frame_count = 600;
        cfg.lanes = 1 + static_cast<int>(seed % 4);
        cfg.lane_directions.clear();
        for (int l = 0; l < cfg.lanes; ++l) cfg.lane_directions.push_back(l % 2 ? Direction::up : Direction::down);
        cfg.spawn_rate = 5;
        cfg.seed = seed;
        const auto s = vrtest::make_scene(cfg);
        OracleVehicleDetector oracle(s.gt, {});
        auto src = s.source();
        const auto r = baseline_count(*src, {120}, oracle, {});
        std::map<std::string, std::int64_t> expect;
        for (const auto& e : crossings(*s.gt, {120})) ++expect[e.class_label];
        CHECK(r.per_class == expect);
    }
}
