#include <doctest.h>

#include <random>

#include "support.hpp"
#include "vrcount/error.hpp"
#include "vrcount/image_io.hpp"
#include "vrcount/vr.hpp"

using namespace vrc;
using vrtest::TempDir;
using vrtest::VectorSource;

TEST_CASE("constant frames stack into constant rows") {
    auto frames = std::make_shared<std::vector<Image>>();
    for (int t = 0; t < 4; ++t) frames->push_back(Image(3, 3, static_cast<std::uint8_t>(10 * t)));
    VectorSource src(frames);
    const auto vrs = vr_build(src, {900, {1}});
    REQUIRE(vrs.size() == 1);
    const auto& vr = vrs[0];
    CHECK(vr.row_count() == 4);
    CHECK(vr.width() == 3);
    for (int r = 0; r < 4; ++r)
        for (auto v : vr.rows.row(r)) CHECK(v == 10 * r);
}

TEST_CASE("900 frames at 1280x720 give one 900x1280 image") {
    SceneConfig cfg = SceneConfig::defaults();
    cfg.meta = {1280, 720, 900, {30, 1}};
    cfg.spawn_rate = 2;
    const auto scene = vrtest::make_scene(cfg);
    auto src = scene.source();
    VRBuilder b(*src, {900, {120}});
    CHECK(b.segment_count() == 1);
    auto vr = b.next();
    REQUIRE(vr);
    CHECK(vr->row_count() == 900);
    CHECK(vr->width() == 1280);
    CHECK_FALSE(b.next());
}

TEST_CASE("2000 frames split 900/900/200 and every row matches a re-read frame") {
    SceneConfig cfg = SceneConfig::defaults();
    cfg.meta = {48, 40, 2000, {30, 1}};
    cfg.lanes = 1;
    cfg.size_table = {{"Car", {12, 10}}};
    cfg.class_mix = {{"Car", 1}};
    cfg.speed_min = 1;
    cfg.speed_max = 4;
    cfg.spawn_rate = 6;
    cfg.min_headway_px = 4;
    const auto scene = vrtest::make_scene(cfg);
    auto src = scene.source();
    const auto vrs = vr_build(*src, {900, {17}});
    REQUIRE(vrs.size() == 3);
    CHECK(vrs[0].row_count() == 900);
    CHECK(vrs[1].row_count() == 900);
    CHECK(vrs[2].row_count() == 200);
    CHECK(vrs[2].start_frame == 1800);

    auto again = scene.source();
    for (std::int64_t t = 0; t < 2000; ++t) {
        const auto f = again->next();
        REQUIRE(f);
        const auto& vr = vrs[static_cast<std::size_t>(t / 900)];
        const auto a = vr.rows.row(static_cast<int>(t % 900));
        const auto b = f->pixels.row(17);
        REQUIRE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    }
}

TEST_CASE("row fidelity on random small videos") {
    std::mt19937 rng(5);
    for (int trial = 0; trial < 60; ++trial) {
        const int w = 1 + static_cast<int>(rng() % 32);
        const int h = 1 + static_cast<int>(rng() % 32);
        const int n = 1 + static_cast<int>(rng() % 50);
        auto frames = std::make_shared<std::vector<Image>>();
        for (int t = 0; t < n; ++t) {
            Image img(w, h);
            for (auto& v : img.data) v = static_cast<std::uint8_t>(rng());
            frames->push_back(std::move(img));
        }
        const int row = static_cast<int>(rng() % h);
        const int seg = 2 + static_cast<int>(rng() % 20);
        VectorSource src(frames);
        const auto vrs = vr_build(src, {seg, {row}});
        CHECK(static_cast<int>(vrs.size()) == (n + seg - 1) / seg);
        for (int t = 0; t < n; ++t) {
            const auto a = vrs[t / seg].rows.row(t % seg);
            const auto b = (*frames)[t].row(row);
            CHECK(std::equal(a.begin(), a.end(), b.begin(), b.end()));
        }
    }
}

TEST_CASE("segment spec is validated against the video") {
    auto frames = std::make_shared<std::vector<Image>>(3, Image(4, 4));
    VectorSource src(frames);
    CHECK_THROWS_AS(VRBuilder(src, {1, {0}}), ConfigError);
    CHECK_THROWS_AS(VRBuilder(src, {10, {4}}), ConfigError);
    CHECK_THROWS_AS(VRBuilder(src, {10, {-1}}), ConfigError);
}

TEST_CASE("vr_render: untouched raster, exact outline") {
    TempDir dir;
    VRImage vr{0, 0, Image(20, 15)};
    std::mt19937 rng(9);
    for (auto& v : vr.rows.data) v = static_cast<std::uint8_t>(rng() % 200);

    vr_render(vr, {}, dir / "plain.ppm");
    CHECK(read_ppm(dir / "plain.ppm") == vr.rows);

    const Mark m{{3, 4, 9, 10}, 1.0};
    vr_render(vr, {m}, dir / "one.ppm");
    const Image out = read_ppm(dir / "one.ppm");
    for (int y = 0; y < 15; ++y)
        for (int x = 0; x < 20; ++x) {
            const bool inside = x >= 3 && x < 9 && y >= 4 && y < 10;
            const bool outline = inside && (x == 3 || x == 8 || y == 4 || y == 9);
            const auto* p = out.pixel(x, y);
            const auto* q = vr.rows.pixel(x, y);
            if (outline) {
                CHECK(p[0] == 0);
                CHECK(p[1] == 255);
                CHECK(p[2] == 0);
            } else {
                CHECK(std::equal(p, p + 3, q));
            }
        }
    CHECK_THROWS_AS(vr_render(vr, {{{30, 0, 40, 2}, 1.0}}, dir / "bad.ppm"), ContractError);
}
