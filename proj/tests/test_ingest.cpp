#include <doctest.h>

#include "support.hpp"
#include "vrcount/error.hpp"
#include "vrcount/image_io.hpp"
#include "vrcount/ingest.hpp"

using namespace vrc;
using vrtest::TempDir;

namespace {

SceneConfig small_config(int w, int h, std::int64_t frames, std::uint64_t seed) {
    SceneConfig c = SceneConfig::defaults();
    c.meta = {w, h, frames, {25, 1}};
    c.lanes = 1;
    c.size_table = {{"Car", {4, 6}}};
    c.class_mix = {{"Car", 1.0}};
    c.speed_min = 1;
    c.speed_max = 3;
    c.spawn_rate = 8;
    c.min_headway_px = 4;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("raw video: exact size opens, truncated file is a geometry error") {
    TempDir dir;
    const auto scene = vrtest::make_scene(small_config(16, 12, 900, 1));
    auto src = scene.source();
    write_raw_video(*src, dir / "v.rgb", dir / "m.json");
    CHECK(std::filesystem::file_size(dir / "v.rgb") == 900u * 16 * 12 * 3);
    auto opened = open_source(dir / "m.json");
    CHECK(opened->meta() == scene.gt->meta);

    std::filesystem::resize_file(dir / "v.rgb", 900u * 16 * 12 * 3 - 1);
    try {
        open_source(dir / "m.json");
        FAIL("expected GeometryError");
    } catch (const GeometryError& e) {
        CHECK(e.field() == "frame_count");
    }
}

TEST_CASE("raw video round trip is byte identical") {
    TempDir dir;
    const auto scene = vrtest::make_scene(small_config(20, 14, 120, 2));
    auto src = scene.source();
    write_raw_video(*src, dir / "v.rgb", dir / "m.json");
    auto back = open_source(dir / "m.json");
    for (std::int64_t t = 0; t < 120; ++t) {
        auto f = back->next();
        REQUIRE(f);
        CHECK(f->index == t);
        CHECK(f->pixels == render_frame(*scene.gt, *scene.config, t));
    }
    CHECK_FALSE(back->next());
    CHECK_THROWS_AS(back->next(), ContractError);
}

TEST_CASE("frame directory of 900 frames reopens with the same meta") {
    TempDir dir;
    const auto scene = vrtest::make_scene(small_config(32, 18, 900, 3));
    auto src = scene.source();
    write_frame_dir(*src, dir / "frames", dir / "m.json");
    CHECK(std::filesystem::exists(dir / "frames" / "000000.ppm"));
    CHECK(std::filesystem::exists(dir / "frames" / "000899.ppm"));
    auto back = open_source(dir / "m.json");
    CHECK(back->meta().frame_count == 900);
    CHECK(back->meta() == scene.gt->meta);
    auto f = back->next();
    REQUIRE(f);
    CHECK(f->index == 0);
    CHECK(f->pixels == render_frame(*scene.gt, *scene.config, 0));
}

TEST_CASE("frame directory mismatches name the field") {
    TempDir dir;
    const auto scene = vrtest::make_scene(small_config(12, 10, 5, 4));
    auto src = scene.source();
    write_frame_dir(*src, dir / "frames", dir / "m.json");

    SUBCASE("missing frame") {
        std::filesystem::remove(dir / "frames" / "000003.ppm");
        try {
            open_source(dir / "m.json");
            FAIL("expected GeometryError");
        } catch (const GeometryError& e) {
            CHECK(e.field() == "frame_count");
        }
    }
    SUBCASE("gap in numbering") {
        std::filesystem::rename(dir / "frames" / "000003.ppm", dir / "frames" / "000007.ppm");
        CHECK_THROWS_AS(open_source(dir / "m.json"), GeometryError);
    }
    SUBCASE("wrong width") {
        write_ppm(dir / "frames" / "000002.ppm", Image(13, 10));
        try {
            open_source(dir / "m.json");
            FAIL("expected GeometryError");
        } catch (const GeometryError& e) {
            CHECK(e.field() == "width");
        }
    }
    SUBCASE("wrong height") {
        write_ppm(dir / "frames" / "000002.ppm", Image(12, 9));
        try {
            open_source(dir / "m.json");
            FAIL("expected GeometryError");
        } catch (const GeometryError& e) {
            CHECK(e.field() == "height");
        }
    }
}

TEST_CASE("manifest errors are distinct") {
    TempDir dir;
    CHECK_THROWS_AS(open_source(dir / "absent.json"), IoError);

    vrtest::write_text(dir / "bad.json", "{\"kind\": \"raw_video\", ");
    CHECK_THROWS_AS(open_source(dir / "bad.json"), ManifestError);

    vrtest::write_text(dir / "nokey.json",
                       R"({"kind":"raw_video","width":4,"height":4,"frame_count":1,"fps_num":30,"path":"v.rgb"})");
    try {
        open_source(dir / "nokey.json");
        FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
        CHECK(e.field() == "fps_den");
    }

    vrtest::write_text(dir / "kind.json",
                       R"({"kind":"mp4","width":4,"height":4,"frame_count":1,"fps_num":30,"fps_den":1,"path":"v"})");
    try {
        open_source(dir / "kind.json");
        FAIL("expected ManifestError");
    } catch (const ManifestError& e) {
        CHECK(e.field() == "kind");
    }

    vrtest::write_text(dir / "nodata.json",
                       R"({"kind":"raw_video","width":4,"height":4,"frame_count":1,"fps_num":30,"fps_den":1,"path":"v"})");
    CHECK_THROWS_AS(open_source(dir / "nodata.json"), IoError);
}

TEST_CASE("next_frame streams in order; skip_to only moves forward") {
    TempDir dir;
    const auto scene = vrtest::make_scene(small_config(8, 8, 10, 5));
    auto src = scene.source();
    write_raw_video(*src, dir / "v.rgb", dir / "m.json");
    auto s = open_source(dir / "m.json");
    auto f0 = s->next();
    REQUIRE(f0);
    CHECK(f0->index == 0);
    s->skip_to(6);
    auto f6 = s->next();
    REQUIRE(f6);
    CHECK(f6->index == 6);
    CHECK(f6->pixels == render_frame(*scene.gt, *scene.config, 6));
    CHECK_THROWS_AS(s->skip_to(2), ContractError);
    auto r = s->reopen();
    CHECK(r->cursor() == 0);
    CHECK(r->next()->index == 0);
}

TEST_CASE("empty video yields end-of-stream immediately") {
    TempDir dir;
    auto scene = vrtest::make_scene(small_config(8, 8, 0, 6));
    auto src = scene.source();
    write_raw_video(*src, dir / "v.rgb", dir / "m.json");
    auto s = open_source(dir / "m.json");
    CHECK_FALSE(s->next());
}

TEST_CASE("ppm round trip and malformed header") {
    TempDir dir;
    Image img(5, 3);
    for (std::size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<std::uint8_t>(i * 7);
    write_ppm(dir / "a.ppm", img);
    CHECK(read_ppm(dir / "a.ppm") == img);
    vrtest::write_text(dir / "b.ppm", "P3\n5 3\n255\n");
    CHECK_THROWS_AS(read_ppm(dir / "b.ppm"), IoError);
}
