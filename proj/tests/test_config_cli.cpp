#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <sstream>

#include "support.hpp"
#include "vrcount/cli.hpp"
#include "vrcount/config.hpp"
#include "vrcount/error.hpp"

using namespace vrc;
using nlohmann::json;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "vrcount");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> small_synth(const std::filesystem::path& dir, const std::string& seed) {
    return {"synth",   "--output-dir", dir.string(), "--seed",       seed, "--width", "160", "--height", "120",
            "--frames", "300",         "--line-row", "60",           "--spawn-rate", "8"};
}

}  // namespace

TEST_CASE("config json round trip") {
    RunConfig c;
    c.segment = {123, {77}};
    c.match.band_margin_px = 4;
    c.mark_params.luma_threshold = 31;
    c.tracker.max_age_frames = 9;
    c.noise.jitter_px = 2;
    c.scene.lanes = 3;
    c.scene.lane_directions = {Direction::up, Direction::down, Direction::up};
    c.mark_detector = "oracle";
    c.external_command = "python3 det.py";
    c.threads = 3;
    c.output_dir = "/tmp/x";
    const json j = to_json(c);
    CHECK(to_json(config_from_json(j)) == j);
    CHECK(config_from_json(j).segment.segment_length_frames == 123);
    CHECK(config_from_json(j).scene.lane_directions == c.scene.lane_directions);
}

TEST_CASE("config: partial files keep defaults, unknown keys are named") {
    const RunConfig c = config_from_json(json{{"segment", {{"length", 450}}}});
    CHECK(c.segment.segment_length_frames == 450);
    CHECK(c.segment.line.row_px == RunConfig{}.segment.line.row_px);
    try {
        config_from_json(json{{"segment", {{"lenght", 450}}}});
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("lenght") != std::string::npos);
    }
    CHECK_THROWS_AS(config_from_json(json{{"segment", {{"length", "long"}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json(json::array()), ConfigError);
}

TEST_CASE("cli: synth is deterministic and count reproduces ground truth") {
    vrtest::TempDir a, b;
    REQUIRE(run_cli(small_synth(a.path(), "7")).code == 0);
    REQUIRE(run_cli(small_synth(b.path(), "7")).code == 0);
    CHECK(vrtest::slurp(a / "video.rgb") == vrtest::slurp(b / "video.rgb"));
    CHECK(vrtest::slurp(a / "ground_truth.json") == vrtest::slurp(b / "ground_truth.json"));

    const auto gt = json::parse(vrtest::slurp(a / "ground_truth.json"));
    const auto objects = gt["objects"].size();
    REQUIRE(objects > 0);

    vrtest::TempDir out;
    const auto r = run_cli({"count", "--manifest", (a / "manifest.json").string(), "--gt",
                            (a / "ground_truth.json").string(), "--detector", "oracle", "--line-row", "60",
                            "--segment-length", "100", "--output-dir", out.path().string()});
    REQUIRE(r.code == 0);
    const auto report = json::parse(vrtest::slurp(out / "count_report.json"));
    const auto acc = json::parse(vrtest::slurp(out / "count_accuracy.json"));
    CHECK(report["total"] == acc["actual"]);
    CHECK(acc["counting_accuracy_pct"] == 100.0);

    // the run record is itself a valid config
    const RunConfig rec = load_config(out / "count.run_config.json");
    CHECK(rec.segment.segment_length_frames == 100);
    CHECK(rec.mark_detector == "oracle");
    CHECK(rec.manifest == a / "manifest.json");

    // rendering needs marks only, so no ground truth
    vrtest::TempDir vr;
    REQUIRE(run_cli({"vr-render", "--manifest", (a / "manifest.json").string(), "--line-row", "60",
                     "--segment-length", "100", "--output-dir", vr.path().string()})
                .code == 0);
    CHECK(json::parse(vrtest::slurp(vr / "vr/marks.json")).size() == 3);
    CHECK(std::filesystem::exists(vr / "vr/segment_000002.ppm"));
}

TEST_CASE("cli: flags override the config file, env overrides the config output dir") {
    vrtest::TempDir dir;
    vrtest::write_text(dir / "c.json",
                       json{{"segment", {{"length", 300}, {"line_row", 40}}}, {"output_dir", (dir / "from_config").string()}}
                           .dump());
    std::vector<std::string> args{"synth", "--config", (dir / "c.json").string(), "--frames", "60",
                                  "--width", "160",    "--height",                 "120",     "--segment-length", "50"};

    REQUIRE(run_cli(args).code == 0);
    const RunConfig rec = load_config(dir / "from_config" / "synth.run_config.json");
    CHECK(rec.segment.segment_length_frames == 50);
    CHECK(rec.segment.line.row_px == 40);

    setenv(kOutputDirEnv, (dir / "from_env").c_str(), 1);
    const auto r = run_cli(args);
    unsetenv(kOutputDirEnv);
    REQUIRE(r.code == 0);
    CHECK(std::filesystem::exists(dir / "from_env" / "manifest.json"));

    args.push_back("--output-dir");
    args.push_back((dir / "from_flag").string());
    REQUIRE(run_cli(args).code == 0);
    CHECK(std::filesystem::exists(dir / "from_flag" / "manifest.json"));
}

TEST_CASE("cli: exit codes") {
    vrtest::TempDir dir;
    const auto out = dir.path().string();
    CHECK(run_cli({}).code == 2);
    CHECK(run_cli({"count", "--no-such-flag"}).code == 2);
    CHECK(run_cli({"count", "--segment-length", "abc"}).code == 2);
    CHECK(run_cli({"count", "--output-dir", out}).code == 2);  // no manifest
    CHECK(run_cli({"count", "--segment-length", "1", "--manifest", "m.json", "--output-dir", out}).code == 2);

    vrtest::write_text(dir / "bad.json", "{\"nope\": 1}");
    const auto bad = run_cli({"count", "--config", (dir / "bad.json").string()});
    CHECK(bad.code == 2);
    CHECK(bad.err.find("nope") != std::string::npos);

    // a manifest path that does not exist is a pipeline error
    const auto missing = run_cli({"count", "--manifest", (dir / "absent.json").string(), "--output-dir", out});
    CHECK(missing.code == 1);

    CHECK(run_cli({"--help"}).code == 0);
}
