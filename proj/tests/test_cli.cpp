#include <doctest.h>

#include <sstream>

#include <json.hpp>

#include "test_util.hpp"
#include "tlkit/cli.hpp"

using namespace tlkit;
using nlohmann::json;

namespace {

const std::string kGrid = std::string(TLKIT_TEST_DATA) + "/grid20";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("help on every subcommand") {
    for (const char* sub : {"stats", "split", "augment", "anchors", "compare-metrics", "eval", "focal", "cbam-check",
                            "bench"}) {
      const auto r = run({sub, "--help"});
      CHECK(r.code == cli::kOk);
      CHECK(r.out.find("--") != std::string::npos);
    }
    CHECK(run({"--help"}).code == cli::kOk);
  }

  TEST_CASE("usage errors exit 64") {
    CHECK(run({"anchors", "--data", kGrid, "--no-such-flag"}).code == cli::kUsage);
    CHECK(run({"frobnicate"}).code == cli::kUsage);
    CHECK(run({}).code == cli::kUsage);
    CHECK(run({"anchors"}).code == cli::kUsage);
    CHECK(run({"stats", "--data", kGrid, "--format", "xml"}).code == cli::kUsage);
  }

  TEST_CASE("anchors emits a grouped set") {
    const auto r = run({"anchors", "--data", kGrid, "--metric", "one-minus-iou", "--k", "9", "--seed", "41"});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(r.out);
    for (const char* s : {"small", "medium", "large"}) CHECK(j[s].size() == 3);
    const auto yolo = run({"anchors", "--data", kGrid, "--format", "yolo"});
    CHECK(std::count(yolo.out.begin(), yolo.out.end(), ',') == 17);
    CHECK(run({"anchors", "--data", kGrid, "--metric", "cosine"}).code == cli::kUsage);
  }

  TEST_CASE("identical inputs give byte-identical output") {
    const std::vector<std::vector<std::string>> cmds{
        {"stats", "--data", kGrid},
        {"stats", "--data", kGrid, "--format", "csv"},
        {"split", "--data", kGrid, "--seed", "7"},
        {"anchors", "--data", kGrid, "--format", "report"},
        {"compare-metrics", "--data", kGrid},
        {"focal", "--p", "0.9"},
        {"cbam-check", "--shape", "1,4,3,3", "--reduction", "2"},
    };
    for (const auto& c : cmds) {
      const auto a = run(c);
      const auto b = run(c);
      CHECK(a.code == cli::kOk);
      CHECK(a.out == b.out);
      CHECK_FALSE(a.out.empty());
    }
  }

  TEST_CASE("stats and split") {
    const json s = json::parse(run({"stats", "--data", kGrid}).out);
    CHECK(s["images"] == 20);
    CHECK(s["classes"].size() == 5);
    const json sp = json::parse(run({"split", "--data", kGrid}).out);
    CHECK(sp["train"]["count"] == 16);
    CHECK(sp["val"]["count"] == 2);
    CHECK(sp["test"]["count"] == 2);
    CHECK(sp["seed"] == 41);
    CHECK(run({"split", "--data", kGrid, "--ratios", "8,1"}).code == cli::kValidation);
  }

  TEST_CASE("augment writes a loadable dataset") {
    testutil::TempDir dir;
    const auto out = (dir / "aug").string();
    const auto r = run({"augment", "--data", kGrid, "--ops", "hflip;brightness:delta=-20..20", "--out-dir", out});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(r.out);
    CHECK(j["images_out"] == 60);
    const json s = json::parse(run({"stats", "--data", out}).out);
    CHECK(s["images"] == 60);
    CHECK(run({"augment", "--data", kGrid, "--ops", "mosaic", "--out-dir", out}).code == cli::kValidation);
  }

  TEST_CASE("eval wiring") {
    testutil::TempDir dir;
    testutil::write_text(dir / "gt/classes.txt", "a\nb\n");
    testutil::write_text(dir / "gt/im1.txt", "0 0.5 0.5 0.5 0.5\n1 0.25 0.25 0.1 0.1\n");
    testutil::write_text(dir / "sizes.txt", "im1 100 100\n");
    testutil::write_text(dir / "dets.txt", "im1 0 0.9 25 25 75 75\nim1 1 0.8 20 20 30 30\n");
    const auto r = run({"eval", "--gt", (dir / "gt").string(), "--dets", (dir / "dets.txt").string(), "--sizes",
                        (dir / "sizes.txt").string(), "--iou", "0.5"});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(r.out);
    CHECK(j["map50"] == 1.0);
    CHECK(j["map50_95"] == 1.0);

    testutil::write_text(dir / "bad.txt", "im1 5 0.9 25 25 75 75\n");
    CHECK(run({"eval", "--gt", (dir / "gt").string(), "--dets", (dir / "bad.txt").string(), "--sizes",
               (dir / "sizes.txt").string()})
              .code == cli::kValidation);
  }

  TEST_CASE("focal reports value and gradient") {
    const json j = json::parse(run({"focal", "--p", "0.9", "--y", "1", "--gamma", "2", "--alpha", "0.25"}).out);
    CHECK(j["loss"].get<double>() == doctest::Approx(2.63401e-4).epsilon(1e-5));
    CHECK(j["grad"].get<double>() == doctest::Approx(-8.0458e-3).epsilon(1e-4));
    CHECK(run({"focal", "--p", "1.5"}).code == cli::kValidation);
    CHECK(run({"focal"}).code == cli::kValidation);
  }

  TEST_CASE("cbam-check exit codes") {
    const auto ok = run({"cbam-check", "--shape", "2,8,5,5", "--reduction", "4", "--seed", "41"});
    CHECK(ok.code == cli::kOk);
    const json j = json::parse(ok.out);
    CHECK(j["max_rel_err"].get<double>() <= 1e-5);
    CHECK(j["passed"] == true);
    // an absurd step cannot meet the tolerance
    CHECK(run({"cbam-check", "--shape", "1,4,3,3", "--reduction", "2", "--step", "0.5", "--tol", "1e-12"}).code ==
          cli::kNumeric);
    CHECK(run({"cbam-check", "--shape", "2,8,5,5", "--reduction", "3"}).code == cli::kValidation);
    CHECK(run({"cbam-check"}).code == cli::kOk);
  }

  TEST_CASE("cbam-check parameters round trip through a blob") {
    testutil::TempDir dir;
    const auto blob = (dir / "p.bin").string();
    const auto a = run({"cbam-check", "--shape", "1,4,3,3", "--reduction", "2", "--save-params", blob});
    const auto b = run({"cbam-check", "--shape", "1,4,3,3", "--params", blob});
    CHECK(a.code == cli::kOk);
    CHECK(a.out == b.out);
  }

  TEST_CASE("bench reports fps as the reciprocal of latency") {
    const auto r = run({"bench", "--workload", "sleep", "--sleep-ms", "5", "--warmup", "0", "--iters", "4"});
    REQUIRE(r.code == cli::kOk);
    const json j = json::parse(r.out);
    CHECK(j["fps"].get<double>() * j["mean_ms"].get<double>() == doctest::Approx(1000.0));
  }

  TEST_CASE("config file values and flag overrides") {
    testutil::TempDir dir;
    testutil::write_text(dir / "run.cfg", "[focal]\np=0.9\ngamma=0\nalpha=1\n");
    const auto cfg = (dir / "run.cfg").string();
    json j = json::parse(run({"--config", cfg, "focal"}).out);
    CHECK(j["loss"].get<double>() == doctest::Approx(-std::log(0.9)));
    j = json::parse(run({"--config", cfg, "focal", "--p", "0.5"}).out);
    CHECK(j["loss"].get<double>() == doctest::Approx(-std::log(0.5)));
  }

  TEST_CASE("--out writes the report to a file") {
    testutil::TempDir dir;
    const auto path = (dir / "r.json").string();
    const auto r = run({"focal", "--p", "0.5", "--out", path});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.empty());
    CHECK(json::parse(testutil::read_text(path))["p"] == 0.5);
  }
}
