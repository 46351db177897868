#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "dax/io.hpp"
#include "dax/scenes.hpp"
#include "support.hpp"

using namespace dax;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "dax");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dax-test-cli-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// A 16x16 scene, its region and a fast dax-v2 run config.
fs::path write_fixture(const fs::path& dir, const json& extra = json::object()) {
  const scenes::Scene s = scenes::make_scene(16, 11);
  io::write_netpbm(dir / "scene.ppm", s.image);
  io::write_pbm(dir / "region.pbm", s.square);
  json cfg = {{"input", "scene.ppm"},
              {"target", 0},
              {"seed", 4},
              {"method", "dax-v2"},
              {"out", "bundle"},
              {"blackbox", {{"kind", "region-mean"}, {"regions", {"region.pbm"}}}},
              {"sampler", {{"num_samples", 64}}},
              {"dax", {{"epochs", 3}, {"batch_size", 16}}}};
  cfg.update(extra);
  io::write_file(dir / "config.json", cfg.dump(2));
  return dir / "config.json";
}

std::string suite_json(int count, const std::string& methods) {
  return R"({"methods": )" + methods + R"(, "seed": 3, "deletion_steps": 8,
    "scenes": {"count": )" + std::to_string(count) + R"(, "size": 16, "first_seed": 40},
    "sampler": {"num_samples": 48}, "dax": {"epochs": 2, "batch_size": 16},
    "rise": {"num_masks": 40}, "lime": {"num_samples": 48}})";
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(call({}).code == 1);
  CHECK(call({"bogus"}).code == 1);
  CHECK(call({"explain", "--nope"}).code == 1);
  const Result v = call({"--version"});
  CHECK(v.code == 0);
  CHECK(v.out.find(cli::kToolVersion) != std::string::npos);
}

TEST_CASE("explain writes a complete, reproducible bundle") {
  const fs::path dir = scratch_dir("explain");
  const fs::path cfg = write_fixture(dir);
  const Result r = call({"explain", "--config", cfg.string()});
  REQUIRE(r.code == 0);
  const fs::path bundle = dir / "bundle";
  for (const char* f : {"mask.dxt", "mask_binary.pbm", "heatmap.ppm", "training_log.csv", "manifest.json"}) {
    CHECK(fs::exists(bundle / f));
  }
  CHECK(std::distance(fs::directory_iterator(bundle), fs::directory_iterator{}) == 5);
  const std::string mask = io::read_file(bundle / "mask.dxt");
  const std::string binary = io::read_file(bundle / "mask_binary.pbm");
  const json manifest = json::parse(io::read_file(bundle / "manifest.json"));
  CHECK(manifest["config"]["method"] == "dax-v2");
  CHECK(manifest["seeds"]["run"] == 4);
  CHECK(manifest["artifacts"]["mask.dxt"] == io::hex64(io::fnv1a(mask)));
  CHECK(io::read_dxt_grid(bundle / "mask.dxt").height() == 16);
  CHECK(io::read_file(bundle / "training_log.csv").rfind("epoch,", 0) == 0);

  // Same config again replaces the bundle with identical artifacts.
  REQUIRE(call({"explain", "--config", cfg.string()}).code == 0);
  CHECK(io::read_file(bundle / "mask.dxt") == mask);
  CHECK(io::read_file(bundle / "mask_binary.pbm") == binary);
  fs::remove_all(dir);
}

TEST_CASE("flags override the config file") {
  const fs::path dir = scratch_dir("flags");
  const fs::path cfg = write_fixture(dir);
  const fs::path out = dir / "lime-out";
  const Result r = call({"explain", "--config", cfg.string(), "--method", "lime", "--lime-samples", "30", "--seed",
                         "9", "--out", out.string()});
  REQUIRE(r.code == 0);
  const json m = json::parse(io::read_file(out / "manifest.json"));
  CHECK(m["config"]["method"] == "lime");
  CHECK(m["config"]["lime"]["num_samples"] == 30);
  CHECK(m["seeds"]["run"] == 9);
  CHECK_FALSE(fs::exists(out / "training_log.csv"));
  CHECK(m["summary"]["lime_weights"].size() == m["summary"]["segments"].get<std::size_t>());
  fs::remove_all(dir);
}

TEST_CASE("bad configurations fail before anything is written") {
  const fs::path dir = scratch_dir("bad");
  SUBCASE("missing input") {
    const fs::path cfg = write_fixture(dir, {{"input", "nope.ppm"}});
    const Result r = call({"explain", "--config", cfg.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("nope.ppm") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "bundle"));
    CHECK_FALSE(fs::exists(dir / "bundle.partial"));
  }
  SUBCASE("unknown key") {
    const fs::path cfg = write_fixture(dir, {{"dax", {{"epochs", 3}, {"learning_rat", 0.1}}}});
    const Result r = call({"explain", "--config", cfg.string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("learning_rat") != std::string::npos);
  }
  SUBCASE("bad value") {
    const fs::path cfg = write_fixture(dir);
    CHECK(call({"explain", "--config", cfg.string(), "--epochs", "0"}).code == 1);
    CHECK(call({"explain", "--config", cfg.string(), "--method", "gradcam"}).code == 1);
    CHECK_FALSE(fs::exists(dir / "bundle"));
  }
  SUBCASE("target out of range is reported with its stage-free message") {
    const fs::path cfg = write_fixture(dir, {{"target", 5}});
    CHECK(call({"explain", "--config", cfg.string()}).code == 1);
    CHECK_FALSE(fs::exists(dir / "bundle"));
  }
  SUBCASE("an output directory that is not a bundle is left alone") {
    const fs::path cfg = write_fixture(dir);
    fs::create_directories(dir / "bundle");
    io::write_file(dir / "bundle" / "keep.txt", "mine");
    CHECK(call({"explain", "--config", cfg.string()}).code != 0);
    CHECK(io::read_file(dir / "bundle" / "keep.txt") == "mine");
  }
  fs::remove_all(dir);
}

TEST_CASE("runtime failures name the stage and leave no bundle") {
  const fs::path dir = scratch_dir("stage");
  const fs::path cfg =
      write_fixture(dir, {{"method", "rise"}, {"blackbox", {{"kind", "constant"}, {"probabilities", {0.0, 1.0}}}}});
  const Result r = call({"explain", "--config", cfg.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("rise:") != std::string::npos);
  CHECK_FALSE(fs::exists(dir / "bundle"));
  fs::remove_all(dir);
}

TEST_CASE("evaluate on the frozen seed suite matches the golden report") {
  const fs::path dir = scratch_dir("evaluate");
  io::write_file(dir / "suite.json", suite_json(3, R"(["dax-v2", "lime", "rise", "occlusion"])"));
  const Result r = call({"evaluate", "--config", (dir / "suite.json").string(), "--out", (dir / "r1").string()});
  REQUIRE(r.code == 0);
  const std::string results = io::read_file(dir / "r1" / "results.csv");
  // 3 items x 4 methods x 4 metrics plus the header.
  CHECK(std::count(results.begin(), results.end(), '\n') == 49);
  CHECK(results == testing::golden_text("evaluate_results.csv", results));
  CHECK(fs::exists(dir / "r1" / "aggregate.csv"));
  CHECK(fs::exists(dir / "r1" / "report.txt"));
  CHECK(io::read_file(dir / "r1" / "failures.csv") == "item,method,error\n");

  // Scheduling does not change the numbers.
  REQUIRE(call({"evaluate", "--config", (dir / "suite.json").string(), "--out", (dir / "r2").string(), "--jobs", "3"})
              .code == 0);
  CHECK(io::read_file(dir / "r2" / "results.csv") == results);
  fs::remove_all(dir);
}

TEST_CASE("a single-item suite has zero spread") {
  const fs::path dir = scratch_dir("single");
  io::write_file(dir / "suite.json", suite_json(1, R"(["occlusion"])"));
  REQUIRE(call({"evaluate", "--config", (dir / "suite.json").string(), "--out", (dir / "r").string()}).code == 0);
  const std::string agg = io::read_file(dir / "r" / "aggregate.csv");
  CHECK(agg.find("occlusion,iou,1,") != std::string::npos);
  std::istringstream lines(agg);
  std::string line;
  std::getline(lines, line);
  while (std::getline(lines, line)) CHECK(line.substr(line.rfind(',') + 1) == "0");
  fs::remove_all(dir);
}

TEST_CASE("failing items are recorded and the suite continues") {
  const fs::path dir = scratch_dir("failures");
  const scenes::Scene s = scenes::make_scene(16, 2);
  io::write_netpbm(dir / "a.ppm", s.image);
  io::write_pbm(dir / "a.pbm", s.square);
  io::write_file(dir / "suite.json", R"({"methods": ["rise", "occlusion"], "sensitivity": false,
    "rise": {"num_masks": 20},
    "items": [
      {"name": "dead", "input": "a.ppm", "region": "a.pbm",
       "blackbox": {"kind": "constant", "probabilities": [0.0, 1.0]}},
      {"name": "live", "input": "a.ppm", "region": "a.pbm",
       "blackbox": {"kind": "region-mean", "regions": ["a.pbm"]}}]})");
  const Result r = call({"evaluate", "--config", (dir / "suite.json").string(), "--out", (dir / "r").string()});
  CHECK(r.code == 2);
  const std::string failures = io::read_file(dir / "r" / "failures.csv");
  CHECK(failures.find("dead,rise,") != std::string::npos);
  const std::string results = io::read_file(dir / "r" / "results.csv");
  CHECK(results.find("live,rise,iou") != std::string::npos);
  CHECK(results.find("dead,occlusion,iou") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("train-blackbox writes a checkpoint that explain can load") {
  const fs::path dir = scratch_dir("train");
  const fs::path ckpt = dir / "toy.daxnet";
  const Result r = call({"train-blackbox", "--out", ckpt.string(), "--epochs", "2", "--samples", "60"});
  REQUIRE(r.code == 0);
  CHECK(fs::exists(ckpt));
  const json rec = json::parse(io::read_file(ckpt.string() + ".accuracy.json"));
  CHECK(rec["train_loss_curve"].size() == 2);

  const bb::ToyDataset data = bb::make_toy_dataset({});
  io::write_netpbm(dir / "toy.pgm", data.images[0]);
  io::write_file(dir / "config.json", json({{"input", "toy.pgm"},
                                            {"method", "occlusion"},
                                            {"out", "bundle"},
                                            {"blackbox", {{"kind", "checkpoint"}, {"checkpoint", "toy.daxnet"}}}})
                                          .dump());
  const Result e = call({"explain", "--config", (dir / "config.json").string()});
  CHECK(e.code == 0);
  const json m = json::parse(io::read_file(dir / "bundle" / "manifest.json"));
  CHECK(m["inputs"]["checkpoint"]["fnv1a"] == io::hex64(io::fnv1a(io::read_file(ckpt))));

  CHECK(call({"train-blackbox", "--out", (dir / "x.daxnet").string(), "--epochs", "1", "--samples", "40",
              "--accuracy-floor", "1.01"})
            .code == 2);
  fs::remove_all(dir);
}

TEST_CASE("toy black-boxes are cached under the cache directory") {
  const fs::path dir = scratch_dir("cache");
  ::setenv(cli::kCacheEnv, (dir / "cache").c_str(), 1);
  const bb::ToyDataset data = bb::make_toy_dataset({});
  io::write_netpbm(dir / "toy.pgm", data.images[1]);
  io::write_file(dir / "config.json",
                 json({{"input", "toy.pgm"},
                       {"method", "occlusion"},
                       {"out", "bundle"},
                       {"blackbox", {{"kind", "toy"}, {"toy", {{"num_samples", 40}, {"epochs", 1}}}}}})
                     .dump());
  REQUIRE(call({"explain", "--config", (dir / "config.json").string()}).code == 0);
  int cached = 0;
  for (const auto& e : fs::directory_iterator(dir / "cache")) cached += e.path().extension() == ".daxnet";
  CHECK(cached == 1);
  const std::string first = io::read_file(dir / "bundle" / "mask.dxt");
  REQUIRE(call({"explain", "--config", (dir / "config.json").string()}).code == 0);
  CHECK(io::read_file(dir / "bundle" / "mask.dxt") == first);
  ::unsetenv(cli::kCacheEnv);
  fs::remove_all(dir);
}
