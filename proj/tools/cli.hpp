#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dax/blackbox.hpp"
#include "dax/metrics.hpp"
#include "dax/pipeline.hpp"

namespace dax::cli {

using nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kCacheEnv = "DAX_CACHE_DIR";

enum ExitCode { kOk = 0, kUsage = 1, kRuntime = 2 };

// Black-box as written in a config file. Paths are absolute once loaded.
struct BlackBoxConfig {
  std::string kind = "region-mean";  // region-mean | planted-shape | constant | checkpoint | toy
  std::vector<std::filesystem::path> regions;
  double temperature = 0.25;
  std::filesystem::path pattern;
  std::vector<double> probabilities;
  std::filesystem::path checkpoint;
  bb::ToyTaskSpec toy;
  int toy_epochs = 20;
  std::uint64_t toy_seed = 0;
};

struct RunConfig {
  std::filesystem::path input;
  int target = 0;
  std::uint64_t seed = 0;
  std::filesystem::path out;
  BlackBoxConfig blackbox;
  pipeline::MethodConfig method;
};

// Section readers shared by explain and evaluate. Unknown keys are rejected.
void read_method_sections(const json& j, pipeline::MethodConfig& cfg);
json method_sections_json(const pipeline::MethodConfig& cfg);
BlackBoxConfig read_blackbox(const json& j, const std::filesystem::path& base);
json blackbox_json(const BlackBoxConfig& cfg);

RunConfig read_run_config(const json& j, const std::filesystem::path& base);
json run_config_json(const RunConfig& cfg);

// Checks referenced files exist; throws ConfigError naming the first missing one.
void check_paths(const RunConfig& cfg);

struct LoadedBlackBox {
  bb::Classifier classifier;
  std::vector<BinaryMask> regions;
  std::optional<std::filesystem::path> checkpoint;  // resolved file, if any
};

// Toy classifiers are trained once and cached under $DAX_CACHE_DIR (default
// ./.dax-cache).
LoadedBlackBox load_blackbox(const BlackBoxConfig& cfg, ImageShape input_shape);
std::filesystem::path cache_dir();

// Writes mask.dxt, mask_binary.pbm, heatmap.ppm, manifest.json and, for DAX
// methods, training_log.csv into cfg.out. The bundle is assembled in a
// sibling directory and moved into place only after every stage succeeded.
json cmd_explain(const RunConfig& cfg);

struct SuiteItem {
  std::string name;
  Image input;
  BinaryMask region;
  bb::Classifier classifier;
  int target = 0;
  std::optional<bb::Classifier> sensitivity_classifier;  // defaults to `classifier`
  std::optional<int> wrong_target;
};

struct SuiteConfig {
  std::vector<std::string> methods;
  std::uint64_t seed = 0;
  int deletion_steps = 20;
  bool sensitivity = true;
  pipeline::MethodConfig method;
  std::vector<SuiteItem> items;
};

SuiteConfig read_suite_config(const json& j, const std::filesystem::path& base);

struct Failure {
  std::string item;
  std::string method;
  std::string error;
};

struct EvaluateReport {
  std::vector<metrics::ResultRow> rows;
  std::vector<metrics::AggregateRow> aggregate;
  std::vector<Failure> failures;
};

// Items run concurrently on up to `jobs` threads; results are ordered by item
// then method regardless of scheduling.
EvaluateReport cmd_evaluate(const SuiteConfig& suite, int jobs);
std::string results_csv(const std::vector<metrics::ResultRow>& rows);
void write_report(const EvaluateReport& report, const std::filesystem::path& dir);

// Entry point: parses argv and returns the process exit code.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace dax::cli
