#include "cli.hpp"

#include <CLI11.hpp>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "dax/errors.hpp"
#include "dax/io.hpp"
#include "dax/nn/checkpoint.hpp"
#include "dax/rng.hpp"
#include "dax/scenes.hpp"

namespace fs = std::filesystem;

namespace dax::cli {

namespace {

// ---- json helpers ----------------------------------------------------------

using Handler = std::function<void(const json&)>;

void read_keys(const json& j, const std::string& section, const std::map<std::string, Handler>& handlers) {
  if (!j.is_object()) throw ConfigError("'" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto h = handlers.find(it.key());
    if (h == handlers.end()) throw ConfigError("unknown key '" + it.key() + "' in '" + section + "'");
    try {
      h->second(it.value());
    } catch (const json::exception& e) {
      throw ConfigError("bad value for '" + section + "." + it.key() + "': " + e.what());
    }
  }
}

std::string fill_name(perturb::FillPolicy f) {
  switch (f) {
    case perturb::FillPolicy::kZero: return "zero";
    case perturb::FillPolicy::kSegmentMean: return "segment-mean";
    case perturb::FillPolicy::kGlobalMean: return "global-mean";
  }
  return "zero";
}

perturb::FillPolicy parse_fill(const std::string& s) {
  if (s == "zero") return perturb::FillPolicy::kZero;
  if (s == "segment-mean") return perturb::FillPolicy::kSegmentMean;
  if (s == "global-mean") return perturb::FillPolicy::kGlobalMean;
  throw ConfigError("unknown fill '" + s + "' (expected zero, segment-mean or global-mean)");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

json read_json_file(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("config not found: " + path.string());
  try {
    return json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::string file_hash(const fs::path& p) { return io::hex64(io::fnv1a(io::read_file(p))); }

BinaryMask mask_from_image(const Image& img, const std::string& name) {
  if (img.channels() != 1) throw ConfigError(name + ": region must be a bitmap or graymap");
  BinaryMask m(img.height(), img.width());
  for (std::size_t p = 0; p < img.data().size(); ++p) m.set(p, img.data()[p] > 0.5);
  return m;
}

// ---- method sections -------------------------------------------------------

void read_segmentation(const json& j, seg::QuickShiftConfig& c) {
  read_keys(j, "segmentation",
            {{"kernel_size", [&](const json& v) { c.kernel_size = v.get<double>(); }},
             {"max_dist", [&](const json& v) { c.max_dist = v.get<double>(); }},
             {"ratio", [&](const json& v) { c.ratio = v.get<double>(); }}});
}

void read_sampler(const json& j, perturb::SamplerConfig& c) {
  read_keys(j, "sampler",
            {{"num_samples", [&](const json& v) { c.num_samples = v.get<int>(); }},
             {"mask_probability", [&](const json& v) { c.mask_probability = v.get<double>(); }},
             {"fill", [&](const json& v) { c.fill = parse_fill(v.get<std::string>()); }},
             {"validation_fraction", [&](const json& v) { c.validation_fraction = v.get<double>(); }}});
}

void read_dax(const json& j, distill::DaxConfig& c) {
  read_keys(j, "dax",
            {{"lambda1", [&](const json& v) { c.lambda_sparsity = v.get<double>(); }},
             {"lambda2", [&](const json& v) { c.lambda_kl = v.get<double>(); }},
             {"lambda3", [&](const json& v) { c.lambda_counterfactual = v.get<double>(); }},
             {"epochs", [&](const json& v) { c.epochs = v.get<int>(); }},
             {"batch_size", [&](const json& v) { c.batch_size = v.get<int>(); }},
             {"kl_bins", [&](const json& v) { c.kl_bins = v.get<int>(); }},
             {"patience", [&](const json& v) { c.patience = v.get<int>(); }},
             {"select_best_val", [&](const json& v) { c.select_best_val = v.get<bool>(); }},
             {"optimizer",
              [&](const json& v) {
                const auto s = v.get<std::string>();
                if (s == "adam") {
                  c.optimizer.kind = nn::OptimizerKind::kAdam;
                } else if (s == "sgd") {
                  c.optimizer.kind = nn::OptimizerKind::kSgd;
                } else {
                  throw ConfigError("unknown optimizer '" + s + "'");
                }
              }},
             {"learning_rate", [&](const json& v) { c.optimizer.learning_rate = v.get<double>(); }}});
}

void read_rise(const json& j, baselines::RiseConfig& c) {
  read_keys(j, "rise",
            {{"num_masks", [&](const json& v) { c.num_masks = v.get<int>(); }},
             {"grid_size", [&](const json& v) { c.grid_size = v.get<int>(); }},
             {"keep_probability", [&](const json& v) { c.keep_probability = v.get<double>(); }}});
}

void read_lime(const json& j, baselines::LimeConfig& c) {
  read_keys(j, "lime",
            {{"num_samples", [&](const json& v) { c.num_samples = v.get<int>(); }},
             {"mask_probability", [&](const json& v) { c.mask_probability = v.get<double>(); }},
             {"ridge", [&](const json& v) { c.ridge = v.get<double>(); }},
             {"kernel_width", [&](const json& v) { c.kernel_width = v.get<double>(); }},
             {"fill", [&](const json& v) { c.fill = parse_fill(v.get<std::string>()); }}});
}

void read_occlusion(const json& j, baselines::OcclusionConfig& c) {
  read_keys(j, "occlusion",
            {{"window", [&](const json& v) { c.window = v.get<int>(); }},
             {"stride", [&](const json& v) { c.stride = v.get<int>(); }},
             {"fill", [&](const json& v) { c.fill = parse_fill(v.get<std::string>()); }}});
}

const std::vector<std::string> kMethodSections = {"segmentation", "sampler", "dax", "rise", "lime", "occlusion"};

void read_method_section(const std::string& key, const json& v, pipeline::MethodConfig& cfg) {
  if (key == "segmentation") read_segmentation(v, cfg.segmentation);
  if (key == "sampler") read_sampler(v, cfg.sampler);
  if (key == "dax") read_dax(v, cfg.dax);
  if (key == "rise") read_rise(v, cfg.rise);
  if (key == "lime") read_lime(v, cfg.lime);
  if (key == "occlusion") read_occlusion(v, cfg.occlusion);
}

void validate_method(const pipeline::MethodConfig& cfg) {
  seg::validate(cfg.segmentation);
  perturb::validate(cfg.sampler);
  distill::validate(cfg.dax);
  baselines::validate(cfg.rise);
  baselines::validate(cfg.lime);
  if (cfg.occlusion.window < 1 || cfg.occlusion.stride < 1) {
    throw ConfigError("occlusion window and stride must be positive");
  }
}

// ---- bundle helpers --------------------------------------------------------

std::string training_log_csv(const distill::Explanation& e) {
  std::ostringstream s;
  s << "epoch,train_loss,val_loss\n" << std::setprecision(17);
  for (const auto& l : e.log) s << l.epoch << "," << l.train_loss << "," << l.val_loss << "\n";
  return s.str();
}

fs::path staging_path(const fs::path& out) {
  fs::path p = out;
  p += ".partial";
  return p;
}

void publish(const fs::path& staging, const fs::path& out) {
  if (fs::exists(out)) {
    if (!fs::exists(out / "manifest.json")) {
      throw IoError("output directory " + out.string() + " exists and does not hold a previous bundle");
    }
    fs::remove_all(out);
  }
  fs::rename(staging, out);
}

}  // namespace

// ---- config I/O ------------------------------------------------------------

void read_method_sections(const json& j, pipeline::MethodConfig& cfg) {
  for (const auto& key : kMethodSections) {
    if (j.contains(key)) read_method_section(key, j.at(key), cfg);
  }
}

json method_sections_json(const pipeline::MethodConfig& c) {
  json j;
  j["segmentation"] = {{"kernel_size", c.segmentation.kernel_size},
                       {"max_dist", c.segmentation.max_dist},
                       {"ratio", c.segmentation.ratio}};
  j["sampler"] = {{"num_samples", c.sampler.num_samples},
                  {"mask_probability", c.sampler.mask_probability},
                  {"fill", fill_name(c.sampler.fill)},
                  {"validation_fraction", c.sampler.validation_fraction}};
  j["dax"] = {{"lambda1", c.dax.lambda_sparsity},
              {"lambda2", c.dax.lambda_kl},
              {"lambda3", c.dax.lambda_counterfactual},
              {"epochs", c.dax.epochs},
              {"batch_size", c.dax.batch_size},
              {"kl_bins", c.dax.kl_bins},
              {"patience", c.dax.patience},
              {"select_best_val", c.dax.select_best_val},
              {"optimizer", c.dax.optimizer.kind == nn::OptimizerKind::kAdam ? "adam" : "sgd"},
              {"learning_rate", c.dax.optimizer.learning_rate}};
  j["rise"] = {{"num_masks", c.rise.num_masks},
               {"grid_size", c.rise.grid_size},
               {"keep_probability", c.rise.keep_probability}};
  j["lime"] = {{"num_samples", c.lime.num_samples},
               {"mask_probability", c.lime.mask_probability},
               {"ridge", c.lime.ridge},
               {"kernel_width", c.lime.kernel_width},
               {"fill", fill_name(c.lime.fill)}};
  j["occlusion"] = {
      {"window", c.occlusion.window}, {"stride", c.occlusion.stride}, {"fill", fill_name(c.occlusion.fill)}};
  return j;
}

BlackBoxConfig read_blackbox(const json& j, const fs::path& base) {
  BlackBoxConfig c;
  read_keys(j, "blackbox",
            {{"kind", [&](const json& v) { c.kind = v.get<std::string>(); }},
             {"regions",
              [&](const json& v) {
                for (const auto& r : v) c.regions.push_back(resolve(base, r.get<std::string>()));
              }},
             {"temperature", [&](const json& v) { c.temperature = v.get<double>(); }},
             {"pattern", [&](const json& v) { c.pattern = resolve(base, v.get<std::string>()); }},
             {"probabilities", [&](const json& v) { c.probabilities = v.get<std::vector<double>>(); }},
             {"checkpoint", [&](const json& v) { c.checkpoint = resolve(base, v.get<std::string>()); }},
             {"toy",
              [&](const json& v) {
                read_keys(v, "blackbox.toy",
                          {{"size", [&](const json& x) { c.toy.size = x.get<int>(); }},
                           {"num_samples", [&](const json& x) { c.toy.num_samples = x.get<int>(); }},
                           {"holdout_fraction", [&](const json& x) { c.toy.holdout_fraction = x.get<double>(); }},
                           {"noise", [&](const json& x) { c.toy.noise = x.get<double>(); }},
                           {"shape_radius", [&](const json& x) { c.toy.shape_radius = x.get<int>(); }},
                           {"data_seed", [&](const json& x) { c.toy.data_seed = x.get<std::uint64_t>(); }},
                           {"epochs", [&](const json& x) { c.toy_epochs = x.get<int>(); }},
                           {"seed", [&](const json& x) { c.toy_seed = x.get<std::uint64_t>(); }}});
              }}});
  static const std::vector<std::string> kinds = {"region-mean", "planted-shape", "constant", "checkpoint", "toy"};
  if (std::find(kinds.begin(), kinds.end(), c.kind) == kinds.end()) {
    throw ConfigError("unknown black-box kind '" + c.kind + "'");
  }
  return c;
}

json blackbox_json(const BlackBoxConfig& c) {
  json j = {{"kind", c.kind}};
  if (c.kind == "region-mean" || c.kind == "planted-shape") {
    json regions = json::array();
    for (const auto& r : c.regions) regions.push_back(r.string());
    j["regions"] = regions;
    j["temperature"] = c.temperature;
  }
  if (c.kind == "planted-shape") j["pattern"] = c.pattern.string();
  if (c.kind == "constant") j["probabilities"] = c.probabilities;
  if (c.kind == "checkpoint") j["checkpoint"] = c.checkpoint.string();
  if (c.kind == "toy") {
    j["toy"] = {{"size", c.toy.size},
                {"num_samples", c.toy.num_samples},
                {"holdout_fraction", c.toy.holdout_fraction},
                {"noise", c.toy.noise},
                {"shape_radius", c.toy.shape_radius},
                {"data_seed", c.toy.data_seed},
                {"epochs", c.toy_epochs},
                {"seed", c.toy_seed}};
  }
  return j;
}

RunConfig read_run_config(const json& j, const fs::path& base) {
  RunConfig c;
  std::map<std::string, Handler> handlers = {
      {"input", [&](const json& v) { c.input = resolve(base, v.get<std::string>()); }},
      {"target", [&](const json& v) { c.target = v.get<int>(); }},
      {"seed", [&](const json& v) { c.seed = v.get<std::uint64_t>(); }},
      {"out", [&](const json& v) { c.out = resolve(base, v.get<std::string>()); }},
      {"method", [&](const json& v) { c.method.method = pipeline::parse_method(v.get<std::string>()); }},
      {"blackbox", [&](const json& v) { c.blackbox = read_blackbox(v, base); }},
  };
  for (const auto& key : kMethodSections) {
    handlers[key] = [&c, key](const json& v) { read_method_section(key, v, c.method); };
  }
  read_keys(j, "config", handlers);
  return c;
}

json run_config_json(const RunConfig& c) {
  json j = method_sections_json(c.method);
  j["input"] = c.input.string();
  j["target"] = c.target;
  j["seed"] = c.seed;
  j["out"] = c.out.string();
  j["method"] = pipeline::to_string(c.method.method);
  j["blackbox"] = blackbox_json(c.blackbox);
  return j;
}

void check_paths(const RunConfig& c) {
  if (c.input.empty()) throw ConfigError("no input given");
  if (!fs::exists(c.input)) throw ConfigError("input not found: " + c.input.string());
  if (c.out.empty()) throw ConfigError("no output directory given");
  for (const auto& r : c.blackbox.regions) {
    if (!fs::exists(r)) throw ConfigError("region not found: " + r.string());
  }
  if (c.blackbox.kind == "planted-shape" && !fs::exists(c.blackbox.pattern)) {
    throw ConfigError("pattern not found: " + c.blackbox.pattern.string());
  }
  if (c.blackbox.kind == "checkpoint" && !fs::exists(c.blackbox.checkpoint)) {
    throw ConfigError("checkpoint not found: " + c.blackbox.checkpoint.string());
  }
}

// ---- black-box ---------------------------------------------------------------

fs::path cache_dir() {
  const char* env = std::getenv(kCacheEnv);
  return env && *env ? fs::path(env) : fs::path(".dax-cache");
}

LoadedBlackBox load_blackbox(const BlackBoxConfig& c, ImageShape shape) {
  std::vector<BinaryMask> regions;
  for (const auto& r : c.regions) {
    BinaryMask m = mask_from_image(io::read_netpbm(r), r.string());
    if (m.height() != shape.height || m.width() != shape.width) {
      throw ConfigError(r.string() + ": region size differs from the input");
    }
    regions.push_back(std::move(m));
  }
  if (c.kind == "region-mean" || c.kind == "planted-shape" || c.kind == "constant") {
    bb::OracleSpec spec;
    spec.kind = c.kind == "region-mean"     ? bb::OracleKind::kRegionMean
                : c.kind == "planted-shape" ? bb::OracleKind::kPlantedShape
                                            : bb::OracleKind::kConstant;
    spec.regions = regions;
    spec.temperature = c.temperature;
    if (c.kind == "planted-shape") spec.pattern = io::load_input(c.pattern);
    spec.constant = c.probabilities;
    return {bb::make_oracle(spec, shape), regions, std::nullopt};
  }
  fs::path ckpt = c.checkpoint;
  if (c.kind == "toy") {
    const std::string key = io::hex64(io::fnv1a(blackbox_json(c).dump()));
    ckpt = cache_dir() / ("toy-" + key + ".daxnet");
    if (!fs::exists(ckpt)) {
      const bb::TrainedClassifier trained = bb::train_toy_classifier(c.toy, c.toy_epochs, c.toy_seed);
      fs::create_directories(ckpt.parent_path());
      fs::path tmp = ckpt;
      tmp += ".tmp";
      nn::save_checkpoint(tmp, *trained.network);
      fs::rename(tmp, ckpt);
    }
  }
  auto net = std::make_shared<const nn::Network>(nn::load_checkpoint(ckpt));
  bb::Classifier classifier = bb::classifier_from_network(net, ckpt.filename().string());
  if (classifier.input_shape() != shape) {
    throw ConfigError("checkpoint expects " + classifier.input_shape().to_string() + ", input is " +
                      shape.to_string());
  }
  return {classifier, regions, ckpt};
}

// ---- explain -----------------------------------------------------------------

json cmd_explain(const RunConfig& cfg) {
  check_paths(cfg);
  validate_method(cfg.method);
  const Image x = io::load_input(cfg.input);
  const LoadedBlackBox bbox = load_blackbox(cfg.blackbox, x.shape());

  const pipeline::RunOutput run = pipeline::explain(x, bbox.classifier, cfg.target, cfg.method, cfg.seed);

  json manifest;
  manifest["tool"] = "dax";
  manifest["version"] = kToolVersion;
  manifest["command"] = "explain";
  manifest["config"] = run_config_json(cfg);
  json inputs = {{"input", {{"path", cfg.input.string()}, {"fnv1a", file_hash(cfg.input)}}}};
  json regions = json::array();
  for (const auto& r : cfg.blackbox.regions) regions.push_back({{"path", r.string()}, {"fnv1a", file_hash(r)}});
  inputs["regions"] = regions;
  if (bbox.checkpoint) inputs["checkpoint"] = {{"path", bbox.checkpoint->string()}, {"fnv1a", file_hash(*bbox.checkpoint)}};
  manifest["inputs"] = inputs;
  manifest["seeds"] = {{"run", run.seeds.run},
                       {"sampler", run.seeds.sampler},
                       {"dax", run.seeds.dax},
                       {"rise", run.seeds.rise},
                       {"lime", run.seeds.lime}};
  json timings = json::array();
  for (const auto& t : run.timings) timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}});
  manifest["timings"] = timings;
  const metrics::Threshold thr = metrics::mean_plus_std(run.saliency);
  json summary = {{"saliency_mean", thr.mean},
                  {"saliency_std", thr.stddev},
                  {"binary_pixels", run.binary.size() ? run.binary.count() : 0}};
  if (run.segments) summary["segments"] = run.segments->count();
  if (run.dax) summary["selected_epoch"] = run.dax->selected_epoch;
  if (!run.lime_weights.empty()) summary["lime_weights"] = run.lime_weights;
  manifest["summary"] = summary;

  const fs::path staging = staging_path(cfg.out);
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    std::map<std::string, std::string> files;
    files["mask.dxt"] = io::encode_dxt(Image(ImageShape{run.saliency.height(), run.saliency.width(), 1},
                                             std::vector<double>(run.saliency.data().begin(), run.saliency.data().end())));
    files["mask_binary.pbm"] = io::encode_pbm(run.binary);
    files["heatmap.ppm"] = io::encode_netpbm(io::heatmap_overlay(x, run.saliency));
    if (run.dax) files["training_log.csv"] = training_log_csv(*run.dax);
    json artifacts;
    for (const auto& [name, bytes] : files) {
      io::write_file(staging / name, bytes);
      artifacts[name] = io::hex64(io::fnv1a(bytes));
    }
    manifest["artifacts"] = artifacts;
    io::write_file(staging / "manifest.json", manifest.dump(2) + "\n");
    fs::create_directories(fs::absolute(cfg.out).parent_path());
    publish(staging, cfg.out);
  } catch (...) {
    fs::remove_all(staging);
    throw;
  }
  return manifest;
}

// ---- evaluate ------------------------------------------------------------------

SuiteConfig read_suite_config(const json& j, const fs::path& base) {
  SuiteConfig s;
  std::map<std::string, Handler> handlers = {
      {"methods",
       [&](const json& v) {
         for (const auto& m : v) s.methods.push_back(pipeline::to_string(pipeline::parse_method(m.get<std::string>())));
       }},
      {"seed", [&](const json& v) { s.seed = v.get<std::uint64_t>(); }},
      {"deletion_steps", [&](const json& v) { s.deletion_steps = v.get<int>(); }},
      {"sensitivity", [&](const json& v) { s.sensitivity = v.get<bool>(); }},
      {"scenes",
       [&](const json& v) {
         int count = 10, size = 24;
         std::uint64_t first = 100;
         double temperature = 0.25;
         read_keys(v, "scenes",
                   {{"count", [&](const json& x) { count = x.get<int>(); }},
                    {"size", [&](const json& x) { size = x.get<int>(); }},
                    {"first_seed", [&](const json& x) { first = x.get<std::uint64_t>(); }},
                    {"temperature", [&](const json& x) { temperature = x.get<double>(); }}});
         if (count < 1) throw ConfigError("scenes.count must be positive");
         for (int i = 0; i < count; ++i) {
           const scenes::Scene sc = scenes::make_scene(size, first + static_cast<std::uint64_t>(i));
           SuiteItem item{"scene-" + std::to_string(first + static_cast<std::uint64_t>(i)), sc.image, sc.square,
                          bb::make_oracle(scenes::square_oracle(sc, temperature), sc.image.shape()), 0,
                          bb::make_oracle(scenes::two_region_oracle(sc, temperature), sc.image.shape()), 1};
           s.items.push_back(std::move(item));
         }
       }},
      {"items",
       [&](const json& v) {
         for (const auto& it : v) {
           fs::path input, region;
           std::string name;
           int target = 0;
           std::optional<int> wrong;
           BlackBoxConfig bbc;
           read_keys(it, "items[]",
                     {{"name", [&](const json& x) { name = x.get<std::string>(); }},
                      {"input", [&](const json& x) { input = resolve(base, x.get<std::string>()); }},
                      {"region", [&](const json& x) { region = resolve(base, x.get<std::string>()); }},
                      {"target", [&](const json& x) { target = x.get<int>(); }},
                      {"wrong_target", [&](const json& x) { wrong = x.get<int>(); }},
                      {"blackbox", [&](const json& x) { bbc = read_blackbox(x, base); }}});
           if (!fs::exists(input)) throw ConfigError("suite input not found: " + input.string());
           if (!fs::exists(region)) throw ConfigError("suite region not found: " + region.string());
           const Image img = io::load_input(input);
           BinaryMask gt = mask_from_image(io::read_netpbm(region), region.string());
           const LoadedBlackBox lb = load_blackbox(bbc, img.shape());
           s.items.push_back({name.empty() ? input.stem().string() : name, img, std::move(gt), lb.classifier, target,
                              std::nullopt, wrong});
         }
       }},
  };
  for (const auto& key : kMethodSections) {
    handlers[key] = [&s, key](const json& v) { read_method_section(key, v, s.method); };
  }
  read_keys(j, "suite", handlers);
  if (s.methods.empty()) throw ConfigError("suite lists no methods");
  if (s.items.empty()) throw ConfigError("suite has no items");
  if (s.deletion_steps < 2) throw ConfigError("deletion_steps must be at least 2");
  validate_method(s.method);
  return s;
}

EvaluateReport cmd_evaluate(const SuiteConfig& suite, int jobs) {
  struct Slot {
    std::vector<metrics::ResultRow> rows;
    std::vector<Failure> failures;
  };
  const std::size_t n = suite.items.size();
  std::vector<Slot> slots(n);
  std::atomic<std::size_t> next{0};

  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      const SuiteItem& item = suite.items[i];
      const std::uint64_t seed = mix_seed(suite.seed, i);
      for (const std::string& name : suite.methods) {
        pipeline::MethodConfig mc = suite.method;
        mc.method = pipeline::parse_method(name);
        try {
          const pipeline::RunOutput run = pipeline::explain(item.input, item.classifier, item.target, mc, seed);
          double iou = 0.0;
          if (run.binary.count() > 0) iou = metrics::iou(run.binary, item.region);
          slots[i].rows.push_back({item.name, name, "iou", iou});
          const metrics::DeletionCurve del =
              metrics::deletion_auc(run.saliency, item.input, item.classifier, item.target, suite.deletion_steps);
          slots[i].rows.push_back({item.name, name, "deletion_auc", del.auc});
          if (suite.sensitivity && item.wrong_target) {
            const bb::Classifier& sc = item.sensitivity_classifier ? *item.sensitivity_classifier : item.classifier;
            const metrics::Explainer explainer = [&](const Image& img, int t) {
              return pipeline::explain(img, sc, t, mc, seed).saliency;
            };
            const metrics::SensitivityResult sr =
                metrics::sensitivity_eval(explainer, item.input, item.target, *item.wrong_target, item.region);
            slots[i].rows.push_back({item.name, name, "iou_correct_target", sr.iou_correct});
            slots[i].rows.push_back({item.name, name, "iou_wrong_target", sr.iou_wrong});
          }
        } catch (const std::exception& e) {
          slots[i].failures.push_back({item.name, name, e.what()});
        }
      }
    }
  };

  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  EvaluateReport report;
  for (Slot& s : slots) {
    report.rows.insert(report.rows.end(), s.rows.begin(), s.rows.end());
    report.failures.insert(report.failures.end(), s.failures.begin(), s.failures.end());
  }
  if (!report.rows.empty()) report.aggregate = metrics::aggregate(report.rows);
  return report;
}

std::string results_csv(const std::vector<metrics::ResultRow>& rows) {
  std::ostringstream s;
  s << "item,method,metric,value\n" << std::setprecision(17);
  for (const auto& r : rows) s << r.item << "," << r.method << "," << r.metric << "," << r.value << "\n";
  return s.str();
}

void write_report(const EvaluateReport& report, const fs::path& dir) {
  fs::create_directories(dir);
  io::write_file(dir / "results.csv", results_csv(report.rows));
  if (!report.aggregate.empty()) {
    io::write_file(dir / "aggregate.csv", metrics::aggregate_csv(report.aggregate));
    io::write_file(dir / "report.txt", metrics::aggregate_table(report.aggregate));
  }
  std::ostringstream f;
  f << "item,method,error\n";
  for (const auto& x : report.failures) f << x.item << "," << x.method << ",\"" << x.error << "\"\n";
  io::write_file(dir / "failures.csv", f.str());
}

// ---- command line ----------------------------------------------------------------

namespace {

struct Overrides {
  std::optional<std::string> input, out, method;
  std::optional<int> target;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda1, lambda2, lambda3, learning_rate, lime_ridge;
  std::optional<int> epochs, batch_size, samples, rise_masks, lime_samples, occlusion_window, occlusion_stride;
};

void add_method_flags(CLI::App* app, Overrides& o) {
  app->add_option("--method", o.method, "dax-v1, dax-v2, rise, lime or occlusion");
  app->add_option("--seed", o.seed, "run seed");
  app->add_option("--lambda1", o.lambda1, "DAX L1 sparsity weight (V1)");
  app->add_option("--lambda2", o.lambda2, "DAX histogram KL weight (V1)");
  app->add_option("--lambda3", o.lambda3, "DAX counterfactual weight (V2)");
  app->add_option("--epochs", o.epochs, "DAX training epochs");
  app->add_option("--batch-size", o.batch_size, "DAX minibatch size");
  app->add_option("--learning-rate", o.learning_rate, "DAX optimizer step size");
  app->add_option("--samples", o.samples, "DAX neighbourhood samples (Q)");
  app->add_option("--rise-masks", o.rise_masks, "RISE mask count");
  app->add_option("--lime-samples", o.lime_samples, "LIME sample count");
  app->add_option("--lime-ridge", o.lime_ridge, "LIME ridge strength");
  app->add_option("--occlusion-window", o.occlusion_window, "occlusion window side");
  app->add_option("--occlusion-stride", o.occlusion_stride, "occlusion stride");
}

void apply_method_overrides(const Overrides& o, pipeline::MethodConfig& m) {
  if (o.method) m.method = pipeline::parse_method(*o.method);
  if (o.lambda1) m.dax.lambda_sparsity = *o.lambda1;
  if (o.lambda2) m.dax.lambda_kl = *o.lambda2;
  if (o.lambda3) m.dax.lambda_counterfactual = *o.lambda3;
  if (o.epochs) m.dax.epochs = *o.epochs;
  if (o.batch_size) m.dax.batch_size = *o.batch_size;
  if (o.learning_rate) m.dax.optimizer.learning_rate = *o.learning_rate;
  if (o.samples) m.sampler.num_samples = *o.samples;
  if (o.rise_masks) m.rise.num_masks = *o.rise_masks;
  if (o.lime_samples) m.lime.num_samples = *o.lime_samples;
  if (o.lime_ridge) m.lime.ridge = *o.lime_ridge;
  if (o.occlusion_window) m.occlusion.window = *o.occlusion_window;
  if (o.occlusion_stride) m.occlusion.stride = *o.occlusion_stride;
}

RunConfig build_run_config(const std::string& config_path, const Overrides& o) {
  RunConfig cfg;
  if (!config_path.empty()) {
    const fs::path p = fs::absolute(config_path);
    cfg = read_run_config(read_json_file(p), p.parent_path());
  }
  const fs::path cwd = fs::current_path();
  if (o.input) cfg.input = resolve(cwd, *o.input);
  if (o.out) cfg.out = resolve(cwd, *o.out);
  if (o.target) cfg.target = *o.target;
  if (o.seed) cfg.seed = *o.seed;
  apply_method_overrides(o, cfg.method);
  return cfg;
}

void print_manifest_summary(const json& manifest, const fs::path& out, std::ostream& os) {
  os << "wrote " << out.string() << "\n";
  for (const auto& [name, hash] : manifest["artifacts"].items()) os << "  " << name << "  " << hash.get<std::string>() << "\n";
  os << "  manifest.json\n";
}

int demo(const fs::path& out, std::uint64_t seed, std::ostream& os) {
  fs::create_directories(out);
  const scenes::Scene sc = scenes::make_scene(24, 3);
  io::write_netpbm(out / "scene.ppm", sc.image);
  io::write_pbm(out / "region.pbm", sc.square);
  json cfg = {{"input", "scene.ppm"},
              {"target", 0},
              {"seed", seed},
              {"method", "dax-v2"},
              {"out", "bundle"},
              {"blackbox", {{"kind", "region-mean"}, {"regions", {"region.pbm"}}, {"temperature", 0.25}}},
              {"sampler", {{"num_samples", 256}}}};
  io::write_file(out / "config.json", cfg.dump(2) + "\n");
  const RunConfig rc = read_run_config(cfg, fs::absolute(out));
  const json manifest = cmd_explain(rc);
  print_manifest_summary(manifest, rc.out, os);
  const BinaryMask binary =
      mask_from_image(io::read_netpbm(rc.out / "mask_binary.pbm"), "mask_binary.pbm");
  os << "IoU with the planted region: " << metrics::iou(binary, sc.square) << "\n";
  return kOk;
}

}  // namespace

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Gradient-free saliency explanations by distillation, with RISE, LIME and occlusion baselines"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  std::string explain_config;
  Overrides eo;
  CLI::App* explain = app.add_subcommand("explain", "explain one input and write an artifact bundle");
  explain->add_option("--config", explain_config, "run config (JSON)");
  explain->add_option("--input", eo.input, "input image (.ppm/.pgm/.pbm or .dxt)");
  explain->add_option("--target", eo.target, "class to explain");
  explain->add_option("--out", eo.out, "bundle directory");
  add_method_flags(explain, eo);

  std::string suite_config, report_dir;
  int jobs = 1;
  Overrides vo;
  CLI::App* evaluate = app.add_subcommand("evaluate", "run a benchmark suite and write a metrics report");
  evaluate->add_option("--config", suite_config, "suite config (JSON)")->required();
  evaluate->add_option("--out", report_dir, "report directory")->required();
  evaluate->add_option("--jobs", jobs, "items evaluated concurrently")->check(CLI::PositiveNumber);
  add_method_flags(evaluate, vo);

  std::string ckpt_out;
  bb::ToyTaskSpec toy;
  int toy_epochs = 20;
  std::uint64_t toy_seed = 0;
  double floor = 0.0;
  CLI::App* train = app.add_subcommand("train-blackbox", "train the toy square-vs-disc classifier");
  train->add_option("--out", ckpt_out, "checkpoint path")->required();
  train->add_option("--epochs", toy_epochs, "training epochs");
  train->add_option("--seed", toy_seed, "initialization and shuffling seed");
  train->add_option("--size", toy.size, "image side");
  train->add_option("--samples", toy.num_samples, "dataset size");
  train->add_option("--noise", toy.noise, "background noise amplitude");
  train->add_option("--data-seed", toy.data_seed, "dataset seed");
  train->add_option("--accuracy-floor", floor, "fail when holdout accuracy ends below this");

  std::string demo_out = "dax-demo";
  std::uint64_t demo_seed = 0;
  CLI::App* demo_cmd = app.add_subcommand("demo", "explain a bundled synthetic scene with its oracle");
  demo_cmd->add_option("--out", demo_out, "working directory for the demo");
  demo_cmd->add_option("--seed", demo_seed, "run seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*explain) {
      const RunConfig cfg = build_run_config(explain_config, eo);
      const json manifest = cmd_explain(cfg);
      print_manifest_summary(manifest, cfg.out, out);
    } else if (*evaluate) {
      const fs::path p = fs::absolute(suite_config);
      SuiteConfig suite = read_suite_config(read_json_file(p), p.parent_path());
      apply_method_overrides(vo, suite.method);
      if (vo.seed) suite.seed = *vo.seed;
      const EvaluateReport report = cmd_evaluate(suite, jobs);
      write_report(report, report_dir);
      if (!report.aggregate.empty()) out << metrics::aggregate_table(report.aggregate);
      for (const auto& f : report.failures) err << "failed: " << f.item << " / " << f.method << ": " << f.error << "\n";
      if (!report.failures.empty()) return kRuntime;
    } else if (*train) {
      const bb::TrainedClassifier t = bb::train_toy_classifier(toy, toy_epochs, toy_seed, floor);
      nn::save_checkpoint(ckpt_out, *t.network);
      const json record = {{"train_accuracy", t.train_accuracy},
                           {"holdout_accuracy", t.holdout_accuracy},
                           {"train_loss_curve", t.train_loss_curve},
                           {"holdout_accuracy_curve", t.holdout_accuracy_curve},
                           {"checkpoint_fnv1a", file_hash(ckpt_out)}};
      io::write_file(ckpt_out + ".accuracy.json", record.dump(2) + "\n");
      out << "holdout accuracy " << t.holdout_accuracy << ", checkpoint " << ckpt_out << "\n";
    } else if (*demo_cmd) {
      return demo(demo_out, demo_seed, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}

}  // namespace dax::cli
