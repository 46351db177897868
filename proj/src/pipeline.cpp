#include "dax/pipeline.hpp"

#include <chrono>

#include "dax/errors.hpp"
#include "dax/metrics.hpp"
#include "dax/rng.hpp"

namespace dax::pipeline {

namespace {

template <typename Fn>
auto run_stage(const char* stage, std::vector<StageTime>& timings, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    timings.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  const std::string prefix = std::string(stage) + ": ";
  try {
    auto out = fn();
    finish();
    return out;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const QueryError& e) {
    throw QueryError(prefix + e.what());
  } catch (const NumericError& e) {
    throw NumericError(prefix + e.what());
  } catch (const DegenerateInputError& e) {
    throw DegenerateInputError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::kDaxV1: return "dax-v1";
    case Method::kDaxV2: return "dax-v2";
    case Method::kRise: return "rise";
    case Method::kLime: return "lime";
    case Method::kOcclusion: return "occlusion";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kDaxV1, Method::kDaxV2, Method::kRise, Method::kLime, Method::kOcclusion}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown method '" + name + "' (expected dax-v1, dax-v2, rise, lime or occlusion)");
}

bool uses_segments(Method m) { return m == Method::kDaxV1 || m == Method::kDaxV2 || m == Method::kLime; }

StageSeeds stage_seeds(std::uint64_t seed) {
  return {seed, mix_seed(seed, 100), mix_seed(seed, 101), mix_seed(seed, 102), mix_seed(seed, 103)};
}

RunOutput explain(const Image& x, const bb::Classifier& bb, int target, const MethodConfig& cfg,
                  std::uint64_t seed) {
  RunOutput out;
  out.seeds = stage_seeds(seed);
  if (target < 0 || target >= bb.num_classes()) {
    throw ConfigError("target " + std::to_string(target) + " outside 0.." + std::to_string(bb.num_classes() - 1));
  }

  if (uses_segments(cfg.method)) {
    out.segments = run_stage("segmentation", out.timings, [&] { return seg::quick_shift(x, cfg.segmentation); });
  }

  switch (cfg.method) {
    case Method::kDaxV1:
    case Method::kDaxV2: {
      perturb::SamplerConfig sc = cfg.sampler;
      sc.seed = out.seeds.sampler;
      const perturb::PerturbationBatch batch =
          run_stage("sampling", out.timings, [&] { return perturb::sample(x, *out.segments, bb, target, sc); });
      distill::DaxConfig dc = cfg.dax;
      dc.variant = cfg.method == Method::kDaxV1 ? distill::Variant::kV1 : distill::Variant::kV2;
      distill::TrainResult trained =
          run_stage("training", out.timings, [&] { return distill::train(batch, dc, out.seeds.dax); });
      out.saliency = trained.explanation.mask;
      out.dax = std::move(trained.explanation);
      break;
    }
    case Method::kRise: {
      baselines::RiseConfig rc = cfg.rise;
      rc.seed = out.seeds.rise;
      out.saliency = run_stage("rise", out.timings, [&] { return baselines::rise_explain(x, bb, target, rc).map; });
      break;
    }
    case Method::kLime: {
      baselines::LimeConfig lc = cfg.lime;
      lc.seed = out.seeds.lime;
      baselines::LimeResult r =
          run_stage("lime", out.timings, [&] { return baselines::lime_explain(x, *out.segments, bb, target, lc); });
      out.saliency = std::move(r.saliency.map);
      out.lime_weights = std::move(r.fit.weights);
      break;
    }
    case Method::kOcclusion:
      out.saliency = run_stage("occlusion", out.timings,
                               [&] { return baselines::occlusion_explain(x, bb, target, cfg.occlusion).map; });
      break;
  }
  out.binary = metrics::binarize(out.saliency);
  return out;
}

}  // namespace dax::pipeline
