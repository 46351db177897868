#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dax/baselines.hpp"
#include "dax/blackbox.hpp"
#include "dax/distill.hpp"
#include "dax/perturb.hpp"
#include "dax/segmentation.hpp"

// One explanation run from input to saliency: segmentation, sampling, the
// chosen method, extraction.
namespace dax::pipeline {

enum class Method { kDaxV1, kDaxV2, kRise, kLime, kOcclusion };

std::string to_string(Method m);
// Accepts "dax-v1", "dax-v2", "rise", "lime", "occlusion".
Method parse_method(const std::string& name);
bool uses_segments(Method m);

struct MethodConfig {
  Method method = Method::kDaxV2;
  seg::QuickShiftConfig segmentation;
  perturb::SamplerConfig sampler;
  distill::DaxConfig dax;
  baselines::RiseConfig rise;
  baselines::LimeConfig lime;
  baselines::OcclusionConfig occlusion;
};

// Seeds handed to each stage, all derived from the run seed.
struct StageSeeds {
  std::uint64_t run = 0;
  std::uint64_t sampler = 0;
  std::uint64_t dax = 0;
  std::uint64_t rise = 0;
  std::uint64_t lime = 0;
};

StageSeeds stage_seeds(std::uint64_t seed);

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct RunOutput {
  Grid saliency;       // continuous map; the DAX mask for DAX methods
  BinaryMask binary;   // saliency > mean + std
  std::optional<seg::SegmentMap> segments;
  std::optional<distill::Explanation> dax;  // DAX methods only
  std::vector<double> lime_weights;         // LIME only
  StageSeeds seeds;
  std::vector<StageTime> timings;
};

// Wraps whatever a stage throws with the stage name in front.
RunOutput explain(const Image& x, const bb::Classifier& bb, int target, const MethodConfig& cfg,
                  std::uint64_t seed);

}  // namespace dax::pipeline
