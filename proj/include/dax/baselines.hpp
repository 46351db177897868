#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dax/blackbox.hpp"
#include "dax/image.hpp"
#include "dax/perturb.hpp"
#include "dax/segmentation.hpp"

namespace dax::baselines {

struct SaliencyMap {
  Grid map;  // unnormalized importance
  std::string method;
  int target = 0;
};

// ---------------------------------------------------------------------------
// RISE

struct RiseConfig {
  int num_masks = 500;
  int grid_size = 4;             // coarse cells per side before upsampling
  double keep_probability = 0.5;  // chance a coarse cell is kept
  std::uint64_t seed = 0;
};

void validate(const RiseConfig& cfg);

// Random smooth masks in [0, 1]: a coarse binary grid, bilinearly upsampled
// to (grid + 1) cells and cropped at a random sub-cell offset.
std::vector<Grid> rise_masks(int height, int width, const RiseConfig& cfg);

// sum_i s_i (m_i ⊙ x) / sum_i s_i, reduced over channels by the mean.
// Throws DegenerateInputError when the scores sum to zero.
Grid rise_aggregate(const Image& x, const std::vector<Grid>& masks, const std::vector<double>& scores);

// Queries the black-box on every m_i ⊙ x and aggregates.
SaliencyMap rise_explain(const Image& x, const bb::Classifier& bb, int target, const std::vector<Grid>& masks);
SaliencyMap rise_explain(const Image& x, const bb::Classifier& bb, int target, const RiseConfig& cfg);

// ---------------------------------------------------------------------------
// LIME

struct LimeConfig {
  int num_samples = 512;
  double mask_probability = 0.5;
  double ridge = 1e-3;
  double kernel_width = 0.25;
  perturb::FillPolicy fill = perturb::FillPolicy::kZero;
  std::uint64_t seed = 0;
};

void validate(const LimeConfig& cfg);

// Cosine distance between the presence vector of a sample (1 = segment kept)
// and the all-kept vector. A row with every segment masked has distance 1.
double lime_distance(const std::vector<std::uint8_t>& masked_row);

struct LimeFit {
  std::vector<double> weights;  // per segment, negated coefficients of the masked indicator
  double intercept = 0.0;
  double condition = 0.0;       // of the regularized normal matrix
};

// Weighted ridge on the design [1 | masked indicators]; the intercept is not
// penalized. Throws DegenerateInputError, with the condition estimate, when the
// normal matrix is numerically singular.
LimeFit lime_fit(const std::vector<std::vector<std::uint8_t>>& rows, const std::vector<double>& targets,
                 const std::vector<double>& sample_weights, double ridge);

struct LimeResult {
  LimeFit fit;
  SaliencyMap saliency;  // each pixel painted with its segment's weight
};

// Row 0 of the design is the unperturbed input.
LimeResult lime_explain(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                        const LimeConfig& cfg);

// Same, with caller-provided design rows.
LimeResult lime_explain(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                        const std::vector<std::vector<std::uint8_t>>& rows, const LimeConfig& cfg);

// ---------------------------------------------------------------------------
// Occlusion

struct OcclusionConfig {
  int window = 4;
  int stride = 2;
  // kZero, kGlobalMean, or kSegmentMean (the occluded window's own mean).
  perturb::FillPolicy fill = perturb::FillPolicy::kZero;
};

void validate(const OcclusionConfig& cfg, int height, int width);

// Window offsets along one axis: 0, stride, 2 * stride, ... plus a final
// offset flush with the far edge when the steps fall short of it.
std::vector<int> window_offsets(int extent, int window, int stride);

// map[p] = mean over windows covering p of (score(x) - score(x occluded)).
SaliencyMap occlusion_explain(const Image& x, const bb::Classifier& bb, int target, const OcclusionConfig& cfg);

}  // namespace dax::baselines
