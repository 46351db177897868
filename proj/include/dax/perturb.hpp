#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dax/blackbox.hpp"
#include "dax/image.hpp"
#include "dax/segmentation.hpp"

namespace dax::perturb {

enum class FillPolicy { kZero, kSegmentMean, kGlobalMean };

struct SamplerConfig {
  int num_samples = 512;            // Q
  double mask_probability = 0.5;    // per-segment chance of being masked off
  FillPolicy fill = FillPolicy::kZero;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
};

void validate(const SamplerConfig& cfg);

// Replaces every segment j with segment_mask[j] == 1 by the fill value and
// leaves the rest of x untouched.
Image apply_segment_mask(const Image& x, const seg::SegmentMap& seg, std::span<const std::uint8_t> segment_mask,
                         FillPolicy fill);

// Distance floor for the closeness weights: the unperturbed sample has
// distance 0 and is clamped to this value.
inline constexpr double kGammaEpsilon = 1e-6;

// raw_i = 1 / max(||x - x_i||_2, epsilon), rescaled so the mean is 1.
std::vector<double> gamma_weights(std::span<const double> distances, double epsilon = kGammaEpsilon);
std::vector<double> gamma_weights(const Image& x, std::span<const Image> samples, double epsilon = kGammaEpsilon);

// Smallest positive distance in the list (kGammaEpsilon if there is none).
double adaptive_epsilon(std::span<const double> distances);

double l2_distance(const Image& a, const Image& b);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
};

// Deterministic disjoint split of {0..n-1}; round(n * fraction) indices go to
// validation. Indices listed in `keep_in_train` are never chosen for it.
Split split(std::size_t n, double fraction, std::uint64_t seed, std::span<const std::size_t> keep_in_train = {});

enum class SplitTag { kTrain, kVal };

struct Sample {
  std::vector<std::uint8_t> segment_mask;  // [I_i]_j = 1 <=> segment j masked off
  double score = 0.0;                      // black-box target score
  double gamma = 1.0;
  SplitTag split = SplitTag::kTrain;
};

// Q labeled neighbourhood samples of one input. Perturbed tensors are
// rebuilt on demand from the segment masks rather than stored.
class PerturbationBatch {
 public:
  PerturbationBatch(Image input, seg::SegmentMap segments, int target, FillPolicy fill, std::vector<Sample> samples,
                    std::size_t anchor);

  const Image& input() const { return input_; }
  const seg::SegmentMap& segments() const { return segments_; }
  int target() const { return target_; }
  FillPolicy fill() const { return fill_; }
  std::size_t size() const { return samples_.size(); }
  std::size_t anchor() const { return anchor_; }

  const Sample& sample(std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const { return samples_; }
  Image perturbed(std::size_t i) const;

  std::vector<std::size_t> indices(SplitTag tag) const;

 private:
  Image input_;
  seg::SegmentMap segments_;
  int target_ = 0;
  FillPolicy fill_ = FillPolicy::kZero;
  std::vector<Sample> samples_;
  std::size_t anchor_ = 0;
};

// Draws Q samples (sample 0 is the unperturbed input, always in the train
// split; the rest mask each segment independently), labels them through
// the black-box, and attaches closeness weights and the split.
PerturbationBatch sample(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                         const SamplerConfig& cfg);

// Same as sample() but with caller-provided segment masks (one per sample,
// length S each); the first all-zero mask is taken as the anchor.
PerturbationBatch label_masks(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                              std::vector<std::vector<std::uint8_t>> masks, const SamplerConfig& cfg);

}  // namespace dax::perturb
