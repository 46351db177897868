#include "dax/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dax/errors.hpp"
#include "dax/rng.hpp"

namespace dax::perturb {

void validate(const SamplerConfig& cfg) {
  if (cfg.num_samples < 2) throw ConfigError("sampler needs Q >= 2");
  if (!(cfg.mask_probability > 0.0 && cfg.mask_probability < 1.0)) {
    throw ConfigError("mask probability must lie in (0, 1)");
  }
  if (!(cfg.validation_fraction > 0.0 && cfg.validation_fraction <= 0.5)) {
    throw ConfigError("validation fraction must lie in (0, 0.5]");
  }
}

Image apply_segment_mask(const Image& x, const seg::SegmentMap& seg, std::span<const std::uint8_t> segment_mask,
                         FillPolicy fill) {
  if (seg.height() != x.height() || seg.width() != x.width()) throw ConfigError("segment map does not match input");
  if (static_cast<int>(segment_mask.size()) != seg.count()) {
    throw ConfigError("segment mask has " + std::to_string(segment_mask.size()) + " entries for " +
                      std::to_string(seg.count()) + " segments");
  }
  const int nc = x.channels();
  const std::size_t n = x.shape().pixels();
  const auto src = x.data();

  // Fill colors per segment (or one global color).
  std::vector<double> fill_color(static_cast<std::size_t>(seg.count()) * nc, 0.0);
  if (fill == FillPolicy::kSegmentMean) {
    for (std::size_t p = 0; p < n; ++p) {
      const auto s = static_cast<std::size_t>(seg[p] - 1);
      for (int k = 0; k < nc; ++k) fill_color[s * nc + k] += src[p * nc + k];
    }
    for (int s = 0; s < seg.count(); ++s) {
      for (int k = 0; k < nc; ++k) fill_color[static_cast<std::size_t>(s) * nc + k] /= seg.sizes()[s];
    }
  } else if (fill == FillPolicy::kGlobalMean) {
    std::vector<double> mean(nc, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      for (int k = 0; k < nc; ++k) mean[k] += src[p * nc + k];
    }
    for (int s = 0; s < seg.count(); ++s) {
      for (int k = 0; k < nc; ++k) fill_color[static_cast<std::size_t>(s) * nc + k] = mean[k] / static_cast<double>(n);
    }
  }

  Image out = x;
  auto dst = out.data();
  for (std::size_t p = 0; p < n; ++p) {
    const auto s = static_cast<std::size_t>(seg[p] - 1);
    if (!segment_mask[s]) continue;
    for (int k = 0; k < nc; ++k) dst[p * nc + k] = fill_color[s * nc + k];
  }
  return out;
}

double l2_distance(const Image& a, const Image& b) {
  if (a.shape() != b.shape()) throw ConfigError("distance between differently shaped images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

std::vector<double> gamma_weights(std::span<const double> distances, double epsilon) {
  if (distances.empty()) throw ConfigError("gamma weights need at least one sample");
  std::vector<double> w(distances.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    w[i] = 1.0 / std::max(distances[i], epsilon);
    sum += w[i];
  }
  const double scale = static_cast<double>(w.size()) / sum;
  for (double& v : w) v *= scale;
  return w;
}

double adaptive_epsilon(std::span<const double> distances) {
  double floor = INFINITY;
  for (double d : distances) {
    if (d > 0.0) floor = std::min(floor, d);
  }
  return std::isfinite(floor) ? floor : kGammaEpsilon;
}

std::vector<double> gamma_weights(const Image& x, std::span<const Image> samples, double epsilon) {
  std::vector<double> d;
  d.reserve(samples.size());
  for (const Image& s : samples) d.push_back(l2_distance(x, s));
  return gamma_weights(d, epsilon);
}

Split split(std::size_t n, double fraction, std::uint64_t seed, std::span<const std::size_t> keep_in_train) {
  if (!(fraction > 0.0 && fraction <= 0.5)) throw ConfigError("validation fraction must lie in (0, 0.5]");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::find(keep_in_train.begin(), keep_in_train.end(), i) == keep_in_train.end()) candidates.push_back(i);
  }
  const auto n_val = std::min(candidates.size(),
                              static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(candidates));
  std::vector<std::uint8_t> is_val(n, 0);
  for (std::size_t k = 0; k < n_val; ++k) is_val[candidates[k]] = 1;
  Split out;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? out.val : out.train).push_back(i);
  return out;
}

PerturbationBatch::PerturbationBatch(Image input, seg::SegmentMap segments, int target, FillPolicy fill,
                                     std::vector<Sample> samples, std::size_t anchor)
    : input_(std::move(input)),
      segments_(std::move(segments)),
      target_(target),
      fill_(fill),
      samples_(std::move(samples)),
      anchor_(anchor) {
  if (samples_.empty()) throw ConfigError("perturbation batch is empty");
  if (anchor_ >= samples_.size()) throw ConfigError("anchor index out of range");
  for (const Sample& s : samples_) {
    if (static_cast<int>(s.segment_mask.size()) != segments_.count()) {
      throw ConfigError("sample segment mask length does not match segment count");
    }
  }
}

Image PerturbationBatch::perturbed(std::size_t i) const {
  return apply_segment_mask(input_, segments_, samples_.at(i).segment_mask, fill_);
}

std::vector<std::size_t> PerturbationBatch::indices(SplitTag tag) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    if (samples_[i].split == tag) out.push_back(i);
  }
  return out;
}

PerturbationBatch label_masks(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                              std::vector<std::vector<std::uint8_t>> masks, const SamplerConfig& cfg) {
  if (target < 0 || target >= bb.num_classes()) throw ConfigError("target class out of range");
  if (seg.count() < 2) throw ConfigError("perturbation needs at least 2 segments");
  if (masks.size() < 2) throw ConfigError("perturbation needs at least 2 samples");
  const auto anchor_it = std::find_if(masks.begin(), masks.end(), [](const auto& m) {
    return std::all_of(m.begin(), m.end(), [](std::uint8_t v) { return v == 0; });
  });
  if (anchor_it == masks.end()) throw ConfigError("perturbation masks must include the unperturbed sample");
  const auto anchor = static_cast<std::size_t>(anchor_it - masks.begin());

  std::vector<Sample> samples(masks.size());
  std::vector<double> distances(masks.size());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const Image xi = apply_segment_mask(x, seg, masks[i], cfg.fill);
    try {
      samples[i].score = bb.score(xi, target);
    } catch (const QueryError& e) {
      throw QueryError("perturbation sample " + std::to_string(i) + ": " + e.what());
    }
    distances[i] = l2_distance(x, xi);
    samples[i].segment_mask = std::move(masks[i]);
  }
  const std::vector<double> gamma = gamma_weights(distances, adaptive_epsilon(distances));
  const std::size_t keep[1] = {anchor};
  const Split parts = split(samples.size(), cfg.validation_fraction, mix_seed(cfg.seed, 2), keep);
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i].gamma = gamma[i];
  for (std::size_t i : parts.val) samples[i].split = SplitTag::kVal;
  return PerturbationBatch(x, seg, target, cfg.fill, std::move(samples), anchor);
}

PerturbationBatch sample(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                         const SamplerConfig& cfg) {
  validate(cfg);
  Rng rng(mix_seed(cfg.seed, 1));
  const auto s = static_cast<std::size_t>(seg.count());
  std::vector<std::vector<std::uint8_t>> masks;
  masks.emplace_back(s, 0);
  for (int i = 1; i < cfg.num_samples; ++i) {
    std::vector<std::uint8_t> m(s);
    for (auto& v : m) v = rng.bernoulli(cfg.mask_probability) ? 1 : 0;
    masks.push_back(std::move(m));
  }
  return label_masks(x, seg, bb, target, std::move(masks), cfg);
}

}  // namespace dax::perturb
