#include "dax/baselines.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "dax/errors.hpp"
#include "dax/rng.hpp"

namespace dax::baselines {

namespace {

constexpr double kMaxCondition = 1e12;

double channel_mean_at(const Image& x, std::size_t p) {
  const int nc = x.channels();
  double s = 0.0;
  for (int k = 0; k < nc; ++k) s += x.data()[p * nc + k];
  return s / nc;
}

}  // namespace

void validate(const RiseConfig& cfg) {
  if (cfg.num_masks < 1) throw ConfigError("RISE needs at least one mask");
  if (cfg.grid_size < 1) throw ConfigError("RISE grid size must be positive");
  if (!(cfg.keep_probability > 0.0 && cfg.keep_probability < 1.0)) {
    throw ConfigError("RISE keep probability must lie in (0, 1)");
  }
}

std::vector<Grid> rise_masks(int height, int width, const RiseConfig& cfg) {
  validate(cfg);
  const int g = cfg.grid_size;
  const int cell_h = (height + g - 1) / g;
  const int cell_w = (width + g - 1) / g;
  Rng rng(cfg.seed);
  std::vector<Grid> masks;
  masks.reserve(static_cast<std::size_t>(cfg.num_masks));
  std::vector<double> coarse(static_cast<std::size_t>(g) * g);
  for (int i = 0; i < cfg.num_masks; ++i) {
    for (double& c : coarse) c = rng.bernoulli(cfg.keep_probability) ? 1.0 : 0.0;
    const int dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell_h)));
    const int dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(cell_w)));
    Grid m(height, width);
    for (int r = 0; r < height; ++r) {
      const double fy = std::clamp((r + dy + 0.5) / cell_h - 0.5, 0.0, static_cast<double>(g - 1));
      const int y0 = std::min(static_cast<int>(fy), g - 1);
      const int y1 = std::min(y0 + 1, g - 1);
      const double ty = fy - y0;
      for (int c = 0; c < width; ++c) {
        const double fx = std::clamp((c + dx + 0.5) / cell_w - 0.5, 0.0, static_cast<double>(g - 1));
        const int x0 = std::min(static_cast<int>(fx), g - 1);
        const int x1 = std::min(x0 + 1, g - 1);
        const double tx = fx - x0;
        const double top = (1 - tx) * coarse[y0 * g + x0] + tx * coarse[y0 * g + x1];
        const double bottom = (1 - tx) * coarse[y1 * g + x0] + tx * coarse[y1 * g + x1];
        m.at(r, c) = (1 - ty) * top + ty * bottom;
      }
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

Grid rise_aggregate(const Image& x, const std::vector<Grid>& masks, const std::vector<double>& scores) {
  if (masks.empty()) throw ConfigError("RISE needs at least one mask");
  if (masks.size() != scores.size()) throw ConfigError("RISE got a different number of masks and scores");
  double total = 0.0;
  for (double s : scores) total += s;
  if (total == 0.0) throw DegenerateInputError("RISE scores sum to zero");

  const std::size_t n = x.shape().pixels();
  std::vector<double> channel_mean(n);
  for (std::size_t p = 0; p < n; ++p) channel_mean[p] = channel_mean_at(x, p);

  Grid out(x.height(), x.width());
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const Grid& m = masks[i];
    if (m.height() != x.height() || m.width() != x.width()) throw ConfigError("RISE mask does not match input");
    for (std::size_t p = 0; p < n; ++p) out[p] += scores[i] * m[p] * channel_mean[p];
  }
  for (std::size_t p = 0; p < n; ++p) out[p] /= total;
  return out;
}

SaliencyMap rise_explain(const Image& x, const bb::Classifier& bb, int target, const std::vector<Grid>& masks) {
  std::vector<double> scores;
  scores.reserve(masks.size());
  for (const Grid& m : masks) scores.push_back(bb.score(multiply(x, m), target));
  return {rise_aggregate(x, masks, scores), "rise", target};
}

SaliencyMap rise_explain(const Image& x, const bb::Classifier& bb, int target, const RiseConfig& cfg) {
  return rise_explain(x, bb, target, rise_masks(x.height(), x.width(), cfg));
}

// ---------------------------------------------------------------------------

void validate(const LimeConfig& cfg) {
  if (cfg.num_samples < 2) throw ConfigError("LIME needs Q >= 2");
  if (!(cfg.mask_probability > 0.0 && cfg.mask_probability < 1.0)) {
    throw ConfigError("LIME mask probability must lie in (0, 1)");
  }
  if (!(cfg.ridge >= 0.0)) throw ConfigError("LIME ridge must be non-negative");
  if (!(cfg.kernel_width > 0.0)) throw ConfigError("LIME kernel width must be positive");
}

double lime_distance(const std::vector<std::uint8_t>& masked_row) {
  if (masked_row.empty()) throw ConfigError("empty LIME row");
  std::size_t kept = 0;
  for (std::uint8_t v : masked_row) kept += v ? 0 : 1;
  if (kept == 0) return 1.0;
  // <z, 1> / (|z| |1|) with z binary.
  const double cosine = static_cast<double>(kept) / std::sqrt(static_cast<double>(kept) * masked_row.size());
  return std::max(0.0, 1.0 - cosine);
}

LimeFit lime_fit(const std::vector<std::vector<std::uint8_t>>& rows, const std::vector<double>& targets,
                 const std::vector<double>& sample_weights, double ridge) {
  if (rows.empty()) throw ConfigError("LIME fit without samples");
  if (rows.size() != targets.size() || rows.size() != sample_weights.size()) {
    throw ConfigError("LIME rows, targets and weights differ in length");
  }
  const auto q = static_cast<Eigen::Index>(rows.size());
  const auto s = static_cast<Eigen::Index>(rows.front().size());
  Eigen::MatrixXd a(q, s + 1);
  Eigen::VectorXd y(q), w(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != s) throw ConfigError("LIME rows differ in length");
    a(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < s; ++j) a(i, j + 1) = row[static_cast<std::size_t>(j)] ? 1.0 : 0.0;
    y(i) = targets[static_cast<std::size_t>(i)];
    w(i) = sample_weights[static_cast<std::size_t>(i)];
  }
  Eigen::MatrixXd normal = a.transpose() * w.asDiagonal() * a;
  for (Eigen::Index j = 1; j <= s; ++j) normal(j, j) += ridge;
  const Eigen::VectorXd rhs = a.transpose() * (w.asDiagonal() * y);

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(normal);
  const auto& sv = svd.singularValues();
  const double smallest = sv(sv.size() - 1);
  const double condition = smallest > 0.0 ? sv(0) / smallest : INFINITY;
  if (!(condition < kMaxCondition)) {
    std::ostringstream msg;
    msg << "LIME normal matrix is singular (condition " << condition << "); increase the ridge strength";
    throw DegenerateInputError(msg.str());
  }
  const Eigen::VectorXd beta = normal.ldlt().solve(rhs);

  LimeFit fit;
  fit.intercept = beta(0);
  fit.condition = condition;
  fit.weights.resize(static_cast<std::size_t>(s));
  for (Eigen::Index j = 0; j < s; ++j) fit.weights[static_cast<std::size_t>(j)] = -beta(j + 1);
  return fit;
}

LimeResult lime_explain(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                        const std::vector<std::vector<std::uint8_t>>& rows, const LimeConfig& cfg) {
  validate(cfg);
  if (seg.count() < 2) throw ConfigError("LIME needs at least two segments");
  std::vector<double> targets, weights;
  targets.reserve(rows.size());
  weights.reserve(rows.size());
  for (const auto& row : rows) {
    targets.push_back(bb.score(perturb::apply_segment_mask(x, seg, row, cfg.fill), target));
    const double d = lime_distance(row);
    weights.push_back(std::exp(-d * d / (cfg.kernel_width * cfg.kernel_width)));
  }
  LimeResult out;
  out.fit = lime_fit(rows, targets, weights, cfg.ridge);
  out.saliency.method = "lime";
  out.saliency.target = target;
  out.saliency.map = Grid(x.height(), x.width());
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    out.saliency.map[p] = out.fit.weights[static_cast<std::size_t>(seg[p] - 1)];
  }
  return out;
}

LimeResult lime_explain(const Image& x, const seg::SegmentMap& seg, const bb::Classifier& bb, int target,
                        const LimeConfig& cfg) {
  validate(cfg);
  const auto s = static_cast<std::size_t>(seg.count());
  Rng rng(cfg.seed);
  std::vector<std::vector<std::uint8_t>> rows;
  rows.reserve(static_cast<std::size_t>(cfg.num_samples));
  rows.emplace_back(s, 0);
  for (int i = 1; i < cfg.num_samples; ++i) {
    std::vector<std::uint8_t> row(s);
    for (auto& v : row) v = rng.bernoulli(cfg.mask_probability) ? 1 : 0;
    rows.push_back(std::move(row));
  }
  return lime_explain(x, seg, bb, target, rows, cfg);
}

// ---------------------------------------------------------------------------

void validate(const OcclusionConfig& cfg, int height, int width) {
  if (cfg.window < 1 || cfg.stride < 1) throw ConfigError("occlusion window and stride must be positive");
  if (cfg.window > std::min(height, width)) {
    throw ConfigError("occlusion window " + std::to_string(cfg.window) + " exceeds the input side");
  }
}

std::vector<int> window_offsets(int extent, int window, int stride) {
  std::vector<int> offsets;
  for (int o = 0; o + window <= extent; o += stride) offsets.push_back(o);
  if (offsets.empty() || offsets.back() + window < extent) offsets.push_back(extent - window);
  return offsets;
}

SaliencyMap occlusion_explain(const Image& x, const bb::Classifier& bb, int target, const OcclusionConfig& cfg) {
  validate(cfg, x.height(), x.width());
  const int nc = x.channels();
  const double base = bb.score(x, target);

  std::vector<double> global(nc, 0.0);
  for (std::size_t p = 0; p < x.shape().pixels(); ++p) {
    for (int k = 0; k < nc; ++k) global[k] += x.data()[p * nc + k];
  }
  for (double& g : global) g /= static_cast<double>(x.shape().pixels());

  Grid sum(x.height(), x.width());
  Grid hits(x.height(), x.width());
  std::vector<double> fill(nc);
  for (int r0 : window_offsets(x.height(), cfg.window, cfg.stride)) {
    for (int c0 : window_offsets(x.width(), cfg.window, cfg.stride)) {
      if (cfg.fill == perturb::FillPolicy::kGlobalMean) {
        fill = global;
      } else if (cfg.fill == perturb::FillPolicy::kSegmentMean) {
        std::fill(fill.begin(), fill.end(), 0.0);
        for (int r = r0; r < r0 + cfg.window; ++r) {
          for (int c = c0; c < c0 + cfg.window; ++c) {
            for (int k = 0; k < nc; ++k) fill[k] += x.at(r, c, k);
          }
        }
        for (double& f : fill) f /= static_cast<double>(cfg.window) * cfg.window;
      } else {
        std::fill(fill.begin(), fill.end(), 0.0);
      }
      Image occluded = x;
      for (int r = r0; r < r0 + cfg.window; ++r) {
        for (int c = c0; c < c0 + cfg.window; ++c) {
          for (int k = 0; k < nc; ++k) occluded.at(r, c, k) = fill[k];
        }
      }
      const double drop = base - bb.score(occluded, target);
      for (int r = r0; r < r0 + cfg.window; ++r) {
        for (int c = c0; c < c0 + cfg.window; ++c) {
          sum.at(r, c) += drop;
          hits.at(r, c) += 1.0;
        }
      }
    }
  }
  for (std::size_t p = 0; p < sum.size(); ++p) sum[p] = hits[p] > 0 ? sum[p] / hits[p] : 0.0;
  return {sum, "occlusion", target};
}

}  // namespace dax::baselines
