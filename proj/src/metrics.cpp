#include "dax/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "dax/errors.hpp"

namespace dax::metrics {

Threshold mean_plus_std(const Grid& m) {
  Threshold t;
  if (m.size() == 0) return t;
  const double n = static_cast<double>(m.size());
  for (double v : m.data()) t.mean += v;
  t.mean /= n;
  double var = 0.0;
  for (double v : m.data()) var += (v - t.mean) * (v - t.mean);
  t.stddev = std::sqrt(var / n);
  return t;
}

BinaryMask binarize(const Grid& m) {
  const double thr = mean_plus_std(m).value();
  BinaryMask out(m.height(), m.width());
  for (std::size_t i = 0; i < m.size(); ++i) out.set(i, m[i] > thr);
  return out;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw ConfigError("IoU of differently shaped masks");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    uni += (a[i] || b[i]) ? 1 : 0;
  }
  if (uni == 0) throw DegenerateInputError("IoU undefined: both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

DeletionCurve deletion_auc(const Grid& saliency, const Image& x, const bb::Classifier& bb, int target, int steps,
                           perturb::FillPolicy fill) {
  if (steps < 2) throw ConfigError("deletion curve needs at least 2 steps");
  if (saliency.height() != x.height() || saliency.width() != x.width()) {
    throw ConfigError("saliency map does not match input");
  }
  const std::size_t n = saliency.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return saliency[a] > saliency[b]; });

  // Every pixel is its own segment so the fill policies stay meaningful.
  const int nc = x.channels();
  std::vector<double> fill_color(static_cast<std::size_t>(nc), 0.0);
  if (fill != perturb::FillPolicy::kZero) {
    // Per-pixel segment means equal the pixel itself, so kSegmentMean would be
    // a no-op; both non-zero policies use the global channel mean instead.
    for (std::size_t p = 0; p < n; ++p) {
      for (int k = 0; k < nc; ++k) fill_color[k] += x.data()[p * nc + k];
    }
    for (double& v : fill_color) v /= static_cast<double>(n);
  }

  DeletionCurve curve;
  Image work = x;
  std::size_t removed = 0;
  for (int s = 0; s < steps; ++s) {
    const double f = static_cast<double>(s) / static_cast<double>(steps - 1);
    const auto target_removed = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    for (; removed < target_removed; ++removed) {
      const std::size_t p = order[removed];
      for (int k = 0; k < nc; ++k) work.data()[p * nc + k] = fill_color[k];
    }
    curve.fractions.push_back(f);
    curve.scores.push_back(bb.score(work, target));
  }
  for (std::size_t i = 1; i < curve.fractions.size(); ++i) {
    curve.auc += 0.5 * (curve.scores[i] + curve.scores[i - 1]) * (curve.fractions[i] - curve.fractions[i - 1]);
  }
  return curve;
}

namespace {

double iou_or_zero(const BinaryMask& a, const BinaryMask& b) {
  try {
    return iou(a, b);
  } catch (const DegenerateInputError&) {
    return 0.0;
  }
}

}  // namespace

SensitivityResult sensitivity_eval(const Explainer& explainer, const Image& x, int correct_target, int wrong_target,
                                   const BinaryMask& ground_truth) {
  if (correct_target == wrong_target) throw ConfigError("sensitivity needs two different targets");
  SensitivityResult r;
  r.iou_correct = iou_or_zero(binarize(explainer(x, correct_target)), ground_truth);
  r.iou_wrong = iou_or_zero(binarize(explainer(x, wrong_target)), ground_truth);
  return r;
}

Summary summarize(const std::vector<double>& values) {
  if (values.empty()) throw DegenerateInputError("cannot summarize an empty list");
  Summary s;
  s.count = values.size();
  const double n = static_cast<double>(values.size());
  for (double v : values) s.mean += v;
  s.mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.stddev = std::sqrt(var / n);
  return s;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows) {
  if (rows.empty()) throw DegenerateInputError("cannot aggregate an empty suite");
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const ResultRow& r : rows) {
    auto key = std::make_pair(r.method, r.metric);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) keys.push_back(key);
    it->second.push_back(r.value);
  }
  std::vector<AggregateRow> out;
  for (const auto& key : keys) out.push_back({key.first, key.second, summarize(groups[key])});
  return out;
}

std::string aggregate_csv(const std::vector<AggregateRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "method,metric,count,mean,std\n";
  for (const AggregateRow& r : rows) {
    os << r.method << ',' << r.metric << ',' << r.summary.count << ',' << r.summary.mean << ',' << r.summary.stddev
       << '\n';
  }
  return os.str();
}

std::string aggregate_table(const std::vector<AggregateRow>& rows) {
  std::size_t wm = 6, wk = 6;
  for (const AggregateRow& r : rows) {
    wm = std::max(wm, r.method.size());
    wk = std::max(wk, r.metric.size());
  }
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(wm) + 2) << "method" << std::setw(static_cast<int>(wk) + 2) << "metric"
     << std::right << std::setw(6) << "n" << std::setw(12) << "mean" << std::setw(12) << "std" << '\n';
  os << std::fixed << std::setprecision(4);
  for (const AggregateRow& r : rows) {
    os << std::left << std::setw(static_cast<int>(wm) + 2) << r.method << std::setw(static_cast<int>(wk) + 2)
       << r.metric << std::right << std::setw(6) << r.summary.count << std::setw(12) << r.summary.mean << std::setw(12)
       << r.summary.stddev << '\n';
  }
  return os.str();
}

}  // namespace dax::metrics
