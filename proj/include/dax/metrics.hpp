#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dax/blackbox.hpp"
#include "dax/image.hpp"
#include "dax/perturb.hpp"

namespace dax::metrics {

struct Threshold {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double value() const { return mean + stddev; }
};

Threshold mean_plus_std(const Grid& m);

// True exactly where m > mean(m) + std(m).
BinaryMask binarize(const Grid& m);

// |a & b| / |a | b|. Throws DegenerateInputError when both masks are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

struct DeletionCurve {
  std::vector<double> fractions;  // 0 = nothing removed ... 1 = everything removed
  std::vector<double> scores;
  double auc = 0.0;
};

// Pixels are removed (all channels replaced by the fill) in order of
// descending saliency, ties by raster index. `steps` evenly spaced fractions
// from 0 to 1 are evaluated; AUC is the trapezoid rule over them.
DeletionCurve deletion_auc(const Grid& saliency, const Image& x, const bb::Classifier& bb, int target, int steps,
                           perturb::FillPolicy fill = perturb::FillPolicy::kZero);

// Maps (input, target) to a continuous saliency map.
using Explainer = std::function<Grid(const Image&, int)>;

struct SensitivityResult {
  double iou_correct = 0.0;  // explanation for the correct class vs the region
  double iou_wrong = 0.0;    // explanation for the wrong class vs the same region
};

// An empty binarized explanation scores IoU 0 against a non-empty region.
SensitivityResult sensitivity_eval(const Explainer& explainer, const Image& x, int correct_target, int wrong_target,
                                   const BinaryMask& ground_truth);

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

Summary summarize(const std::vector<double>& values);

struct ResultRow {
  std::string item;
  std::string method;
  std::string metric;
  double value = 0.0;
};

struct AggregateRow {
  std::string method;
  std::string metric;
  Summary summary;
};

// Groups rows by (method, metric). Throws DegenerateInputError on an empty
// suite. Output order follows first appearance.
std::vector<AggregateRow> aggregate(const std::vector<ResultRow>& rows);

std::string aggregate_csv(const std::vector<AggregateRow>& rows);
std::string aggregate_table(const std::vector<AggregateRow>& rows);

}  // namespace dax::metrics
