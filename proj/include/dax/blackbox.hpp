#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dax/image.hpp"
#include "dax/nn/network.hpp"

namespace dax::bb {

using Probabilities = std::vector<double>;

// Query-only view of a trained classifier: an input goes in, a probability
// vector comes out. Nothing else is reachable through the handle, so
// explainers built on it cannot see weights or gradients.
//
// Handles are immutable and cheap to copy; the wrapped function must be pure
// and safe to call from several threads.
class Classifier {
 public:
  using QueryFn = std::function<Probabilities(const Image&)>;

  Classifier(ImageShape input_shape, int num_classes, QueryFn fn, std::string description = {});

  // Checks the input shape and that the answer is a probability vector
  // (length C, entries in [0, 1], sum within 1e-9 of 1).
  Probabilities query(const Image& x) const;
  // Order-preserving; a failure names the offending batch index.
  std::vector<Probabilities> query_batch(std::span<const Image> xs) const;
  double score(const Image& x, int target) const { return query(x)[static_cast<std::size_t>(target)]; }

  int num_classes() const { return num_classes_; }
  const ImageShape& input_shape() const { return input_shape_; }
  const std::string& description() const { return description_; }

 private:
  ImageShape input_shape_;
  int num_classes_ = 0;
  std::shared_ptr<const QueryFn> fn_;
  std::string description_;
};

inline constexpr double kSimplexTolerance = 1e-9;

// Numerically stable softmax of logits / temperature.
Probabilities softmax(std::span<const double> logits, double temperature = 1.0);

enum class OracleKind { kRegionMean, kPlantedShape, kConstant };

// Analytic black-boxes with a known salient region.
//
// kRegionMean, one region R: logits (mean(x over R), 1 - mean(x over R)).
// kRegionMean, K >= 2 regions: class k logit is the mean of x over region k.
// kPlantedShape: logits (s, 1 - s) with s = 1 - mean |x - pattern| over R,
//   i.e. how intact the planted pattern is.
// kConstant: always returns `constant`.
// Means run over all channels of the region's pixels.
struct OracleSpec {
  OracleKind kind = OracleKind::kRegionMean;
  std::vector<BinaryMask> regions;
  double temperature = 1.0;
  Image pattern;                  // kPlantedShape only
  Probabilities constant;         // kConstant only
};

Classifier make_oracle(const OracleSpec& spec, ImageShape input_shape);

// Wraps a frozen network whose last layer emits C logits; softmax is applied
// by the handle.
Classifier classifier_from_network(std::shared_ptr<const nn::Network> net, std::string description = {});

// Synthetic two-class task: a planted square (class 0) or disc (class 1) at a
// random position over uniform noise, single channel.
struct ToyTaskSpec {
  int size = 16;
  int num_samples = 500;
  double holdout_fraction = 0.2;
  double noise = 0.3;
  int shape_radius = 5;
  std::uint64_t data_seed = 7;
};

struct ToyDataset {
  std::vector<Image> images;
  std::vector<int> labels;
};

ToyDataset make_toy_dataset(const ToyTaskSpec& spec);

struct TrainedClassifier {
  Classifier handle;
  std::shared_ptr<const nn::Network> network;
  double train_accuracy = 0.0;
  double holdout_accuracy = 0.0;
  std::vector<double> train_loss_curve;     // per epoch
  std::vector<double> holdout_accuracy_curve;
};

// conv 5x5 (1->8) -> sigmoid -> FC 2.
std::vector<nn::LayerSpec> toy_classifier_layers();

// Trains a small conv net with cross-entropy. Throws TrainingError (carrying
// the curves in its message) if holdout accuracy ends below
// `accuracy_floor`.
TrainedClassifier train_toy_classifier(const ToyTaskSpec& spec, int epochs, std::uint64_t seed,
                                       double accuracy_floor = 0.0);

}  // namespace dax::bb
