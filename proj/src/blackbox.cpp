#include "dax/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dax/batch.hpp"
#include "dax/errors.hpp"
#include "dax/nn/optimizer.hpp"
#include "dax/rng.hpp"

namespace dax::bb {

Classifier::Classifier(ImageShape input_shape, int num_classes, QueryFn fn, std::string description)
    : input_shape_(input_shape),
      num_classes_(num_classes),
      fn_(std::make_shared<const QueryFn>(std::move(fn))),
      description_(std::move(description)) {
  if (num_classes_ < 2) throw ConfigError("a classifier needs at least 2 classes");
  if (input_shape_.size() == 0) throw ConfigError("classifier input shape must be non-empty");
  if (!*fn_) throw ConfigError("classifier query function is empty");
}

Probabilities Classifier::query(const Image& x) const {
  if (x.shape() != input_shape_) {
    throw QueryError("query input " + x.shape().to_string() + " does not match " + input_shape_.to_string());
  }
  Probabilities p = (*fn_)(x);
  if (static_cast<int>(p.size()) != num_classes_) {
    throw QueryError("black-box returned " + std::to_string(p.size()) + " scores, expected " +
                     std::to_string(num_classes_));
  }
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) throw QueryError("black-box score outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) throw QueryError("black-box scores do not sum to 1");
  return p;
}

std::vector<Probabilities> Classifier::query_batch(std::span<const Image> xs) const {
  std::vector<Probabilities> out;
  out.reserve(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    try {
      out.push_back(query(xs[i]));
    } catch (const QueryError& e) {
      throw QueryError("batch index " + std::to_string(i) + ": " + e.what());
    }
  }
  return out;
}

Probabilities softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be > 0");
  const double hi = *std::max_element(logits.begin(), logits.end());
  Probabilities p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - hi) / temperature);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

namespace {

double region_mean(const Image& x, const BinaryMask& region) {
  double s = 0.0;
  std::size_t n = 0;
  const int nc = x.channels();
  for (int r = 0; r < x.height(); ++r) {
    for (int c = 0; c < x.width(); ++c) {
      if (!region.at(r, c)) continue;
      for (int k = 0; k < nc; ++k) s += x.at(r, c, k);
      n += static_cast<std::size_t>(nc);
    }
  }
  return s / static_cast<double>(n);
}

double pattern_similarity(const Image& x, const Image& pattern, const BinaryMask& region) {
  double s = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < x.height(); ++r) {
    for (int c = 0; c < x.width(); ++c) {
      if (!region.at(r, c)) continue;
      for (int k = 0; k < x.channels(); ++k) s += std::abs(x.at(r, c, k) - pattern.at(r, c, k));
      n += static_cast<std::size_t>(x.channels());
    }
  }
  return 1.0 - s / static_cast<double>(n);
}

}  // namespace

Classifier make_oracle(const OracleSpec& spec, ImageShape shape) {
  if (!(spec.temperature > 0.0)) throw ConfigError("oracle temperature must be > 0");
  for (const BinaryMask& r : spec.regions) {
    if (r.height() != shape.height || r.width() != shape.width) {
      throw ConfigError("oracle region does not match input " + shape.to_string());
    }
  }
  switch (spec.kind) {
    case OracleKind::kConstant: {
      Probabilities p = spec.constant;
      const int c = static_cast<int>(p.size());
      double sum = 0.0;
      for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("constant oracle entries must lie in [0, 1]");
        sum += v;
      }
      if (std::abs(sum - 1.0) > kSimplexTolerance) throw ConfigError("constant oracle vector must sum to 1");
      return Classifier(shape, c, [p](const Image&) { return p; }, "oracle:constant");
    }
    case OracleKind::kRegionMean: {
      if (spec.regions.empty()) throw ConfigError("region-mean oracle needs at least one region");
      for (const BinaryMask& r : spec.regions) {
        if (r.count() == 0) throw ConfigError("oracle region must be non-empty");
      }
      const std::vector<BinaryMask> regions = spec.regions;
      const double t = spec.temperature;
      if (regions.size() == 1) {
        return Classifier(
            shape, 2,
            [regions, t](const Image& x) {
              const double m = region_mean(x, regions[0]);
              const double logits[2] = {m, 1.0 - m};
              return softmax(logits, t);
            },
            "oracle:region-mean");
      }
      return Classifier(
          shape, static_cast<int>(regions.size()),
          [regions, t](const Image& x) {
            std::vector<double> logits;
            for (const BinaryMask& r : regions) logits.push_back(region_mean(x, r));
            return softmax(logits, t);
          },
          "oracle:region-mean");
    }
    case OracleKind::kPlantedShape: {
      if (spec.regions.size() != 1 || spec.regions[0].count() == 0) {
        throw ConfigError("planted-shape oracle needs exactly one non-empty region");
      }
      if (spec.pattern.shape() != shape) throw ConfigError("planted-shape pattern does not match input shape");
      const BinaryMask region = spec.regions[0];
      const Image pattern = spec.pattern;
      const double t = spec.temperature;
      return Classifier(
          shape, 2,
          [region, pattern, t](const Image& x) {
            const double s = pattern_similarity(x, pattern, region);
            const double logits[2] = {s, 1.0 - s};
            return softmax(logits, t);
          },
          "oracle:planted-shape");
    }
  }
  throw ConfigError("unknown oracle kind");
}

Classifier classifier_from_network(std::shared_ptr<const nn::Network> net, std::string description) {
  const nn::Shape in = net->input_shape();
  if (in.size() != 3) throw ConfigError("classifier network must take [C,H,W] input");
  const nn::Shape out = net->output_shape();
  if (out.size() != 1) throw ConfigError("classifier network must end in a flat logit vector");
  const ImageShape shape{in[1], in[2], in[0]};
  return Classifier(
      shape, out[0],
      [net](const Image& x) {
        const nn::Tensor logits = net->infer(to_batch(x));
        return softmax(logits.values(), 1.0);
      },
      std::move(description));
}

// ---------------------------------------------------------------------------
// Toy classifier

ToyDataset make_toy_dataset(const ToyTaskSpec& spec) {
  if (spec.size < 2 * spec.shape_radius + 3) throw ConfigError("toy task image too small for its shape radius");
  if (spec.num_samples < 4) throw ConfigError("toy task needs at least 4 samples");
  Rng rng(spec.data_seed);
  ToyDataset data;
  const ImageShape shape{spec.size, spec.size, 1};
  const int rad = spec.shape_radius;
  for (int i = 0; i < spec.num_samples; ++i) {
    const int label = i % 2;
    Image img(shape);
    for (double& v : img.data()) v = rng.uniform(0.0, spec.noise);
    const int cr = rad + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.size - 2 * rad)));
    const int cc = rad + static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.size - 2 * rad)));
    const double level = rng.uniform(0.7, 1.0);
    const BinaryMask m = label == 0 ? rectangle_mask(spec.size, spec.size, cr - rad, cc - rad, 2 * rad + 1, 2 * rad + 1)
                                    : disc_mask(spec.size, spec.size, cr, cc, rad + 0.5);
    for (int r = 0; r < spec.size; ++r) {
      for (int c = 0; c < spec.size; ++c) {
        if (m.at(r, c)) img.at(r, c, 0) = level;
      }
    }
    data.images.push_back(std::move(img));
    data.labels.push_back(label);
  }
  return data;
}

std::vector<nn::LayerSpec> toy_classifier_layers() {
  return {nn::LayerSpec::conv(1, 8, 5, 1, 2), nn::LayerSpec::sigmoid(), nn::LayerSpec::fully_connected(0, 2)};
}

namespace {

double accuracy(const nn::Network& net, const ToyDataset& data, std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i : idx) {
    const nn::Tensor logits = net.infer(to_batch(data.images[i]));
    const int pred = logits[1] > logits[0] ? 1 : 0;
    if (pred == data.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

TrainedClassifier train_toy_classifier(const ToyTaskSpec& spec, int epochs, std::uint64_t seed,
                                       double accuracy_floor) {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(spec.holdout_fraction > 0.0 && spec.holdout_fraction < 1.0)) {
    throw ConfigError("holdout fraction must lie in (0, 1)");
  }
  const ToyDataset data = make_toy_dataset(spec);
  const std::size_t n = data.images.size();
  const auto n_holdout = static_cast<std::size_t>(std::lround(spec.holdout_fraction * static_cast<double>(n)));
  std::vector<std::size_t> train_idx, holdout_idx;
  for (std::size_t i = 0; i < n; ++i) (i < n - n_holdout ? train_idx : holdout_idx).push_back(i);

  auto net = std::make_shared<nn::Network>(nn::Shape{1, spec.size, spec.size}, toy_classifier_layers(),
                                           nn::NetRole::kClassifier, seed);
  nn::Optimizer opt({nn::OptimizerKind::kAdam, 3e-3});
  Rng rng(mix_seed(seed, 1));
  constexpr std::size_t kBatch = 32;

  TrainedClassifier result{Classifier(ImageShape{spec.size, spec.size, 1}, 2,
                                      [](const Image&) { return Probabilities{0.5, 0.5}; }),
                           nullptr, 0.0, 0.0, {}, {}};
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order = train_idx;
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      const std::size_t end = std::min(order.size(), start + kBatch);
      std::vector<Image> batch;
      for (std::size_t k = start; k < end; ++k) batch.push_back(data.images[order[k]]);
      const nn::Tensor logits = net->forward(to_batch(batch));
      nn::Tensor grad(logits.shape());
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = 0; k < end - start; ++k) {
        const double l[2] = {logits[2 * k], logits[2 * k + 1]};
        const Probabilities p = softmax(l, 1.0);
        const int y = data.labels[order[start + k]];
        epoch_loss -= std::log(std::max(p[static_cast<std::size_t>(y)], 1e-300));
        for (int c = 0; c < 2; ++c) grad[2 * k + c] = (p[static_cast<std::size_t>(c)] - (c == y ? 1.0 : 0.0)) * inv;
      }
      net->backward(grad);
      opt.step(*net);
    }
    result.train_loss_curve.push_back(epoch_loss / static_cast<double>(order.size()));
    result.holdout_accuracy_curve.push_back(accuracy(*net, data, holdout_idx));
  }

  result.train_accuracy = accuracy(*net, data, train_idx);
  result.holdout_accuracy = accuracy(*net, data, holdout_idx);
  if (result.holdout_accuracy < accuracy_floor) {
    std::ostringstream os;
    os << "toy classifier holdout accuracy " << result.holdout_accuracy << " below floor " << accuracy_floor
       << "; loss curve:";
    for (double v : result.train_loss_curve) os << ' ' << v;
    os << "; holdout accuracy curve:";
    for (double v : result.holdout_accuracy_curve) os << ' ' << v;
    throw TrainingError(os.str());
  }
  result.network = net;
  result.handle = classifier_from_network(net, "toy-classifier");
  return result;
}

}  // namespace dax::bb
