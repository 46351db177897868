#include "dax/distill.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "dax/batch.hpp"
#include "dax/errors.hpp"
#include "dax/metrics.hpp"
#include "dax/rng.hpp"

namespace dax::distill {

std::string to_string(Variant v) { return v == Variant::kV1 ? "v1" : "v2"; }

void validate(const DaxConfig& cfg) {
  if (cfg.lambda_sparsity < 0 || cfg.lambda_kl < 0 || cfg.lambda_counterfactual < 0) {
    throw ConfigError("loss weights must be >= 0");
  }
  if (cfg.kl_bins < 2) throw ConfigError("KL histogram needs at least 2 bins");
  if (cfg.epochs < 1) throw ConfigError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (cfg.patience < 0) throw ConfigError("patience must be >= 0");
}

std::vector<nn::LayerSpec> default_mask_layers(int channels) {
  return {nn::LayerSpec::conv(channels, 8, 3, 1, 1), nn::LayerSpec::conv(8, 1, 3, 1, 1), nn::LayerSpec::sigmoid()};
}

std::vector<nn::LayerSpec> default_student_layers(int channels) {
  return {nn::LayerSpec::conv(channels, 8, 3, 2, 1), nn::LayerSpec::conv(8, 8, 3, 2, 1),
          nn::LayerSpec::fully_connected(0, 16), nn::LayerSpec::fully_connected(16, 1), nn::LayerSpec::sigmoid()};
}

// ---------------------------------------------------------------------------
// Loss terms

double weighted_mse(std::span<const double> targets, std::span<const double> predictions,
                    std::span<const double> gammas) {
  if (targets.empty()) throw ConfigError("MSE over an empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - predictions[i];
    s += gammas[i] * d * d;
  }
  return s / static_cast<double>(targets.size());
}

double mask_l1(const nn::Tensor& masks) {
  double s = 0.0;
  for (double v : masks.values()) s += std::abs(v);
  return s / static_cast<double>(masks.size());
}

std::vector<double> score_histogram(std::span<const double> scores, int bins, double epsilon) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (double v : scores) {
    const int b = std::clamp(static_cast<int>(std::floor(v * bins)), 0, bins - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  const double n = static_cast<double>(scores.size());
  const double z = 1.0 + bins * epsilon;
  for (double& v : h) v = (v / n + epsilon) / z;
  return h;
}

double histogram_kl(std::span<const double> targets, std::span<const double> predictions, int bins, double epsilon) {
  const std::vector<double> p = score_histogram(targets, bins, epsilon);
  const std::vector<double> q = score_histogram(predictions, bins, epsilon);
  double kl = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) kl += p[k] * std::log(p[k] / q[k]);
  return kl;
}

double complement_mse(std::span<const double> targets, std::span<const double> complement_predictions) {
  if (targets.empty()) throw ConfigError("counterfactual loss over an empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - complement_predictions[i];
    s += d * d;
  }
  return s / static_cast<double>(targets.size());
}

double clamped_counterfactual_total(std::span<const double> targets, std::span<const double> predictions,
                                    std::span<const double> complement_predictions, std::span<const double> gammas,
                                    double lambda) {
  if (targets.empty()) throw ConfigError("counterfactual loss over an empty batch");
  double s = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double e = targets[i] - predictions[i];
    const double ec = targets[i] - complement_predictions[i];
    s += std::max(0.0, gammas[i] * e * e - lambda * ec * ec);
  }
  return s / static_cast<double>(targets.size());
}

double combine(const LossTerms& t, const DaxConfig& cfg) {
  if (cfg.variant == Variant::kV1) return t.mse + cfg.lambda_sparsity * t.sparsity + cfg.lambda_kl * t.kl;
  return t.mse - cfg.lambda_counterfactual * t.counterfactual;
}

// ---------------------------------------------------------------------------

nn::Tensor apply_mask(const nn::Tensor& x, const nn::Tensor& masks, bool complement) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (masks.dim(0) != n || masks.dim(1) != 1 || masks.dim(2) != h || masks.dim(3) != w) {
    throw ConfigError("mask batch " + nn::shape_string(masks.shape()) + " does not match input " +
                      nn::shape_string(x.shape()));
  }
  nn::Tensor out(x.shape());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (int i = 0; i < n; ++i) {
    const double* m = &masks.at(i, 0, 0, 0);
    for (int k = 0; k < c; ++k) {
      const double* xi = &x.at(i, k, 0, 0);
      double* o = &out.at(i, k, 0, 0);
      for (std::size_t p = 0; p < plane; ++p) o[p] = xi[p] * (complement ? 1.0 - m[p] : m[p]);
    }
  }
  return out;
}

namespace {

nn::Shape chw(ImageShape s) { return {s.channels, s.height, s.width}; }

void check_mask_net(const nn::Network& net, ImageShape s) {
  const nn::Shape out = net.output_shape();
  if (out != nn::Shape{1, s.height, s.width}) {
    throw ConfigError("mask network must output [1," + std::to_string(s.height) + "," + std::to_string(s.width) +
                      "], got " + nn::shape_string(out));
  }
  if (net.num_layers() == 0 || net.layer(net.num_layers() - 1).spec().kind != nn::LayerKind::kSigmoid) {
    throw ConfigError("mask network must end in a sigmoid layer");
  }
}

void check_student_net(const nn::Network& net) {
  if (net.output_shape() != nn::Shape{1}) {
    throw ConfigError("student network must output a single score, got " + nn::shape_string(net.output_shape()));
  }
  if (net.num_layers() == 0 || net.layer(net.num_layers() - 1).spec().kind != nn::LayerKind::kSigmoid) {
    throw ConfigError("student network must end in a sigmoid layer");
  }
}

// Concatenates two equally shaped batches along the batch axis.
nn::Tensor concat(const nn::Tensor& a, const nn::Tensor& b) {
  nn::Shape s = a.shape();
  s[0] += b.dim(0);
  nn::Tensor out(s);
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(a.size()));
  return out;
}

}  // namespace

DaxModel::DaxModel(ImageShape input_shape, const DaxConfig& cfg, std::uint64_t seed)
    : cfg_(cfg),
      shape_(input_shape),
      mask_net_(chw(input_shape),
                cfg.mask_layers.empty() ? default_mask_layers(input_shape.channels) : cfg.mask_layers,
                nn::NetRole::kMask, mix_seed(seed, 10)),
      student_net_(chw(input_shape),
                   cfg.student_layers.empty() ? default_student_layers(input_shape.channels) : cfg.student_layers,
                   nn::NetRole::kStudent, mix_seed(seed, 11)) {
  validate(cfg_);
  check_mask_net(mask_net_, shape_);
  check_student_net(student_net_);
}

nn::Tensor DaxModel::mask_batch(const nn::Tensor& x) const { return mask_net_.infer(x); }

Grid DaxModel::mask(const Image& x) const {
  if (x.shape() != shape_) throw ConfigError("mask input " + x.shape().to_string() + " does not match " + shape_.to_string());
  return plane(mask_net_.infer(to_batch(x)), 0);
}

std::vector<double> DaxModel::student_batch(const nn::Tensor& masked) const {
  const nn::Tensor out = student_net_.infer(masked);
  return {out.values().begin(), out.values().end()};
}

double DaxModel::student(const Image& masked) const {
  if (masked.shape() != shape_) throw ConfigError("student input does not match " + shape_.to_string());
  return student_batch(to_batch(masked))[0];
}

std::vector<double> DaxModel::distilled_scores(const nn::Tensor& x) const {
  return student_batch(apply_mask(x, mask_batch(x)));
}

LossTerms DaxModel::evaluate(const nn::Tensor& x, std::span<const double> targets,
                             std::span<const double> gammas) const {
  const nn::Tensor m = mask_batch(x);
  const std::vector<double> pred = student_batch(apply_mask(x, m));
  LossTerms t;
  t.mse = weighted_mse(targets, pred, gammas);
  if (cfg_.variant == Variant::kV1) {
    t.sparsity = mask_l1(m);
    t.kl = histogram_kl(targets, pred, cfg_.kl_bins);
    t.total = combine(t, cfg_);
  } else {
    const std::vector<double> comp = student_batch(apply_mask(x, m, true));
    t.counterfactual = complement_mse(targets, comp);
    t.total = cfg_.counterfactual_form == CounterfactualForm::kJoint
                  ? combine(t, cfg_)
                  : clamped_counterfactual_total(targets, pred, comp, gammas, cfg_.lambda_counterfactual);
  }
  return t;
}

LossTerms DaxModel::accumulate_gradients(const nn::Tensor& x, std::span<const double> targets,
                                         std::span<const double> gammas) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t plane_size = static_cast<std::size_t>(h) * w;
  const auto un = static_cast<std::size_t>(n);
  const bool v2 = cfg_.variant == Variant::kV2;
  const bool joint = v2 && cfg_.counterfactual_form == CounterfactualForm::kJoint;
  const double inv_n = 1.0 / n;
  const double lambda = cfg_.lambda_counterfactual;

  const nn::Tensor m = mask_net_.forward(x);
  const nn::Tensor masked = apply_mask(x, m);
  LossTerms t;

  // Input gradients of the loss w.r.t. the masked and complement student inputs.
  nn::Tensor g_masked, g_comp;
  if (!v2) {
    const nn::Tensor out = student_net_.forward(masked);
    const std::span<const double> pred = out.values();
    t.mse = weighted_mse(targets, pred, gammas);
    t.sparsity = mask_l1(m);
    // Piecewise constant in the scores: contributes to the value only.
    t.kl = histogram_kl(targets, pred, cfg_.kl_bins);
    t.total = combine(t, cfg_);
    nn::Tensor d_out(out.shape());
    for (int i = 0; i < n; ++i) d_out[i] = -2.0 * gammas[i] * (targets[i] - pred[i]) * inv_n;
    g_masked = student_net_.backward(d_out);
  } else if (joint) {
    // One pass over [x*M ; x*(1-M)]; both nets descend mse - lambda * cnt.
    const nn::Tensor out = student_net_.forward(concat(masked, apply_mask(x, m, true)));
    const std::span<const double> pred = out.values().subspan(0, un);
    const std::span<const double> comp = out.values().subspan(un);
    t.mse = weighted_mse(targets, pred, gammas);
    t.counterfactual = complement_mse(targets, comp);
    t.total = combine(t, cfg_);
    nn::Tensor d_out(out.shape());
    for (int i = 0; i < n; ++i) {
      d_out[static_cast<std::size_t>(i)] = -2.0 * gammas[i] * (targets[i] - pred[i]) * inv_n;
      d_out[un + static_cast<std::size_t>(i)] = 2.0 * lambda * (targets[i] - comp[i]) * inv_n;
    }
    const nn::Tensor g = student_net_.backward(d_out);
    g_masked = nn::Tensor({n, c, h, w});
    g_comp = nn::Tensor({n, c, h, w});
    std::copy(g.values().begin(), g.values().begin() + static_cast<std::ptrdiff_t>(g_masked.size()),
              g_masked.values().begin());
    std::copy(g.values().begin() + static_cast<std::ptrdiff_t>(g_masked.size()), g.values().end(),
              g_comp.values().begin());
  } else {
    // Clamped form: samples whose complement error already outweighs their
    // fit error drop out. The complement branch is detached for the student,
    // which only follows the masked branch.
    const nn::Tensor comp_in = apply_mask(x, m, true);
    nn::Network probe = student_net_;
    const nn::Tensor comp_out = probe.forward(comp_in);
    const nn::Tensor out = student_net_.forward(masked);
    const std::span<const double> pred = out.values();
    const std::span<const double> comp = comp_out.values();
    t.mse = weighted_mse(targets, pred, gammas);
    t.counterfactual = complement_mse(targets, comp);
    t.total = clamped_counterfactual_total(targets, pred, comp, gammas, lambda);
    nn::Tensor d_out(out.shape()), d_comp(comp_out.shape());
    for (int i = 0; i < n; ++i) {
      const double e = targets[i] - pred[i], ec = targets[i] - comp[i];
      if (gammas[i] * e * e - lambda * ec * ec <= 0.0) continue;
      d_out[static_cast<std::size_t>(i)] = -2.0 * gammas[i] * e * inv_n;
      d_comp[static_cast<std::size_t>(i)] = 2.0 * lambda * ec * inv_n;
    }
    g_masked = student_net_.backward(d_out);
    g_comp = probe.backward(d_comp);
  }

  // d/dM of f(x*M) is g*x; of f(x*(1-M)) it is -g*x. Summed over channels.
  nn::Tensor d_mask(m.shape());
  const double sp_grad = v2 ? 0.0 : cfg_.lambda_sparsity * inv_n / static_cast<double>(plane_size);
  for (int i = 0; i < n; ++i) {
    double* dm = &d_mask.at(i, 0, 0, 0);
    const double* mi = &m.at(i, 0, 0, 0);
    for (std::size_t p = 0; p < plane_size; ++p) dm[p] = mi[p] >= 0 ? sp_grad : -sp_grad;
    for (int k = 0; k < c; ++k) {
      const double* xi = &x.at(i, k, 0, 0);
      const double* gm = &g_masked.at(i, k, 0, 0);
      for (std::size_t p = 0; p < plane_size; ++p) dm[p] += gm[p] * xi[p];
      if (v2) {
        const double* gc = &g_comp.at(i, k, 0, 0);
        for (std::size_t p = 0; p < plane_size; ++p) dm[p] -= gc[p] * xi[p];
      }
    }
  }
  mask_net_.backward(d_mask);
  return t;
}

// ---------------------------------------------------------------------------

Explanation extract(const Image& x, const nn::Network& mask_net, int target) {
  Explanation e;
  e.mask = plane(mask_net.infer(to_batch(x)), 0);
  e.salient = multiply(x, e.mask);
  const metrics::Threshold thr = metrics::mean_plus_std(e.mask);
  e.mask_mean = thr.mean;
  e.mask_std = thr.stddev;
  e.binary = metrics::binarize(e.mask);
  e.target = target;
  return e;
}

namespace {

struct MiniBatch {
  nn::Tensor inputs;
  std::vector<double> targets;
  std::vector<double> gammas;
};

MiniBatch gather(const perturb::PerturbationBatch& batch, std::span<const std::size_t> idx) {
  std::vector<Image> images;
  MiniBatch mb;
  images.reserve(idx.size());
  for (std::size_t i : idx) {
    images.push_back(batch.perturbed(i));
    mb.targets.push_back(batch.sample(i).score);
    mb.gammas.push_back(batch.sample(i).gamma);
  }
  mb.inputs = to_batch(images);
  return mb;
}

// Loss over a whole split, evaluated in chunks and weighted by chunk size.
LossTerms evaluate_split(const DaxModel& model, const std::vector<MiniBatch>& chunks) {
  LossTerms sum;
  double n = 0.0;
  for (const MiniBatch& mb : chunks) {
    const LossTerms t = model.evaluate(mb.inputs, mb.targets, mb.gammas);
    const double k = static_cast<double>(mb.targets.size());
    sum.mse += k * t.mse;
    sum.sparsity += k * t.sparsity;
    sum.kl += k * t.kl;
    sum.counterfactual += k * t.counterfactual;
    sum.total += k * t.total;
    n += k;
  }
  if (n > 0) {
    sum.mse /= n;
    sum.sparsity /= n;
    sum.kl /= n;
    sum.counterfactual /= n;
    sum.total /= n;
  }
  return sum;
}

std::vector<MiniBatch> chunked(const perturb::PerturbationBatch& batch, const std::vector<std::size_t>& idx,
                               std::size_t chunk) {
  std::vector<MiniBatch> out;
  for (std::size_t s = 0; s < idx.size(); s += chunk) {
    const std::size_t e = std::min(idx.size(), s + chunk);
    out.push_back(gather(batch, std::span<const std::size_t>(idx).subspan(s, e - s)));
  }
  return out;
}

}  // namespace

TrainResult train(const perturb::PerturbationBatch& batch, const DaxConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  const Image& x = batch.input();
  TrainResult result{Explanation{}, DaxModel(x.shape(), cfg, seed)};
  DaxModel& model = result.model;

  std::vector<std::size_t> train_idx = batch.indices(perturb::SplitTag::kTrain);
  const std::vector<std::size_t> val_idx = batch.indices(perturb::SplitTag::kVal);
  if (train_idx.empty()) throw ConfigError("no training samples in the perturbation batch");
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  // Validation uses the training minibatch size for the KL histogram too.
  const std::vector<MiniBatch> val_chunks = chunked(batch, val_idx, bs);

  nn::Optimizer mask_opt(cfg.optimizer);
  nn::Optimizer student_opt(cfg.optimizer);
  Rng rng(mix_seed(seed, 12));

  auto val_mse = [&] {
    return val_chunks.empty() ? 0.0 : evaluate_split(model, val_chunks).mse;
  };
  result.initial_val_mse = val_mse();

  nn::Network best_mask = model.mask_net();
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int since_best = 0;
  std::vector<EpochLog> log;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(train_idx));
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t s = 0, b = 0; s < train_idx.size(); s += bs, ++b) {
      const std::size_t e = std::min(train_idx.size(), s + bs);
      const MiniBatch mb = gather(batch, std::span<const std::size_t>(train_idx).subspan(s, e - s));
      const LossTerms t = model.accumulate_gradients(mb.inputs, mb.targets, mb.gammas);
      if (!std::isfinite(t.total)) {
        std::ostringstream os;
        os << "non-finite training loss at epoch " << epoch << ", batch " << b << " (mse " << t.mse << ", cnt "
           << t.counterfactual << ")";
        throw NumericError(os.str());
      }
      mask_opt.step(model.mask_net());
      student_opt.step(model.student_net());
      loss_sum += t.total * static_cast<double>(e - s);
      seen += e - s;
    }
    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(seen);
    entry.val_loss = val_chunks.empty() ? entry.train_loss : evaluate_split(model, val_chunks).total;
    log.push_back(entry);

    if (entry.val_loss < best_val) {
      best_val = entry.val_loss;
      best_epoch = epoch;
      best_mask = model.mask_net();
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }

  const bool use_best = cfg.select_best_val && best_epoch > 0;
  result.explanation = extract(x, use_best ? best_mask : model.mask_net(), batch.target());
  result.explanation.log = std::move(log);
  result.explanation.selected_epoch = use_best ? best_epoch : static_cast<int>(result.explanation.log.size());
  result.final_val_mse = val_mse();
  return result;
}

}  // namespace dax::distill
