#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dax/image.hpp"
#include "dax/nn/network.hpp"
#include "dax/nn/optimizer.hpp"
#include "dax/perturb.hpp"

// Distillation-aided explanations: a mask network proposes a [0, 1]
// multiplier over the input and a student network, fed the masked input,
// learns to reproduce the black-box target score on neighbourhood samples.
// Both are trained jointly; the mask is the explanation and the student is
// thrown away.
namespace dax::distill {

enum class Variant {
  kV1,  // MSE + lambda_sparsity * L1(mask) + lambda_kl * histogram KL
  kV2,  // MSE traded against the complement-mask MSE, see CounterfactualForm
};

enum class CounterfactualForm {
  // mean_i max(0, gamma_i e_i^2 - lambda c_i^2), e the masked-input error and
  // c the complement-input error. The student sees the complement branch as
  // a constant.
  kClamped,
  // mse - lambda * cnt, descended by both nets. Unbounded below.
  kJoint,
};

std::string to_string(Variant v);

struct DaxConfig {
  Variant variant = Variant::kV2;
  double lambda_sparsity = 1e-3;
  double lambda_kl = 0.02;
  double lambda_counterfactual = 0.5;
  CounterfactualForm counterfactual_form = CounterfactualForm::kClamped;
  int epochs = 30;
  int batch_size = 64;
  int kl_bins = 10;
  // Empty means the default architectures below.
  std::vector<nn::LayerSpec> mask_layers;
  std::vector<nn::LayerSpec> student_layers;
  int patience = 0;             // epochs without val improvement before stopping; 0 disables
  bool select_best_val = true;  // return the mask net from the best-val epoch
  nn::OptimizerConfig optimizer{nn::OptimizerKind::kAdam, 3e-3};
};

void validate(const DaxConfig& cfg);

// conv 3x3 (C->8) -> conv 3x3 (8->1) -> sigmoid, padding keeps H x W.
std::vector<nn::LayerSpec> default_mask_layers(int channels);
// 2 x conv 3x3 stride 2 -> FC 16 -> FC 1 -> sigmoid.
std::vector<nn::LayerSpec> default_student_layers(int channels);

// ---- loss terms (plain functions so they can be checked in isolation) ----

// (1/B) sum_i gamma_i (y_i - yhat_i)^2
double weighted_mse(std::span<const double> targets, std::span<const double> predictions,
                    std::span<const double> gammas);
// Mean over samples of the per-pixel mean of |M|.
double mask_l1(const nn::Tensor& masks);
// `bins`-bucket histograms over [0, 1], frequencies smoothed by +epsilon and
// renormalized, then KL(target || predicted).
inline constexpr double kKlEpsilon = 1e-8;
std::vector<double> score_histogram(std::span<const double> scores, int bins, double epsilon = kKlEpsilon);
double histogram_kl(std::span<const double> targets, std::span<const double> predictions, int bins,
                    double epsilon = kKlEpsilon);
// (1/B) sum_i (y_i - f_S(x_i * (1 - M_i)))^2
double complement_mse(std::span<const double> targets, std::span<const double> complement_predictions);

struct LossTerms {
  double mse = 0.0;
  double sparsity = 0.0;
  double kl = 0.0;
  double counterfactual = 0.0;
  double total = 0.0;
};

// mean_i max(0, gamma_i (y_i - p_i)^2 - lambda (y_i - c_i)^2)
double clamped_counterfactual_total(std::span<const double> targets, std::span<const double> predictions,
                                    std::span<const double> complement_predictions, std::span<const double> gammas,
                                    double lambda);

// V1: mse + lambda_sparsity * sparsity + lambda_kl * kl. V2: mse - lambda * cnt
// (the joint form; the clamped form needs per-sample values).
double combine(const LossTerms& t, const DaxConfig& cfg);

// The two networks and the composed forward/backward through
// f_S(x * f_M(x)).
class DaxModel {
 public:
  DaxModel(ImageShape input_shape, const DaxConfig& cfg, std::uint64_t seed);

  // Mask for one input: a single plane regardless of channel count.
  Grid mask(const Image& x) const;
  nn::Tensor mask_batch(const nn::Tensor& x) const;  // [N,1,H,W]
  // Student score of an already-masked input.
  double student(const Image& masked) const;
  std::vector<double> student_batch(const nn::Tensor& masked) const;
  // y~(x) = f_S(x * f_M(x)).
  std::vector<double> distilled_scores(const nn::Tensor& x) const;

  // Loss on a batch without touching gradients.
  LossTerms evaluate(const nn::Tensor& x, std::span<const double> targets, std::span<const double> gammas) const;
  // Forward + backward; adds d(total)/d(theta) into both nets' grad buffers.
  LossTerms accumulate_gradients(const nn::Tensor& x, std::span<const double> targets,
                                 std::span<const double> gammas);

  nn::Network& mask_net() { return mask_net_; }
  const nn::Network& mask_net() const { return mask_net_; }
  nn::Network& student_net() { return student_net_; }
  const nn::Network& student_net() const { return student_net_; }
  const DaxConfig& config() const { return cfg_; }

 private:
  DaxConfig cfg_;
  ImageShape shape_;
  nn::Network mask_net_;
  nn::Network student_net_;
};

// x * M broadcast over channels for a [N,C,H,W] batch and [N,1,H,W] masks;
// `complement` uses (1 - M).
nn::Tensor apply_mask(const nn::Tensor& x, const nn::Tensor& masks, bool complement = false);

struct EpochLog {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct Explanation {
  Grid mask;             // M in [0, 1]
  Image salient;         // x * M
  BinaryMask binary;     // M > mean + std
  double mask_mean = 0.0;
  double mask_std = 0.0;
  int target = 0;
  std::vector<EpochLog> log;
  int selected_epoch = 0;  // epoch whose mask net produced `mask` (0: initial)
};

Explanation extract(const Image& x, const nn::Network& mask_net, int target);

struct TrainResult {
  Explanation explanation;
  DaxModel model;  // final state of both nets
  double initial_val_mse = 0.0;
  double final_val_mse = 0.0;
};

// Joint training over shuffled train minibatches; per-epoch train/val totals
// are logged. Throws NumericError on a non-finite loss.
TrainResult train(const perturb::PerturbationBatch& batch, const DaxConfig& cfg, std::uint64_t seed);

}  // namespace dax::distill
