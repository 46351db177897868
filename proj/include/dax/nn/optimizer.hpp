#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dax/nn/network.hpp"
#include "dax/nn/tensor.hpp"

namespace dax::nn {

enum class OptimizerKind { kSgd, kAdam };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First-order update rule bound to one ordered parameter list (the first
// step() fixes it). Moment buffers live here, not in the parameters.
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config = {});

  // Updates every parameter from its grad buffer, then zeroes the grads.
  // Throws NumericError (naming the layer and the largest |grad|) if any
  // gradient is non-finite; nothing is modified in that case.
  void step(Network& net);
  void step(std::span<Parameter* const> params);

  std::int64_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }

 private:
  void apply(std::span<Parameter* const> params);

  OptimizerConfig config_;
  std::int64_t steps_ = 0;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
};

}  // namespace dax::nn
