#pragma once

#include <functional>
#include <span>
#include <vector>

#include "dax/nn/network.hpp"
#include "dax/nn/tensor.hpp"

namespace dax::nn {

// |analytic - numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// near-zero gradients from reporting roundoff as large relative error.
double relative_error(double analytic, double numeric, double floor = 1e-6);

struct LayerGradReport {
  std::size_t layer = 0;
  LayerKind kind = LayerKind::kSigmoid;
  double max_relative_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<LayerGradReport> layers;  // one per layer that owns parameters
  double input_max_relative_error = 0.0;
  bool passed = true;
};

// Central-difference check of every parameter (and the input) of `net` under
// the scalar probe loss sum_k r_k * out_k, with fixed pseudo-random r. The
// network's grad buffers are left zeroed.
GradCheckReport finite_diff_check(Network& net, const Tensor& input, double tolerance = 1e-4,
                                  double epsilon = 1e-4);

// Generic variant: `params` must already hold analytic gradients of `loss`;
// each entry is perturbed by +-epsilon and `loss` re-evaluated. Returns the
// max relative error per parameter tensor.
std::vector<double> check_parameter_gradients(std::span<Parameter* const> params,
                                              const std::function<double()>& loss, double epsilon = 1e-4);

}  // namespace dax::nn
