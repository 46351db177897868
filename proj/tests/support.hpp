#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dax/distill.hpp"
#include "dax/nn/tensor.hpp"

namespace dax::testing {

// A random minibatch for loss-level checks.
struct TinyBatch {
  nn::Tensor x;  // [N,C,H,W] in [0, 1]
  std::vector<double> targets;
  std::vector<double> gammas;  // mean 1
};

TinyBatch tiny_batch(int n, int channels, int height, int width, std::uint64_t seed);

struct DaxGradReport {
  double mask_error = 0.0;     // worst relative error over mask-net parameters
  double student_error = 0.0;  // worst relative error over student parameters
};

// Central differences of the composed loss against accumulate_gradients. In
// the clamped form the student is compared against the objective with the
// complement branch held at the unperturbed student, which is the gradient
// the student is meant to follow.
DaxGradReport dax_gradient_check(distill::DaxModel& model, const TinyBatch& batch, double epsilon = 1e-5);

// Golden values live in tests/golden/<name>.txt, one number per line. With
// DAX_UPDATE_GOLDEN=1 in the environment the file is rewritten from `values`
// instead; otherwise a missing file throws.
std::vector<double> golden(const std::string& name, const std::vector<double>& values);
std::string golden_text(const std::string& name, const std::string& text);

}  // namespace dax::testing
