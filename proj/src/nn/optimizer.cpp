#include "dax/nn/optimizer.hpp"

#include <cmath>
#include <sstream>

#include "dax/errors.hpp"

namespace dax::nn {

namespace {

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::isfinite(v) ? std::max(m, std::abs(v)) : INFINITY;
  return m;
}

}  // namespace

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw ConfigError("learning rate must be > 0");
}

void Optimizer::step(Network& net) {
  std::size_t param_index = 0;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    for (Parameter* p : net.layer(l).parameters()) {
      if (!p->grad.all_finite()) {
        std::ostringstream os;
        os << "non-finite gradient in " << to_string(net.role()) << " net, layer " << l << " ("
           << to_string(net.layer(l).spec().kind) << "), parameter " << param_index << ", max |grad| = " << max_abs(p->grad);
        throw NumericError(os.str());
      }
      ++param_index;
    }
  }
  const std::vector<Parameter*> params = net.parameters();
  apply(params);
}

void Optimizer::step(std::span<Parameter* const> params) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i]->grad.all_finite()) {
      std::ostringstream os;
      os << "non-finite gradient in parameter " << i << ", max |grad| = " << max_abs(params[i]->grad);
      throw NumericError(os.str());
    }
  }
  apply(params);
}

void Optimizer::apply(std::span<Parameter* const> params) {
  if (first_moment_.empty()) {
    for (const Parameter* p : params) {
      first_moment_.emplace_back(p->value.size(), 0.0);
      second_moment_.emplace_back(p->value.size(), 0.0);
    }
  }
  if (first_moment_.size() != params.size()) {
    throw ConfigError("optimizer was bound to " + std::to_string(first_moment_.size()) + " parameters, got " +
                      std::to_string(params.size()));
  }
  ++steps_;
  const double lr = config_.learning_rate;
  if (config_.kind == OptimizerKind::kSgd) {
    for (Parameter* p : params) {
      for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= lr * p->grad[i];
      p->zero_grad();
    }
    return;
  }
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter* p = params[k];
    std::vector<double>& m = first_moment_[k];
    std::vector<double>& v = second_moment_[k];
    if (m.size() != p->value.size()) throw ConfigError("optimizer parameter " + std::to_string(k) + " changed size");
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      m[i] = b1 * m[i] + (1.0 - b1) * g;
      v[i] = b2 * v[i] + (1.0 - b2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p->value[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
    }
    p->zero_grad();
  }
}

}  // namespace dax::nn
