#include "dax/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "dax/rng.hpp"

namespace dax::nn {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

std::vector<double> check_parameter_gradients(std::span<Parameter* const> params,
                                              const std::function<double()>& loss, double epsilon) {
  std::vector<double> errors;
  for (Parameter* p : params) {
    double worst = 0.0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + epsilon;
      const double up = loss();
      p->value[i] = saved - epsilon;
      const double down = loss();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * epsilon);
      worst = std::max(worst, relative_error(p->grad[i], numeric));
    }
    errors.push_back(worst);
  }
  return errors;
}

GradCheckReport finite_diff_check(Network& net, const Tensor& input, double tolerance, double epsilon) {
  GradCheckReport report;
  if (net.num_layers() == 0) return report;

  const Tensor probe_shape_out = net.infer(input);
  Tensor probe(probe_shape_out.shape());
  Rng rng(0x5eedULL);
  for (double& v : probe.values()) v = rng.uniform(-1.0, 1.0);
  auto probe_loss = [&](const Tensor& out) {
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += probe[i] * out[i];
    return s;
  };

  net.zero_grad();
  net.forward(input);
  const Tensor grad_input = net.backward(probe);

  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    std::vector<Parameter*> params = net.layer(l).parameters();
    if (params.empty()) continue;
    const std::vector<double> errs =
        check_parameter_gradients(params, [&] { return probe_loss(net.infer(input)); }, epsilon);
    LayerGradReport r;
    r.layer = l;
    r.kind = net.layer(l).spec().kind;
    r.max_relative_error = *std::max_element(errs.begin(), errs.end());
    r.passed = r.max_relative_error < tolerance;
    report.passed = report.passed && r.passed;
    report.layers.push_back(r);
  }

  Tensor x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + epsilon;
    const double up = probe_loss(net.infer(x));
    x[i] = saved - epsilon;
    const double down = probe_loss(net.infer(x));
    x[i] = saved;
    report.input_max_relative_error =
        std::max(report.input_max_relative_error, relative_error(grad_input[i], (up - down) / (2.0 * epsilon)));
  }
  report.passed = report.passed && report.input_max_relative_error < tolerance;
  net.zero_grad();
  return report;
}

}  // namespace dax::nn
