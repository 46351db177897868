#include "support.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dax/errors.hpp"
#include "dax/nn/gradcheck.hpp"
#include "dax/rng.hpp"

namespace dax::testing {

TinyBatch tiny_batch(int n, int channels, int height, int width, std::uint64_t seed) {
  Rng rng(seed);
  TinyBatch b;
  b.x = nn::Tensor({n, channels, height, width});
  for (double& v : b.x.values()) v = rng.uniform();
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    b.targets.push_back(rng.uniform());
    b.gammas.push_back(rng.uniform(0.2, 2.0));
    sum += b.gammas.back();
  }
  for (double& g : b.gammas) g *= n / sum;
  return b;
}

namespace {

double worst(const std::vector<double>& errs) {
  return errs.empty() ? 0.0 : *std::max_element(errs.begin(), errs.end());
}

}  // namespace

DaxGradReport dax_gradient_check(distill::DaxModel& model, const TinyBatch& b, double epsilon) {
  for (nn::Parameter* p : model.mask_net().parameters()) p->grad.fill(0.0);
  for (nn::Parameter* p : model.student_net().parameters()) p->grad.fill(0.0);
  model.accumulate_gradients(b.x, b.targets, b.gammas);

  auto total = [&] { return model.evaluate(b.x, b.targets, b.gammas).total; };
  DaxGradReport r;
  r.mask_error = worst(nn::check_parameter_gradients(model.mask_net().parameters(), total, epsilon));

  const distill::DaxConfig& cfg = model.config();
  const bool clamped = cfg.variant == distill::Variant::kV2 &&
                       cfg.counterfactual_form == distill::CounterfactualForm::kClamped;
  if (!clamped) {
    r.student_error = worst(nn::check_parameter_gradients(model.student_net().parameters(), total, epsilon));
  } else {
    const nn::Tensor m = model.mask_batch(b.x);
    const nn::Tensor masked = distill::apply_mask(b.x, m);
    const std::vector<double> comp = model.student_batch(distill::apply_mask(b.x, m, true));
    auto detached = [&] {
      return distill::clamped_counterfactual_total(b.targets, model.student_batch(masked), comp, b.gammas,
                                                   cfg.lambda_counterfactual);
    };
    r.student_error = worst(nn::check_parameter_gradients(model.student_net().parameters(), detached, epsilon));
  }
  for (nn::Parameter* p : model.mask_net().parameters()) p->grad.fill(0.0);
  for (nn::Parameter* p : model.student_net().parameters()) p->grad.fill(0.0);
  return r;
}

namespace {

bool updating() {
  const char* v = std::getenv("DAX_UPDATE_GOLDEN");
  return v != nullptr && std::string(v) == "1";
}

std::filesystem::path golden_path(const std::string& name) {
  return std::filesystem::path(DAX_GOLDEN_DIR) / name;
}

}  // namespace

std::string golden_text(const std::string& name, const std::string& text) {
  const auto path = golden_path(name);
  if (updating()) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream(path, std::ios::binary) << text;
    return text;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("missing golden file " + path.string() + " (regenerate with DAX_UPDATE_GOLDEN=1)");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<double> golden(const std::string& name, const std::vector<double>& values) {
  std::string text;
  for (double v : values) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g\n", v);
    text += buf;
  }
  std::istringstream in(golden_text(name, text));
  std::vector<double> out;
  for (double v; in >> v;) out.push_back(v);
  return out;
}

}  // namespace dax::testing
