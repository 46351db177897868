#include <doctest.h>

#include <cmath>

#include "dax/batch.hpp"
#include "dax/distill.hpp"
#include "dax/errors.hpp"
#include "dax/metrics.hpp"
#include "dax/rng.hpp"
#include "dax/scenes.hpp"
#include "support.hpp"

using namespace dax;
using namespace dax::distill;

namespace {

Image fixed_input(int h, int w, int c) {
  Image x({h, w, c});
  for (int r = 0; r < h; ++r) {
    for (int col = 0; col < w; ++col) {
      for (int k = 0; k < c; ++k) x.at(r, col, k) = std::fmod(0.37 * r + 0.21 * col + 0.5 * k, 1.0);
    }
  }
  return x;
}

void zero_last_parametric_layer(nn::Network& net) {
  for (std::size_t i = net.num_layers(); i-- > 0;) {
    auto params = net.layer(i).parameters();
    if (params.empty()) continue;
    for (nn::Parameter* p : params) p->value.fill(0.0);
    return;
  }
}

perturb::PerturbationBatch oracle_batch(int size, std::uint64_t seed, int q) {
  const scenes::Scene s = scenes::make_scene(size, seed);
  const bb::Classifier oracle = bb::make_oracle(scenes::square_oracle(s), s.image.shape());
  perturb::SamplerConfig sc;
  sc.num_samples = q;
  sc.seed = seed;
  return perturb::sample(s.image, seg::quick_shift(s.image, {}), oracle, 0, sc);
}

}  // namespace

TEST_CASE("default architectures") {
  const auto m = default_mask_layers(3);
  REQUIRE(m.size() == 3);
  CHECK(m[0] == nn::LayerSpec::conv(3, 8, 3, 1, 1));
  CHECK(m[1] == nn::LayerSpec::conv(8, 1, 3, 1, 1));
  CHECK(m[2].kind == nn::LayerKind::kSigmoid);
  const auto s = default_student_layers(3);
  REQUIRE(s.size() == 5);
  CHECK(s[0].stride == 2);
  CHECK(s[1].stride == 2);
  CHECK(s[2].out_features == 16);
  CHECK(s[3].out_features == 1);
  CHECK(s[4].kind == nn::LayerKind::kSigmoid);
}

TEST_CASE("mask forward") {
  const Image x = fixed_input(8, 8, 3);
  DaxModel model(x.shape(), {}, 42);

  SUBCASE("entries lie strictly inside (0, 1)") {
    const Grid m = model.mask(x);
    CHECK(m.height() == 8);
    CHECK(m.width() == 8);
    for (double v : m.data()) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
  SUBCASE("a zeroed final layer gives the constant mask 0.5") {
    zero_last_parametric_layer(model.mask_net());
    const Grid m = model.mask(x);
    for (double v : m.data()) CHECK(v == 0.5);
  }
  SUBCASE("seeded mask net matches the golden grid") {
    const Grid m = model.mask(x);
    const std::vector<double> values(m.data().begin(), m.data().end());
    const std::vector<double> expected = testing::golden("mask_seed42_8x8.txt", values);
    REQUIRE(expected.size() == values.size());
    for (std::size_t i = 0; i < values.size(); ++i) CHECK(values[i] == expected[i]);
  }
  SUBCASE("shape mismatch is a configuration error") {
    CHECK_THROWS_AS(model.mask(fixed_input(8, 7, 3)), ConfigError);
  }
}

TEST_CASE("student forward") {
  const Image x = fixed_input(8, 8, 3);
  DaxModel model(x.shape(), {}, 42);

  SUBCASE("zero weights give 0.5") {
    zero_last_parametric_layer(model.student_net());
    CHECK(model.student(x) == 0.5);
  }
  SUBCASE("identical inputs give identical scores") {
    const std::vector<Image> xs = {x, x, x};
    const auto s = model.student_batch(to_batch(xs));
    CHECK(s[0] == s[1]);
    CHECK(s[1] == s[2]);
  }
  SUBCASE("seeded student matches the golden score") {
    const std::vector<double> got = {model.student(x), model.distilled_scores(to_batch(x))[0]};
    const std::vector<double> expected = testing::golden("student_seed42_8x8.txt", got);
    REQUIRE(expected.size() == 2);
    CHECK(got[0] == expected[0]);
    CHECK(got[1] == expected[1]);
  }
}

TEST_CASE("weighted MSE") {
  const std::vector<double> y = {0.2, 0.7, 0.9}, g = {0.5, 1.0, 1.5};
  CHECK(weighted_mse(y, y, g) == 0.0);
  const std::vector<double> one = {1.0}, half = {0.5}, unit = {1.0};
  CHECK(weighted_mse(one, half, unit) == 0.25);
  const std::vector<double> p = {0.4, 0.1, 1.0};
  // (0.5 * 0.04 + 1.0 * 0.36 + 1.5 * 0.01) / 3
  CHECK(weighted_mse(y, p, g) == doctest::Approx((0.02 + 0.36 + 0.015) / 3.0).epsilon(1e-15));
}

TEST_CASE("mask L1") {
  CHECK(mask_l1(nn::Tensor({2, 1, 3, 3}, 0.0)) == 0.0);
  CHECK(mask_l1(nn::Tensor({2, 1, 3, 3}, 1.0)) == 1.0);
  nn::Tensor half({1, 1, 2, 2}, std::vector<double>{1.0, 0.0, 0.0, 1.0});
  CHECK(mask_l1(half) == 0.5);
}

TEST_CASE("histogram KL") {
  const std::vector<double> a = {0.1, 0.35, 0.8, 0.8};
  CHECK(histogram_kl(a, a, 10) == 0.0);
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> u(8), v(8);
    for (double& x : u) x = rng.uniform();
    for (double& x : v) x = rng.uniform();
    CHECK(histogram_kl(u, v, 2 + static_cast<int>(rng.below(10))) >= 0.0);
  }
  const std::vector<double> y = {0.1, 0.9}, p = {0.5, 0.5};
  const double e = kKlEpsilon, z = 1.0 + 2.0 * e;
  const double p0 = (0.5 + e) / z, p1 = (0.5 + e) / z;
  const double q0 = e / z, q1 = (1.0 + e) / z;
  CHECK(histogram_kl(y, p, 2) == doctest::Approx(p0 * std::log(p0 / q0) + p1 * std::log(p1 / q1)).epsilon(1e-14));
  const auto h = score_histogram(y, 2);
  CHECK(h[0] + h[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("complement loss") {
  const Image img = fixed_input(6, 6, 2);
  const nn::Tensor x = to_batch(std::vector<Image>{img, img});
  DaxModel model(img.shape(), {}, 3);
  const std::vector<double> y = {0.3, 0.8};

  SUBCASE("an all-ones mask sends the zero tensor to the student") {
    const nn::Tensor comp = apply_mask(x, nn::Tensor({2, 1, 6, 6}, 1.0), true);
    CHECK(comp == nn::Tensor(x.shape()));
    const double f0 = model.student(Image(img.shape()));
    const double expected = ((y[0] - f0) * (y[0] - f0) + (y[1] - f0) * (y[1] - f0)) / 2.0;
    CHECK(complement_mse(y, model.student_batch(comp)) == doctest::Approx(expected).epsilon(1e-15));
  }
  SUBCASE("a 0.5 mask makes both branches equal") {
    const nn::Tensor half({2, 1, 6, 6}, 0.5);
    const nn::Tensor a = apply_mask(x, half), b = apply_mask(x, half, true);
    CHECK(a == b);
    const std::vector<double> ones = {1.0, 1.0};
    CHECK(complement_mse(y, model.student_batch(b)) == weighted_mse(y, model.student_batch(a), ones));
  }
  SUBCASE("two-sample hand sums") {
    const std::vector<double> c = {0.5, 0.2};
    CHECK(complement_mse(y, c) == doctest::Approx((0.04 + 0.36) / 2.0).epsilon(1e-15));
    const std::vector<double> pred = {0.1, 0.7}, gam = {1.5, 0.5};
    // max(0, 1.5 * 0.04 - 0.5 * 0.04) + max(0, 0.5 * 0.01 - 0.5 * 0.36)
    CHECK(clamped_counterfactual_total(y, pred, c, gam, 0.5) == doctest::Approx(0.04 / 2.0).epsilon(1e-15));
  }
}

TEST_CASE("combine") {
  LossTerms t;
  t.mse = 0.5;
  t.sparsity = 0.25;
  t.kl = 2.0;
  t.counterfactual = 0.3;
  DaxConfig cfg;
  cfg.variant = Variant::kV1;
  cfg.lambda_sparsity = 0.1;
  cfg.lambda_kl = 0.01;
  CHECK(combine(t, cfg) == doctest::Approx(0.5 + 0.025 + 0.02).epsilon(1e-15));
  cfg.variant = Variant::kV2;
  cfg.lambda_counterfactual = 0.5;
  CHECK(combine(t, cfg) == doctest::Approx(0.35).epsilon(1e-15));
}

TEST_CASE("composed loss gradients match finite differences") {
  struct Shape {
    int n, c, h, w;
  };
  const Shape shapes[] = {{3, 1, 5, 5}, {4, 3, 6, 6}, {2, 2, 7, 5}};
  struct Form {
    Variant variant;
    CounterfactualForm form;
  };
  const Form forms[] = {{Variant::kV1, CounterfactualForm::kClamped},
                        {Variant::kV2, CounterfactualForm::kClamped},
                        {Variant::kV2, CounterfactualForm::kJoint}};
  std::uint64_t seed = 500;
  for (const Form& f : forms) {
    for (const Shape& s : shapes) {
      DaxConfig cfg;
      cfg.variant = f.variant;
      cfg.counterfactual_form = f.form;
      cfg.lambda_sparsity = 0.05;
      cfg.lambda_counterfactual = 0.3;
      DaxModel model({s.h, s.w, s.c}, cfg, seed);
      const testing::TinyBatch b = testing::tiny_batch(s.n, s.c, s.h, s.w, seed + 1);
      const testing::DaxGradReport r = testing::dax_gradient_check(model, b);
      CAPTURE(to_string(f.variant));
      CAPTURE(static_cast<int>(f.form));
      CHECK(r.mask_error < 1e-4);
      CHECK(r.student_error < 1e-4);
      seed += 2;
    }
  }
}

TEST_CASE("clamped form drops samples whose complement error dominates") {
  DaxConfig cfg;
  cfg.lambda_counterfactual = 1e6;
  DaxModel model({5, 5, 1}, cfg, 8);
  const testing::TinyBatch b = testing::tiny_batch(3, 1, 5, 5, 9);
  const LossTerms t = model.accumulate_gradients(b.x, b.targets, b.gammas);
  CHECK(t.total == 0.0);
  for (nn::Parameter* p : model.mask_net().parameters()) {
    for (double g : p->grad.values()) CHECK(g == 0.0);
  }
  for (nn::Parameter* p : model.student_net().parameters()) {
    for (double g : p->grad.values()) CHECK(g == 0.0);
  }
}

TEST_CASE("extraction") {
  SUBCASE("constant mask on a constant image") {
    DaxModel model({6, 6, 3}, {}, 1);
    zero_last_parametric_layer(model.mask_net());
    const Image x({6, 6, 3}, 0.8);
    const Explanation e = extract(x, model.mask_net(), 0);
    for (double v : e.salient.data()) CHECK(v == 0.4);
    CHECK(e.binary.count() == 0);
    CHECK(e.mask_std == 0.0);
  }
  SUBCASE("binary mask is exactly mask > mean + std") {
    DaxModel model({8, 8, 3}, {}, 2);
    const Explanation e = extract(fixed_input(8, 8, 3), model.mask_net(), 1);
    CHECK(e.target == 1);
    for (std::size_t i = 0; i < e.mask.size(); ++i) CHECK(e.binary[i] == (e.mask[i] > e.mask_mean + e.mask_std));
  }
}

TEST_CASE("training") {
  const perturb::PerturbationBatch batch = oracle_batch(16, 1, 64);
  DaxConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 16;

  SUBCASE("logs every epoch and reports its selection") {
    const TrainResult r = train(batch, cfg, 5);
    REQUIRE(r.explanation.log.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(r.explanation.log[static_cast<std::size_t>(i)].epoch == i + 1);
      CHECK(std::isfinite(r.explanation.log[static_cast<std::size_t>(i)].val_loss));
    }
    CHECK(r.explanation.selected_epoch >= 0);
    CHECK(r.explanation.selected_epoch <= 3);
    for (double v : r.explanation.mask.data()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  SUBCASE("same seed reproduces the mask bit for bit") {
    for (Variant v : {Variant::kV1, Variant::kV2}) {
      cfg.variant = v;
      CHECK(train(batch, cfg, 7).explanation.mask == train(batch, cfg, 7).explanation.mask);
    }
  }
  SUBCASE("invalid configs are rejected") {
    cfg.epochs = 0;
    CHECK_THROWS_AS(train(batch, cfg, 1), ConfigError);
    cfg = {};
    cfg.lambda_counterfactual = -1.0;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
    cfg = {};
    cfg.kl_bins = 1;
    CHECK_THROWS_AS(validate(cfg), ConfigError);
  }
}
