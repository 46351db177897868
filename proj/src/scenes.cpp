#include "dax/scenes.hpp"

#include <algorithm>
#include <cmath>

#include "dax/errors.hpp"
#include "dax/rng.hpp"

namespace dax::scenes {

Scene make_scene(int size, std::uint64_t seed) {
  if (size < 12) throw ConfigError("scene size must be >= 12");
  Rng rng(seed);
  Scene s;
  s.image = Image(ImageShape{size, size, 3});
  for (double& v : s.image.data()) v = rng.uniform(0.05, 0.25);

  const int side = std::max(3, size / 4 + static_cast<int>(rng.below(static_cast<std::uint64_t>(size / 8 + 1))));
  const double radius = std::max(2.0, size / 8.0 + rng.uniform(0.0, size / 16.0));
  // Square and disc sit in opposite halves (left/right, order random) so
  // they never overlap.
  const bool square_left = rng.bernoulli(0.5);
  const int half = size / 2;
  const int sq_col0 = (square_left ? 1 : half + 1) +
                      static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, half - side - 1))));
  const int sq_row0 = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(std::max(1, size - side - 2))));
  const double disc_lo = radius + 1.0;
  const double disc_col = (square_left ? half : 0) + rng.uniform(disc_lo, std::max(disc_lo, half - radius - 1.0));
  const double disc_row = rng.uniform(disc_lo, std::max(disc_lo, size - radius - 1.0));

  s.square = rectangle_mask(size, size, sq_row0, sq_col0, side, side);
  s.disc = disc_mask(size, size, disc_row, disc_col, radius);
  constexpr double kWarm[3] = {0.95, 0.80, 0.30};
  constexpr double kCool[3] = {0.20, 0.35, 0.90};
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double* color = s.square.at(r, c) ? kWarm : (s.disc.at(r, c) ? kCool : nullptr);
      if (!color) continue;
      for (int k = 0; k < 3; ++k) s.image.at(r, c, k) = std::clamp(color[k] + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    }
  }
  return s;
}

bb::OracleSpec square_oracle(const Scene& scene, double temperature) {
  bb::OracleSpec spec;
  spec.kind = bb::OracleKind::kRegionMean;
  spec.regions = {scene.square};
  spec.temperature = temperature;
  return spec;
}

bb::OracleSpec two_region_oracle(const Scene& scene, double temperature) {
  bb::OracleSpec spec;
  spec.kind = bb::OracleKind::kRegionMean;
  spec.regions = {scene.square, scene.disc};
  spec.temperature = temperature;
  return spec;
}

}  // namespace dax::scenes
