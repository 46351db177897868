#pragma once

#include <cstdint>

#include "dax/blackbox.hpp"
#include "dax/image.hpp"

namespace dax::scenes {

// Synthetic RGB scene with a known answer: a warm square (the salient object)
// and a cool disc (distractor) over low-intensity noise.
struct Scene {
  Image image;
  BinaryMask square;  // region of the salient object
  BinaryMask disc;    // region of the distractor
};

Scene make_scene(int size, std::uint64_t seed);

// Region-mean oracle over the square: class 0 is "square present".
bb::OracleSpec square_oracle(const Scene& scene, double temperature = 0.25);
// Two-region oracle: class 0 follows the square, class 1 the disc.
bb::OracleSpec two_region_oracle(const Scene& scene, double temperature = 0.25);

}  // namespace dax::scenes
