#include "dax/batch.hpp"

#include "dax/errors.hpp"

namespace dax {

nn::Tensor to_batch(std::span<const Image> images) {
  if (images.empty()) throw ConfigError("cannot batch zero images");
  const ImageShape s = images.front().shape();
  nn::Tensor t({static_cast<int>(images.size()), s.channels, s.height, s.width});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].shape() != s) throw ConfigError("batch image " + std::to_string(n) + " has a different shape");
    for (int r = 0; r < s.height; ++r) {
      for (int c = 0; c < s.width; ++c) {
        for (int k = 0; k < s.channels; ++k) t.at(static_cast<int>(n), k, r, c) = images[n].at(r, c, k);
      }
    }
  }
  return t;
}

nn::Tensor to_batch(const Image& image) { return to_batch(std::span<const Image>(&image, 1)); }

Grid plane(const nn::Tensor& t, int n) {
  Grid g(t.dim(2), t.dim(3));
  for (int r = 0; r < t.dim(2); ++r) {
    for (int c = 0; c < t.dim(3); ++c) g.at(r, c) = t.at(n, 0, r, c);
  }
  return g;
}

}  // namespace dax
