#include "dax/image.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "dax/errors.hpp"

namespace dax {

std::string ImageShape::to_string() const {
  std::ostringstream os;
  os << height << "x" << width << "x" << channels;
  return os.str();
}

Image::Image(ImageShape shape, double fill) : shape_(shape), data_(shape.size(), fill) {}

Image::Image(ImageShape shape, std::vector<double> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ConfigError("image data size " + std::to_string(data_.size()) + " does not match shape " +
                      shape_.to_string());
  }
}

Grid::Grid(int height, int width, double fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill) {}

Grid::Grid(int height, int width, std::vector<double> data)
    : height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(height) * width) {
    throw ConfigError("grid data size does not match " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
}

BinaryMask::BinaryMask(int height, int width, bool fill)
    : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill ? 1 : 0) {}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

Grid normalized(const Grid& g) {
  Grid out(g.height(), g.width());
  if (g.size() == 0) return out;
  const auto [lo, hi] = std::minmax_element(g.data().begin(), g.data().end());
  const double range = *hi - *lo;
  if (range <= 0.0) return out;
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = (g[i] - *lo) / range;
  return out;
}

Image multiply(const Image& x, const Grid& mask) {
  if (mask.height() != x.height() || mask.width() != x.width()) {
    throw ConfigError("mask " + std::to_string(mask.height()) + "x" + std::to_string(mask.width()) +
                      " does not match image " + x.shape().to_string());
  }
  Image out = x;
  auto d = out.data();
  const int c = x.channels();
  for (std::size_t p = 0; p < mask.size(); ++p) {
    for (int k = 0; k < c; ++k) d[p * c + k] *= mask[p];
  }
  return out;
}

BinaryMask rectangle_mask(int height, int width, int row0, int col0, int rows, int cols) {
  BinaryMask m(height, width);
  for (int r = std::max(0, row0); r < std::min(height, row0 + rows); ++r) {
    for (int c = std::max(0, col0); c < std::min(width, col0 + cols); ++c) m.set(r, c, true);
  }
  return m;
}

BinaryMask disc_mask(int height, int width, double center_row, double center_col, double radius) {
  BinaryMask m(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double dr = r - center_row, dc = c - center_col;
      m.set(r, c, dr * dr + dc * dc <= radius * radius);
    }
  }
  return m;
}

}  // namespace dax
