#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace dax {

struct ImageShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t pixels() const { return static_cast<std::size_t>(height) * width; }
  std::size_t size() const { return pixels() * channels; }
  bool operator==(const ImageShape&) const = default;
  std::string to_string() const;
};

// H x W x C grid of reals, interleaved (HWC). Images and spectrograms both
// travel as this type; values are expected in [0, 1].
class Image {
 public:
  Image() = default;
  explicit Image(ImageShape shape, double fill = 0.0);
  Image(ImageShape shape, std::vector<double> data);

  const ImageShape& shape() const { return shape_; }
  int height() const { return shape_.height; }
  int width() const { return shape_.width; }
  int channels() const { return shape_.channels; }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col, int ch) {
    return data_[(static_cast<std::size_t>(row) * shape_.width + col) * shape_.channels + ch];
  }
  double at(int row, int col, int ch) const {
    return data_[(static_cast<std::size_t>(row) * shape_.width + col) * shape_.channels + ch];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Image&) const = default;

 private:
  ImageShape shape_;
  std::vector<double> data_;
};

// Single-plane real grid: masks, saliency maps.
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, double fill = 0.0);
  Grid(int height, int width, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  double& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  double at(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, bool fill = false);

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }

  bool at(int row, int col) const { return data_[static_cast<std::size_t>(row) * width_ + col] != 0; }
  void set(int row, int col, bool v) { data_[static_cast<std::size_t>(row) * width_ + col] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return data_[i] != 0; }
  void set(std::size_t i, bool v) { data_[i] = v ? 1 : 0; }

  std::size_t count() const;
  bool operator==(const BinaryMask&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint8_t> data_;
};

// Min-max rescale into [0, 1]; a constant grid maps to all zeros.
Grid normalized(const Grid& g);

// x ⊙ M with M broadcast over channels.
Image multiply(const Image& x, const Grid& mask);

BinaryMask rectangle_mask(int height, int width, int row0, int col0, int rows, int cols);
BinaryMask disc_mask(int height, int width, double center_row, double center_col, double radius);

}  // namespace dax
