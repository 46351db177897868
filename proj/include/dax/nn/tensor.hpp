#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace dax::nn {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Dense row-major tensor of rank 1..4. Batched activations use NCHW for
// convolutional data and NF for flat features; the leading dimension is
// always the batch.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  // NCHW accessors; only meaningful on rank-4 tensors.
  double& at(int n, int c, int h, int w) { return values_[offset(n, c, h, w)]; }
  const double& at(int n, int c, int h, int w) const { return values_[offset(n, c, h, w)]; }

  void fill(double v);
  // Same values under a new shape of equal element count.
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  bool operator==(const Tensor&) const = default;

 private:
  std::size_t offset(int n, int c, int h, int w) const {
    return ((static_cast<std::size_t>(n) * shape_[1] + c) * shape_[2] + h) * shape_[3] + w;
  }

  Shape shape_;
  std::vector<double> values_;
};

// A learnable tensor and its gradient buffer (always the same shape).
struct Parameter {
  Tensor value;
  Tensor grad;

  explicit Parameter(Shape shape = {1}) : value(shape), grad(shape) {}
  void zero_grad() { grad.fill(0.0); }
};

}  // namespace dax::nn
