#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dax/nn/layers.hpp"
#include "dax/nn/tensor.hpp"

namespace dax::nn {

enum class NetRole { kMask = 0, kStudent = 1, kClassifier = 2, kGeneric = 3 };

std::string to_string(NetRole role);

// Feed-forward chain of layers over a fixed per-sample input shape
// ([C, H, W] or [F]). Inputs carry an extra leading batch dimension.
//
// forward() caches activations for one backward(); infer() is const, keeps
// no state, and may be called concurrently on a net nobody is training.
class Network {
 public:
  Network() = default;
  Network(Shape sample_shape, const std::vector<LayerSpec>& specs, NetRole role, std::uint64_t seed);
  // Uninitialized weights (all zero); used by checkpoint loading.
  Network(Shape sample_shape, const std::vector<LayerSpec>& specs, NetRole role);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  // Appends a layer whose input matches the current output shape.
  void add_layer(std::unique_ptr<Layer> layer);

  Tensor forward(const Tensor& input);
  Tensor infer(const Tensor& input) const;
  // Accumulates parameter gradients (no implicit zeroing) and returns
  // dL/dinput. Requires a forward() since the previous backward().
  Tensor backward(const Tensor& grad_output);

  void zero_grad();
  bool has_pending_forward() const { return !activations_.empty(); }

  const Shape& input_shape() const { return sample_shape_; }
  Shape output_shape() const;
  NetRole role() const { return role_; }
  std::size_t num_layers() const { return layers_.size(); }
  Layer& layer(std::size_t i) { return *layers_[i]; }
  const Layer& layer(std::size_t i) const { return *layers_[i]; }
  std::vector<LayerSpec> specs() const;

  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  std::size_t parameter_count() const;

 private:
  void check_input(const Tensor& input) const;

  Shape sample_shape_;
  NetRole role_ = NetRole::kGeneric;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Shape> layer_inputs_;  // per-sample input shape of each layer
  std::vector<Tensor> activations_;  // [input, out_0, out_1, ...] of last forward
};

}  // namespace dax::nn
