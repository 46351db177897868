#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dax/nn/tensor.hpp"
#include "dax/rng.hpp"

namespace dax::nn {

enum class LayerKind { kConv2d = 0, kFullyConnected = 1, kSigmoid = 2 };

std::string to_string(LayerKind kind);

// Declarative description of one layer. For conv layers `in_channels` and for
// FC layers `in_features` may be left at 0, in which case the network fills
// them in from the preceding layer's output when it is built.
struct LayerSpec {
  LayerKind kind = LayerKind::kSigmoid;
  int kernel = 0;
  int in_channels = 0;
  int out_channels = 0;
  int stride = 1;
  int padding = 0;
  int in_features = 0;
  int out_features = 0;

  static LayerSpec conv(int in_ch, int out_ch, int kernel, int stride = 1, int padding = 0);
  static LayerSpec fully_connected(int in_features, int out_features);
  static LayerSpec sigmoid();

  bool operator==(const LayerSpec&) const = default;
};

// Conv output extent along one axis; non-positive means the config is invalid.
int conv_output_extent(int input, int kernel, int stride, int padding);

class Layer {
 public:
  virtual ~Layer() = default;

  virtual const LayerSpec& spec() const = 0;
  // Per-sample output shape (no batch dimension) for a per-sample input shape.
  virtual Shape output_shape(const Shape& sample_shape) const = 0;
  virtual Tensor forward(const Tensor& input) const = 0;
  // Adds parameter gradients into the grad buffers and returns dL/dinput.
  virtual Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output) = 0;
  virtual std::vector<Parameter*> parameters() { return {}; }
  virtual std::vector<const Parameter*> parameters() const { return {}; }
  virtual std::unique_ptr<Layer> clone() const = 0;
};

class Conv2d final : public Layer {
 public:
  explicit Conv2d(const LayerSpec& spec);

  const LayerSpec& spec() const override { return spec_; }
  Shape output_shape(const Shape& sample_shape) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::vector<const Parameter*> parameters() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Conv2d>(*this); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  LayerSpec spec_;
  Parameter weight_;  // [out, in, k, k]
  Parameter bias_;    // [out]
};

class FullyConnected final : public Layer {
 public:
  explicit FullyConnected(const LayerSpec& spec);

  const LayerSpec& spec() const override { return spec_; }
  Shape output_shape(const Shape& sample_shape) const override;
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output) override;
  std::vector<Parameter*> parameters() override { return {&weight_, &bias_}; }
  std::vector<const Parameter*> parameters() const override { return {&weight_, &bias_}; }
  std::unique_ptr<Layer> clone() const override { return std::make_unique<FullyConnected>(*this); }

  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

 private:
  LayerSpec spec_;
  Parameter weight_;  // [out, in]
  Parameter bias_;    // [out]
};

class Sigmoid final : public Layer {
 public:
  Sigmoid() : spec_(LayerSpec::sigmoid()) {}

  const LayerSpec& spec() const override { return spec_; }
  Shape output_shape(const Shape& sample_shape) const override { return sample_shape; }
  Tensor forward(const Tensor& input) const override;
  Tensor backward(const Tensor& input, const Tensor& output, const Tensor& grad_output) override;
  std::unique_ptr<Layer> clone() const override { return std::make_unique<Sigmoid>(*this); }

 private:
  LayerSpec spec_;
};

// Logistic function clamped to the open interval (0, 1).
double sigmoid(double x);

std::unique_ptr<Layer> make_layer(const LayerSpec& spec);

// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)), for weights
// and biases.
void initialize(Layer& layer, Rng& rng);

}  // namespace dax::nn
