#include "dax/nn/network.hpp"

#include <utility>

#include "dax/errors.hpp"

namespace dax::nn {

std::string to_string(NetRole role) {
  switch (role) {
    case NetRole::kMask:
      return "mask";
    case NetRole::kStudent:
      return "student";
    case NetRole::kClassifier:
      return "classifier";
    case NetRole::kGeneric:
      return "generic";
  }
  return "unknown";
}

namespace {

// Fills in inferred input sizes and checks the spec against the incoming
// per-sample shape.
LayerSpec resolve(LayerSpec spec, const Shape& in, std::size_t index) {
  const std::string where = "layer " + std::to_string(index) + " (" + to_string(spec.kind) + "): ";
  switch (spec.kind) {
    case LayerKind::kConv2d:
      if (in.size() != 3) throw ConfigError(where + "needs [C,H,W] input, got " + shape_string(in));
      if (spec.in_channels == 0) spec.in_channels = in[0];
      if (spec.in_channels != in[0]) {
        throw ConfigError(where + "declares " + std::to_string(spec.in_channels) + " input channels, got " +
                          shape_string(in));
      }
      if (spec.kernel <= 0 || spec.out_channels <= 0) throw ConfigError(where + "kernel and out_channels must be > 0");
      if (spec.stride <= 0 || spec.padding < 0) throw ConfigError(where + "stride must be > 0 and padding >= 0");
      if (conv_output_extent(in[1], spec.kernel, spec.stride, spec.padding) <= 0 ||
          conv_output_extent(in[2], spec.kernel, spec.stride, spec.padding) <= 0) {
        throw ConfigError(where + "output extent is not positive for input " + shape_string(in));
      }
      break;
    case LayerKind::kFullyConnected: {
      const int features = static_cast<int>(shape_size(in));
      if (spec.in_features == 0) spec.in_features = features;
      if (spec.in_features != features) {
        throw ConfigError(where + "declares " + std::to_string(spec.in_features) + " input features, got " +
                          std::to_string(features));
      }
      if (spec.out_features <= 0) throw ConfigError(where + "out_features must be > 0");
      break;
    }
    case LayerKind::kSigmoid:
      break;
  }
  return spec;
}

}  // namespace

Network::Network(Shape sample_shape, const std::vector<LayerSpec>& specs, NetRole role)
    : sample_shape_(std::move(sample_shape)), role_(role) {
  if (sample_shape_.empty() || sample_shape_.size() > 3) {
    throw ConfigError("network input must be [F] or [C,H,W], got " + shape_string(sample_shape_));
  }
  for (const LayerSpec& spec : specs) add_layer(make_layer(resolve(spec, output_shape(), layers_.size())));
}

Network::Network(Shape sample_shape, const std::vector<LayerSpec>& specs, NetRole role, std::uint64_t seed)
    : Network(std::move(sample_shape), specs, role) {
  Rng rng(seed);
  for (auto& layer : layers_) initialize(*layer, rng);
}

Network::Network(const Network& other)
    : sample_shape_(other.sample_shape_), role_(other.role_), layer_inputs_(other.layer_inputs_) {
  for (const auto& layer : other.layers_) layers_.push_back(layer->clone());
}

Network& Network::operator=(const Network& other) {
  if (this != &other) {
    Network copy(other);
    *this = std::move(copy);
  }
  return *this;
}

void Network::add_layer(std::unique_ptr<Layer> layer) {
  const Shape in = output_shape();
  try {
    (void)layer->output_shape(in);
  } catch (const ConfigError& e) {
    throw ConfigError("layer " + std::to_string(layers_.size()) + ": " + e.what());
  }
  layer_inputs_.push_back(in);
  layers_.push_back(std::move(layer));
  activations_.clear();
}

Shape Network::output_shape() const {
  Shape s = sample_shape_;
  for (const auto& layer : layers_) s = layer->output_shape(s);
  return s;
}

std::vector<LayerSpec> Network::specs() const {
  std::vector<LayerSpec> out;
  for (const auto& layer : layers_) out.push_back(layer->spec());
  return out;
}

void Network::check_input(const Tensor& input) const {
  Shape expected = sample_shape_;
  Shape got(input.shape().begin() + (input.rank() > 0 ? 1 : 0), input.shape().end());
  if (input.rank() != static_cast<int>(expected.size()) + 1 || got != expected) {
    throw ConfigError("layer 0 (" + (layers_.empty() ? std::string("input") : to_string(layers_[0]->spec().kind)) +
                      "): expected batch of " + shape_string(expected) + ", got " + shape_string(input.shape()));
  }
}

Tensor Network::forward(const Tensor& input) {
  check_input(input);
  activations_.clear();
  activations_.push_back(input);
  for (const auto& layer : layers_) activations_.push_back(layer->forward(activations_.back()));
  return activations_.back();
}

Tensor Network::infer(const Tensor& input) const {
  check_input(input);
  Tensor x = input;
  for (const auto& layer : layers_) x = layer->forward(x);
  return x;
}

Tensor Network::backward(const Tensor& grad_output) {
  if (activations_.empty()) throw StateError("backward called without a preceding forward");
  if (grad_output.shape() != activations_.back().shape()) {
    throw ConfigError("gradient shape " + shape_string(grad_output.shape()) + " does not match output " +
                      shape_string(activations_.back().shape()));
  }
  Tensor g = grad_output;
  for (std::size_t i = layers_.size(); i-- > 0;) {
    g = layers_[i]->backward(activations_[i], activations_[i + 1], g);
  }
  activations_.clear();
  return g;
}

void Network::zero_grad() {
  for (Parameter* p : parameters()) p->zero_grad();
}

std::vector<Parameter*> Network::parameters() {
  std::vector<Parameter*> out;
  for (auto& layer : layers_) {
    for (Parameter* p : layer->parameters()) out.push_back(p);
  }
  return out;
}

std::vector<const Parameter*> Network::parameters() const {
  std::vector<const Parameter*> out;
  for (const auto& layer : layers_) {
    for (const Parameter* p : std::as_const(*layer).parameters()) out.push_back(p);
  }
  return out;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : parameters()) n += p->value.size();
  return n;
}

}  // namespace dax::nn
