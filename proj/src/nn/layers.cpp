#include "dax/nn/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dax/errors.hpp"

namespace dax::nn {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv2d:
      return "conv2d";
    case LayerKind::kFullyConnected:
      return "fully-connected";
    case LayerKind::kSigmoid:
      return "sigmoid";
  }
  return "unknown";
}

LayerSpec LayerSpec::conv(int in_ch, int out_ch, int kernel, int stride, int padding) {
  LayerSpec s;
  s.kind = LayerKind::kConv2d;
  s.in_channels = in_ch;
  s.out_channels = out_ch;
  s.kernel = kernel;
  s.stride = stride;
  s.padding = padding;
  return s;
}

LayerSpec LayerSpec::fully_connected(int in_features, int out_features) {
  LayerSpec s;
  s.kind = LayerKind::kFullyConnected;
  s.in_features = in_features;
  s.out_features = out_features;
  return s;
}

LayerSpec LayerSpec::sigmoid() { return LayerSpec{}; }

int conv_output_extent(int input, int kernel, int stride, int padding) {
  if (stride <= 0) return 0;
  const int span = input + 2 * padding - kernel;
  if (span < 0) return 0;
  return span / stride + 1;
}

double sigmoid(double x) {
  constexpr double kLo = std::numeric_limits<double>::min();
  constexpr double kHi = 1.0 - 0x1.0p-53;
  const double y = x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(y, kLo, kHi);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(const LayerSpec& spec)
    : spec_(spec),
      weight_({spec.out_channels, spec.in_channels, spec.kernel, spec.kernel}),
      bias_({spec.out_channels}) {
  if (spec.kind != LayerKind::kConv2d) throw ConfigError("Conv2d built from a non-conv spec");
  if (spec.stride <= 0 || spec.padding < 0) throw ConfigError("conv2d stride must be > 0 and padding >= 0");
}

Shape Conv2d::output_shape(const Shape& s) const {
  if (s.size() != 3 || s[0] != spec_.in_channels) {
    throw ConfigError("conv2d expects [" + std::to_string(spec_.in_channels) + ",H,W] input, got " +
                      shape_string(s));
  }
  const int oh = conv_output_extent(s[1], spec_.kernel, spec_.stride, spec_.padding);
  const int ow = conv_output_extent(s[2], spec_.kernel, spec_.stride, spec_.padding);
  if (oh <= 0 || ow <= 0) {
    throw ConfigError("conv2d kernel " + std::to_string(spec_.kernel) + " does not fit input " + shape_string(s));
  }
  return {spec_.out_channels, oh, ow};
}

Tensor Conv2d::forward(const Tensor& in) const {
  const Shape os = output_shape({in.dim(1), in.dim(2), in.dim(3)});
  const int n_batch = in.dim(0), ic_n = in.dim(1), ih_n = in.dim(2), iw_n = in.dim(3);
  const int oc_n = os[0], oh_n = os[1], ow_n = os[2];
  const int k = spec_.kernel, s = spec_.stride, p = spec_.padding;
  Tensor out({n_batch, oc_n, oh_n, ow_n});
  const double* w = weight_.value.data();
  for (int n = 0; n < n_batch; ++n) {
    for (int oc = 0; oc < oc_n; ++oc) {
      double* o = &out.at(n, oc, 0, 0);
      std::fill(o, o + static_cast<std::size_t>(oh_n) * ow_n, bias_.value[oc]);
      for (int ic = 0; ic < ic_n; ++ic) {
        const double* x = &in.at(n, ic, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const double wv = w[((static_cast<std::size_t>(oc) * ic_n + ic) * k + kh) * k + kw];
            for (int oh = 0; oh < oh_n; ++oh) {
              const int ih = oh * s - p + kh;
              if (ih < 0 || ih >= ih_n) continue;
              const double* xr = x + static_cast<std::size_t>(ih) * iw_n;
              double* orow = o + static_cast<std::size_t>(oh) * ow_n;
              for (int ow = 0; ow < ow_n; ++ow) {
                const int iw = ow * s - p + kw;
                if (iw < 0 || iw >= iw_n) continue;
                orow[ow] += wv * xr[iw];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& in, const Tensor& /*output*/, const Tensor& g) {
  const int n_batch = in.dim(0), ic_n = in.dim(1), ih_n = in.dim(2), iw_n = in.dim(3);
  const int oc_n = g.dim(1), oh_n = g.dim(2), ow_n = g.dim(3);
  const int k = spec_.kernel, s = spec_.stride, p = spec_.padding;
  Tensor grad_in(in.shape());
  const double* w = weight_.value.data();
  double* gw = weight_.grad.data();
  for (int n = 0; n < n_batch; ++n) {
    for (int oc = 0; oc < oc_n; ++oc) {
      const double* go = &g.at(n, oc, 0, 0);
      double bsum = 0.0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(oh_n) * ow_n; ++i) bsum += go[i];
      bias_.grad[oc] += bsum;
      for (int ic = 0; ic < ic_n; ++ic) {
        const double* x = &in.at(n, ic, 0, 0);
        double* gx = &grad_in.at(n, ic, 0, 0);
        for (int kh = 0; kh < k; ++kh) {
          for (int kw = 0; kw < k; ++kw) {
            const std::size_t widx = ((static_cast<std::size_t>(oc) * ic_n + ic) * k + kh) * k + kw;
            const double wv = w[widx];
            double acc = 0.0;
            for (int oh = 0; oh < oh_n; ++oh) {
              const int ih = oh * s - p + kh;
              if (ih < 0 || ih >= ih_n) continue;
              const double* xr = x + static_cast<std::size_t>(ih) * iw_n;
              double* gxr = gx + static_cast<std::size_t>(ih) * iw_n;
              const double* gor = go + static_cast<std::size_t>(oh) * ow_n;
              for (int ow = 0; ow < ow_n; ++ow) {
                const int iw = ow * s - p + kw;
                if (iw < 0 || iw >= iw_n) continue;
                acc += gor[ow] * xr[iw];
                gxr[iw] += gor[ow] * wv;
              }
            }
            gw[widx] += acc;
          }
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// FullyConnected

FullyConnected::FullyConnected(const LayerSpec& spec)
    : spec_(spec), weight_({spec.out_features, spec.in_features}), bias_({spec.out_features}) {
  if (spec.kind != LayerKind::kFullyConnected) throw ConfigError("FullyConnected built from a non-FC spec");
}

Shape FullyConnected::output_shape(const Shape& s) const {
  if (static_cast<int>(shape_size(s)) != spec_.in_features) {
    throw ConfigError("fully-connected expects " + std::to_string(spec_.in_features) + " features, got " +
                      shape_string(s));
  }
  return {spec_.out_features};
}

Tensor FullyConnected::forward(const Tensor& in) const {
  const int n_batch = in.dim(0);
  const int f_in = spec_.in_features, f_out = spec_.out_features;
  if (static_cast<int>(in.size() / n_batch) != f_in) {
    throw ConfigError("fully-connected expects " + std::to_string(f_in) + " features per sample");
  }
  Tensor out({n_batch, f_out});
  const double* w = weight_.value.data();
  for (int n = 0; n < n_batch; ++n) {
    const double* x = in.data() + static_cast<std::size_t>(n) * f_in;
    for (int o = 0; o < f_out; ++o) {
      const double* wr = w + static_cast<std::size_t>(o) * f_in;
      double acc = bias_.value[o];
      for (int f = 0; f < f_in; ++f) acc += wr[f] * x[f];
      out[static_cast<std::size_t>(n) * f_out + o] = acc;
    }
  }
  return out;
}

Tensor FullyConnected::backward(const Tensor& in, const Tensor& /*output*/, const Tensor& g) {
  const int n_batch = in.dim(0);
  const int f_in = spec_.in_features, f_out = spec_.out_features;
  Tensor grad_in(in.shape());
  const double* w = weight_.value.data();
  double* gw = weight_.grad.data();
  for (int n = 0; n < n_batch; ++n) {
    const double* x = in.data() + static_cast<std::size_t>(n) * f_in;
    double* gx = grad_in.data() + static_cast<std::size_t>(n) * f_in;
    for (int o = 0; o < f_out; ++o) {
      const double go = g[static_cast<std::size_t>(n) * f_out + o];
      bias_.grad[o] += go;
      const double* wr = w + static_cast<std::size_t>(o) * f_in;
      double* gwr = gw + static_cast<std::size_t>(o) * f_in;
      for (int f = 0; f < f_in; ++f) {
        gwr[f] += go * x[f];
        gx[f] += go * wr[f];
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Sigmoid

Tensor Sigmoid::forward(const Tensor& in) const {
  Tensor out(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = sigmoid(in[i]);
  return out;
}

Tensor Sigmoid::backward(const Tensor& /*input*/, const Tensor& out, const Tensor& g) {
  Tensor grad_in(out.shape());
  for (std::size_t i = 0; i < out.size(); ++i) grad_in[i] = g[i] * out[i] * (1.0 - out[i]);
  return grad_in;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Layer> make_layer(const LayerSpec& spec) {
  switch (spec.kind) {
    case LayerKind::kConv2d:
      return std::make_unique<Conv2d>(spec);
    case LayerKind::kFullyConnected:
      return std::make_unique<FullyConnected>(spec);
    case LayerKind::kSigmoid:
      return std::make_unique<Sigmoid>();
  }
  throw ConfigError("unknown layer kind");
}

void initialize(Layer& layer, Rng& rng) {
  const LayerSpec& s = layer.spec();
  int fan_in = 0;
  if (s.kind == LayerKind::kConv2d) fan_in = s.in_channels * s.kernel * s.kernel;
  if (s.kind == LayerKind::kFullyConnected) fan_in = s.in_features;
  if (fan_in <= 0) return;
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Parameter* p : layer.parameters()) {
    for (double& v : p->value.values()) v = rng.uniform(-bound, bound);
    p->zero_grad();
  }
}

}  // namespace dax::nn
