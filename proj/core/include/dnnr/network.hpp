#pragma once

// Forward and backward passes for the per-user network, templated on the
// scalar type so the same code runs in float (training) and double
// (finite-difference checks).
//
// Layout, for a feature vector x = [emb | rest]:
//
//   emb -> bottleneck (ReLU, ReLU, ReLU, Tanh) -> h
//   z   = [h | rest]                 (z = x when there is no bottleneck)
//   zn  = (z - mean(z)) / std(z)     per example, no learned affine
//   d   = dropout(zn)
//   trunk: ReLU x5 with dropout before the last layer, then a linear 2-wide
//   output. The score is sigmoid(output[1]).

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dnnr/error.hpp"
#include "dnnr/random.hpp"

namespace dnnr {

enum class Activation : std::uint8_t { relu, tanh, linear };

template <class T>
struct DenseLayer {
  std::uint32_t in = 0;
  std::uint32_t out = 0;
  Activation act = Activation::relu;
  std::vector<T> weight;  ///< in x out, row-major
  std::vector<T> bias;    ///< out
};

namespace nn {

inline constexpr double kNormEps = 1e-10;

template <class T>
struct Trace {
  std::vector<std::vector<T>> inputs;   ///< per layer, after any dropout mask
  std::vector<std::vector<T>> outputs;  ///< per layer, post-activation
  std::vector<T> normalized;            ///< zn
  double inv_std = 1.0;
  std::vector<T> mask_trunk_in;  ///< empty when dropout is off
  std::vector<T> mask_last;
};

enum class Dropout {
  off,     ///< inference
  sample,  ///< draw fresh masks from the rng into the trace
  replay,  ///< reuse the masks already in the trace
};

template <class T>
void dense_forward(const DenseLayer<T>& layer, std::span<const T> in, std::span<T> out) {
  for (std::uint32_t j = 0; j < layer.out; ++j) out[j] = layer.bias[j];
  for (std::uint32_t i = 0; i < layer.in; ++i) {
    const T xi = in[i];
    const T* w = layer.weight.data() + static_cast<std::size_t>(i) * layer.out;
    for (std::uint32_t j = 0; j < layer.out; ++j) out[j] += xi * w[j];
  }
  switch (layer.act) {
    case Activation::relu:
      for (auto& v : out) v = v > T(0) ? v : T(0);
      break;
    case Activation::tanh:
      for (auto& v : out) v = std::tanh(v);
      break;
    case Activation::linear:
      break;
  }
}

template <class T>
void check_finite(std::span<const T> v, std::size_t layer_number) {
  for (T x : v) {
    if (!std::isfinite(x)) {
      throw NumericError("non-finite activation at layer " + std::to_string(layer_number));
    }
  }
}

template <class T>
void fill_mask(std::vector<T>& mask, std::size_t n, double rate, Rng& rng) {
  mask.resize(n);
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& m : mask) m = rng.uniform() < rate ? T(0) : keep_scale;
}

/// Runs the network on one example and returns the channel-1 logit.
/// `bottleneck` is the number of leading layers that act on the embedding
/// slice [0, embedding_dim).
template <class T>
T forward(std::span<const DenseLayer<T>> layers, std::size_t bottleneck, std::size_t embedding_dim,
          std::span<const T> x, Trace<T>& trace, Dropout dropout, double rate, Rng* rng) {
  const std::size_t n_layers = layers.size();
  trace.inputs.resize(n_layers);
  trace.outputs.resize(n_layers);

  std::vector<T> z;
  if (bottleneck > 0) {
    std::span<const T> h = x.subspan(0, embedding_dim);
    for (std::size_t k = 0; k < bottleneck; ++k) {
      trace.inputs[k].assign(h.begin(), h.end());
      trace.outputs[k].resize(layers[k].out);
      dense_forward<T>(layers[k], trace.inputs[k], trace.outputs[k]);
      check_finite<T>(trace.outputs[k], k + 1);
      h = trace.outputs[k];
    }
    z.assign(h.begin(), h.end());
    z.insert(z.end(), x.begin() + static_cast<std::ptrdiff_t>(embedding_dim), x.end());
  } else {
    z.assign(x.begin(), x.end());
  }

  double mean = 0.0;
  for (T v : z) mean += static_cast<double>(v);
  mean /= static_cast<double>(z.size());
  double var = 0.0;
  for (T v : z) var += (static_cast<double>(v) - mean) * (static_cast<double>(v) - mean);
  var /= static_cast<double>(z.size());
  trace.inv_std = 1.0 / std::sqrt(var + kNormEps);
  trace.normalized.resize(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    trace.normalized[i] = static_cast<T>((static_cast<double>(z[i]) - mean) * trace.inv_std);
  }

  const bool use_dropout = dropout != Dropout::off && rate > 0.0;
  if (dropout == Dropout::sample && use_dropout) {
    fill_mask(trace.mask_trunk_in, z.size(), rate, *rng);
    fill_mask(trace.mask_last, layers[n_layers - 1].in, rate, *rng);
  }

  std::vector<T> h = trace.normalized;
  if (use_dropout) {
    for (std::size_t i = 0; i < h.size(); ++i) h[i] *= trace.mask_trunk_in[i];
  }
  for (std::size_t k = bottleneck; k < n_layers; ++k) {
    if (k + 1 == n_layers && use_dropout) {
      for (std::size_t i = 0; i < h.size(); ++i) h[i] *= trace.mask_last[i];
    }
    trace.inputs[k] = std::move(h);
    trace.outputs[k].resize(layers[k].out);
    dense_forward<T>(layers[k], trace.inputs[k], trace.outputs[k]);
    check_finite<T>(trace.outputs[k], k + 1);
    h = trace.outputs[k];
  }
  return trace.outputs.back()[1];
}

/// Gradient accumulators, always 64-bit.
struct LayerGrad {
  std::vector<double> weight;
  std::vector<double> bias;
};

template <class T>
std::vector<LayerGrad> make_grads(std::span<const DenseLayer<T>> layers) {
  std::vector<LayerGrad> g(layers.size());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    g[k].weight.assign(layers[k].weight.size(), 0.0);
    g[k].bias.assign(layers[k].bias.size(), 0.0);
  }
  return g;
}

/// Propagates d(loss)/d(logit1) back through a trace produced by forward(),
/// adding parameter gradients into `grads`.
template <class T>
void backward(std::span<const DenseLayer<T>> layers, std::size_t bottleneck,
              const Trace<T>& trace, bool dropout_active, double dlogit1,
              std::span<LayerGrad> grads) {
  const std::size_t n_layers = layers.size();
  std::vector<double> delta = {0.0, dlogit1};  // d loss / d layer output
  std::vector<double> din;

  auto step = [&](std::size_t k) {
    const auto& layer = layers[k];
    const auto& out = trace.outputs[k];
    const auto& in = trace.inputs[k];
    // d loss / d pre-activation
    for (std::uint32_t j = 0; j < layer.out; ++j) {
      const double o = static_cast<double>(out[j]);
      switch (layer.act) {
        case Activation::relu: delta[j] = o > 0.0 ? delta[j] : 0.0; break;
        case Activation::tanh: delta[j] *= 1.0 - o * o; break;
        case Activation::linear: break;
      }
    }
    auto& g = grads[k];
    din.assign(layer.in, 0.0);
    for (std::uint32_t i = 0; i < layer.in; ++i) {
      const double xi = static_cast<double>(in[i]);
      const T* w = layer.weight.data() + static_cast<std::size_t>(i) * layer.out;
      double* gw = g.weight.data() + static_cast<std::size_t>(i) * layer.out;
      double acc = 0.0;
      for (std::uint32_t j = 0; j < layer.out; ++j) {
        acc += static_cast<double>(w[j]) * delta[j];
        gw[j] += xi * delta[j];
      }
      din[i] = acc;
    }
    for (std::uint32_t j = 0; j < layer.out; ++j) g.bias[j] += delta[j];
    delta.swap(din);
  };

  for (std::size_t k = n_layers; k-- > bottleneck;) {
    step(k);
    if (k + 1 == n_layers && dropout_active) {
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= trace.mask_last[i];
    }
  }

  if (bottleneck == 0) return;

  // Back through dropout and the per-example standardization.
  const auto& zn = trace.normalized;
  const std::size_t n = zn.size();
  if (dropout_active) {
    for (std::size_t i = 0; i < n; ++i) delta[i] *= trace.mask_trunk_in[i];
  }
  double mean_d = 0.0, mean_dy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean_d += delta[i];
    mean_dy += delta[i] * static_cast<double>(zn[i]);
  }
  mean_d /= static_cast<double>(n);
  mean_dy /= static_cast<double>(n);
  const std::size_t h_width = layers[bottleneck - 1].out;
  std::vector<double> dz(h_width);
  for (std::size_t i = 0; i < h_width; ++i) {
    dz[i] = trace.inv_std * (delta[i] - mean_d - static_cast<double>(zn[i]) * mean_dy);
  }
  delta = std::move(dz);
  for (std::size_t k = bottleneck; k-- > 0;) step(k);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace nn
}  // namespace dnnr
