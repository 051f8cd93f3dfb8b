#pragma once

// Central-difference gradient check for the templated network kernels, run
// in double precision on scaled-down networks of the production shape.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "dnnr/network.hpp"
#include "dnnr/random.hpp"

namespace dnnr::support {

struct NetShape {
  std::size_t emb_dim = 12;
  std::size_t rest_dim = 5;
  std::vector<std::uint32_t> bottleneck{8, 6, 4, 4};
  std::vector<std::uint32_t> trunk{10, 8, 7, 6, 5, 2};
  bool with_bottleneck = true;
};

struct DoubleNet {
  std::vector<DenseLayer<double>> layers;
  std::size_t bottleneck = 0;
  std::size_t emb_dim = 0;
  std::size_t input_dim = 0;
};

inline DoubleNet random_net(Rng& rng, const NetShape& shape) {
  DoubleNet net;
  auto add = [&](std::uint32_t in, std::uint32_t out, Activation act) {
    DenseLayer<double> l{in, out, act, std::vector<double>(std::size_t{in} * out), std::vector<double>(out)};
    const double a = std::sqrt(6.0 / in);
    for (auto& w : l.weight) w = (2.0 * rng.uniform() - 1.0) * a;
    for (auto& b : l.bias) b = (2.0 * rng.uniform() - 1.0) * 0.1;
    net.layers.push_back(std::move(l));
  };
  std::uint32_t width;
  if (shape.with_bottleneck) {
    net.emb_dim = shape.emb_dim;
    width = static_cast<std::uint32_t>(shape.emb_dim);
    for (std::size_t k = 0; k < shape.bottleneck.size(); ++k) {
      const bool last = k + 1 == shape.bottleneck.size();
      add(width, shape.bottleneck[k], last ? Activation::tanh : Activation::relu);
      width = shape.bottleneck[k];
    }
    net.bottleneck = shape.bottleneck.size();
    net.input_dim = shape.emb_dim + shape.rest_dim;
    width += static_cast<std::uint32_t>(shape.rest_dim);
  } else {
    net.input_dim = shape.rest_dim + shape.emb_dim;
    width = static_cast<std::uint32_t>(net.input_dim);
  }
  for (std::size_t k = 0; k < shape.trunk.size(); ++k) {
    const bool last = k + 1 == shape.trunk.size();
    add(width, shape.trunk[k], last ? Activation::linear : Activation::relu);
    width = shape.trunk[k];
  }
  return net;
}

inline std::vector<double> random_input(Rng& rng, const DoubleNet& net) {
  std::vector<double> x(net.input_dim);
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Embedding-like dense slice followed by sparse 0/1 features.
    x[i] = i < net.emb_dim || net.bottleneck == 0 ? rng.normal() * 0.5 : (rng.uniform() < 0.4 ? 1.0 : 0.0);
  }
  return x;
}

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
  std::string worst;
};

/// Relative error between analytic and numeric derivatives. Derivatives
/// below `floor` in magnitude are compared on an absolute scale.
inline double relative_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

/// Checks d(loss)/d(theta) for every parameter of one random network, where
/// loss = (sigmoid(logit1) - label)^2. With dropout, masks are sampled once
/// and replayed for every perturbed evaluation. Coordinates whose +-h
/// perturbation flips any ReLU on or off are non-differentiable there and
/// are counted as skipped.
inline GradCheckResult gradient_check(Rng& rng, const NetShape& shape, bool dropout,
                                      double h = 1e-6) {
  auto net = random_net(rng, shape);
  const auto x = random_input(rng, net);
  const double label = rng.uniform() < 0.5 ? 0.0 : 1.0;
  const double rate = dropout ? 0.2 : 0.0;
  const auto mode = dropout ? nn::Dropout::replay : nn::Dropout::off;

  nn::Trace<double> base;
  const double logit = nn::forward<double>(net.layers, net.bottleneck, net.emb_dim, x, base,
                                           dropout ? nn::Dropout::sample : nn::Dropout::off, rate, &rng);
  const double p = nn::sigmoid(logit);
  const double dlogit = 2.0 * (p - label) * p * (1.0 - p);
  auto grads = nn::make_grads<double>(net.layers);
  nn::backward<double>(net.layers, net.bottleneck, base, dropout, dlogit, grads);

  auto pattern = [&](const nn::Trace<double>& t) {
    std::vector<bool> on;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      if (net.layers[k].act != Activation::relu) continue;
      for (double v : t.outputs[k]) on.push_back(v > 0.0);
    }
    return on;
  };
  const auto base_pattern = pattern(base);

  auto loss_at = [&](nn::Trace<double>& t) {
    t.mask_trunk_in = base.mask_trunk_in;
    t.mask_last = base.mask_last;
    const double l = nn::forward<double>(net.layers, net.bottleneck, net.emb_dim, x, t, mode, rate, nullptr);
    const double q = nn::sigmoid(l);
    return (q - label) * (q - label);
  };

  GradCheckResult res;
  auto check = [&](double& param, double analytic, const std::string& name) {
    const double saved = param;
    nn::Trace<double> tp, tm;
    param = saved + h;
    const double lp = loss_at(tp);
    param = saved - h;
    const double lm = loss_at(tm);
    param = saved;
    if (pattern(tp) != base_pattern || pattern(tm) != base_pattern) {
      ++res.skipped_kinks;
      return;
    }
    const double numeric = (lp - lm) / (2.0 * h);
    const double err = relative_error(analytic, numeric);
    ++res.checked;
    if (err > res.max_rel_error) {
      res.max_rel_error = err;
      res.worst = name + " analytic=" + std::to_string(analytic) + " numeric=" + std::to_string(numeric);
    }
  };

  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto& l = net.layers[k];
    for (std::size_t i = 0; i < l.weight.size(); ++i) {
      check(l.weight[i], grads[k].weight[i], "layer " + std::to_string(k) + " w" + std::to_string(i));
    }
    for (std::size_t j = 0; j < l.bias.size(); ++j) {
      check(l.bias[j], grads[k].bias[j], "layer " + std::to_string(k) + " b" + std::to_string(j));
    }
  }
  return res;
}

}  // namespace dnnr::support
