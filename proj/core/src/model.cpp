#include "dnnr/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"

namespace dnnr {
namespace {

constexpr std::string_view kModelMagic = "DNNRMOD1";
constexpr std::uint32_t kModelVersion = 1;
constexpr std::size_t kBottleneckLayers = 4;
constexpr std::size_t kTrunkLayers = 6;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

Activation activation_for(const NetworkConfig& cfg, std::size_t k) {
  const std::size_t nb = cfg.bottleneck_widths.size();
  if (k + 1 == cfg.layer_count()) return Activation::linear;
  if (nb > 0 && k + 1 == nb) return Activation::tanh;
  return Activation::relu;
}

std::vector<DenseLayer<float>> empty_layers(const NetworkConfig& cfg) {
  std::vector<DenseLayer<float>> layers;
  std::uint32_t in = cfg.embedding_dim;
  auto add = [&](std::uint32_t out) {
    DenseLayer<float> l;
    l.in = in;
    l.out = out;
    l.act = activation_for(cfg, layers.size());
    l.weight.assign(static_cast<std::size_t>(in) * out, 0.0f);
    l.bias.assign(out, 0.0f);
    layers.push_back(std::move(l));
    in = out;
  };
  for (auto w : cfg.bottleneck_widths) add(w);
  in = static_cast<std::uint32_t>(cfg.trunk_input_dim());
  for (auto w : cfg.trunk_widths) add(w);
  return layers;
}

struct AdamState {
  std::vector<std::vector<float>> m_w, v_w, m_b, v_b;
  std::uint64_t step = 0;

  explicit AdamState(const std::vector<DenseLayer<float>>& layers) {
    for (const auto& l : layers) {
      m_w.emplace_back(l.weight.size(), 0.0f);
      v_w.emplace_back(l.weight.size(), 0.0f);
      m_b.emplace_back(l.bias.size(), 0.0f);
      v_b.emplace_back(l.bias.size(), 0.0f);
    }
  }
};

void adam_update(std::vector<float>& param, const std::vector<double>& grad,
                 std::vector<float>& m, std::vector<float>& v, double lr_t) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    const double mi = kAdamBeta1 * m[i] + (1.0 - kAdamBeta1) * g;
    const double vi = kAdamBeta2 * v[i] + (1.0 - kAdamBeta2) * g * g;
    m[i] = static_cast<float>(mi);
    v[i] = static_cast<float>(vi);
    param[i] = static_cast<float>(param[i] - lr_t * mi / (std::sqrt(vi) + kAdamEps));
  }
}

void sgd_update(std::vector<float>& param, const std::vector<double>& grad, double lr) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    param[i] = static_cast<float>(param[i] - lr * grad[i]);
  }
}

}  // namespace

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  throw UsageError("unknown optimizer '" + std::string(name) + "' (expected adam or sgd)");
}

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

NetworkConfig NetworkConfig::for_features(std::size_t input_dim, std::size_t embedding_dim) {
  NetworkConfig cfg;
  cfg.input_dim = static_cast<std::uint32_t>(input_dim);
  cfg.embedding_dim = static_cast<std::uint32_t>(embedding_dim);
  if (embedding_dim == 0) cfg.bottleneck_widths.clear();
  return cfg;
}

std::size_t NetworkConfig::trunk_input_dim() const noexcept {
  if (bottleneck_widths.empty()) return input_dim;
  return bottleneck_widths.back() + (input_dim - embedding_dim);
}

void NetworkConfig::validate() const {
  auto fail = [](const std::string& why) { throw UsageError("network config: " + why); };
  if (input_dim == 0) fail("input_dim must be positive");
  if (embedding_dim > input_dim) fail("embedding_dim exceeds input_dim");
  if (trunk_widths.size() != kTrunkLayers) {
    fail("trunk must have " + std::to_string(kTrunkLayers) + " layers, got " +
         std::to_string(trunk_widths.size()));
  }
  if (embedding_dim > 0 && bottleneck_widths.size() != kBottleneckLayers) {
    fail("bottleneck must have " + std::to_string(kBottleneckLayers) + " layers, got " +
         std::to_string(bottleneck_widths.size()) + " (10 layers in total)");
  }
  if (embedding_dim == 0 && !bottleneck_widths.empty()) {
    fail("bottleneck layers given but embedding_dim is 0");
  }
  if (trunk_widths.back() != 2) fail("output layer must be 2 wide");
  for (auto w : bottleneck_widths) {
    if (w == 0) fail("zero-width layer");
  }
  for (auto w : trunk_widths) {
    if (w == 0) fail("zero-width layer");
  }
  if (!(dropout_rate >= 0.0f && dropout_rate < 1.0f)) fail("dropout_rate must be in [0, 1)");
  if (epochs == 0) fail("epochs must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(learning_rate > 0.0f) || !std::isfinite(learning_rate)) {
    fail("learning_rate must be positive");
  }
}

UserModel init_network(const NetworkConfig& config, std::string user_id) {
  config.validate();
  UserModel model{std::move(user_id), config, empty_layers(config), {}};
  Rng rng(mix64(config.seed));
  for (auto& l : model.layers) {
    const double limit = l.act == Activation::relu
                             ? std::sqrt(6.0 / l.in)
                             : std::sqrt(6.0 / (static_cast<double>(l.in) + l.out));
    for (auto& w : l.weight) w = static_cast<float>((2.0 * rng.uniform() - 1.0) * limit);
  }
  return model;
}

double forward(const UserModel& model, std::span<const float> features, bool train_mode,
               Rng* rng) {
  const auto& cfg = model.config;
  if (features.size() != cfg.input_dim) {
    throw NumericError("feature length " + std::to_string(features.size()) +
                       " does not match model input_dim " + std::to_string(cfg.input_dim));
  }
  if (train_mode && rng == nullptr) throw UsageError("forward: train_mode needs an rng");
  nn::Trace<float> trace;
  const float logit = nn::forward<float>(
      model.layers, cfg.bottleneck_widths.size(), cfg.embedding_dim, features, trace,
      train_mode ? nn::Dropout::sample : nn::Dropout::off, cfg.dropout_rate, rng);
  return nn::sigmoid(logit);
}

void train_user(UserModel& model, const SyntheticPool& pool) {
  const auto& cfg = model.config;
  if (pool.entries.empty()) throw DataError("user " + pool.user_id + ": empty training pool");
  for (const auto& e : pool.entries) {
    if (e.features.size() != cfg.input_dim) {
      throw NumericError("user " + pool.user_id + ": pool entry " + e.news_id + " has " +
                         std::to_string(e.features.size()) + " features, model expects " +
                         std::to_string(cfg.input_dim));
    }
  }
  if (pool.positives == 0 || pool.negatives == 0) {
    spdlog::warn("user {}: single-class pool ({} positives, {} negatives)", pool.user_id,
                 pool.positives, pool.negatives);
  }

  const std::size_t n = pool.entries.size();
  const std::size_t nb = cfg.bottleneck_widths.size();
  const bool dropout_active = cfg.dropout_rate > 0.0f;
  std::span<const DenseLayer<float>> layers(model.layers);

  Rng rng(mix64(cfg.seed ^ 0x5eed5eed5eed5eedull));
  AdamState adam(model.layers);
  auto grads = nn::make_grads(layers);
  nn::Trace<float> trace;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  model.loss_trace.clear();
  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const double batch = static_cast<double>(end - start);
      for (auto& g : grads) {
        std::fill(g.weight.begin(), g.weight.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      for (std::size_t b = start; b < end; ++b) {
        const auto& e = pool.entries[order[b]];
        const float logit = nn::forward<float>(
            layers, nb, cfg.embedding_dim, e.features, trace,
            dropout_active ? nn::Dropout::sample : nn::Dropout::off, cfg.dropout_rate, &rng);
        const double p = nn::sigmoid(logit);
        const double err = p - static_cast<double>(e.label);
        epoch_loss += err * err;
        const double dlogit = 2.0 * err * p * (1.0 - p) / batch;
        nn::backward<float>(layers, nb, trace, dropout_active, dlogit, grads);
      }

      if (cfg.optimizer == OptimizerKind::adam) {
        ++adam.step;
        const double t = static_cast<double>(adam.step);
        const double lr_t = cfg.learning_rate * std::sqrt(1.0 - std::pow(kAdamBeta2, t)) /
                            (1.0 - std::pow(kAdamBeta1, t));
        for (std::size_t k = 0; k < model.layers.size(); ++k) {
          adam_update(model.layers[k].weight, grads[k].weight, adam.m_w[k], adam.v_w[k], lr_t);
          adam_update(model.layers[k].bias, grads[k].bias, adam.m_b[k], adam.v_b[k], lr_t);
        }
      } else {
        for (std::size_t k = 0; k < model.layers.size(); ++k) {
          sgd_update(model.layers[k].weight, grads[k].weight, cfg.learning_rate);
          sgd_update(model.layers[k].bias, grads[k].bias, cfg.learning_rate);
        }
      }
    }
    const double mean_loss = epoch_loss / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw NumericError("user " + pool.user_id + ": loss diverged at epoch " +
                         std::to_string(epoch + 1));
    }
    model.loss_trace.push_back(mean_loss);
  }
}

std::vector<double> predict(const UserModel& model, std::span<const FeatureVector> candidates) {
  std::vector<double> scores;
  scores.reserve(candidates.size());
  for (const auto& c : candidates) scores.push_back(forward(model, c, false));
  return scores;
}

std::vector<ScoredNews> predict(const UserModel& model, std::span<const std::string> news_ids,
                                const FeatureEncoder& encoder) {
  std::vector<ScoredNews> out;
  out.reserve(news_ids.size());
  for (const auto& id : news_ids) {
    out.push_back(ScoredNews{id, forward(model, encoder.encode(id), false)});
  }
  return out;
}

std::string serialize_model(const UserModel& model) {
  const auto& c = model.config;
  ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelVersion);
  w.u32(c.input_dim);
  w.u32(c.embedding_dim);
  w.u32(static_cast<std::uint32_t>(c.bottleneck_widths.size()));
  for (auto x : c.bottleneck_widths) w.u32(x);
  w.u32(static_cast<std::uint32_t>(c.trunk_widths.size()));
  for (auto x : c.trunk_widths) w.u32(x);
  w.f32(c.dropout_rate);
  w.u32(c.epochs);
  w.u32(c.batch_size);
  w.f32(c.learning_rate);
  w.u32(static_cast<std::uint32_t>(c.optimizer));
  w.u64(c.seed);
  w.str16(model.user_id);
  w.u32(static_cast<std::uint32_t>(model.loss_trace.size()));
  for (double l : model.loss_trace) w.f64(l);
  w.u32(static_cast<std::uint32_t>(model.layers.size()));
  for (const auto& l : model.layers) {
    w.u32(l.in);
    w.u32(l.out);
    for (float x : l.weight) w.f32(x);
    for (float x : l.bias) w.f32(x);
  }
  return std::move(w).seal();
}

UserModel deserialize_model(std::string_view bytes, std::string_view what_view) {
  const std::string what(what_view);
  ByteReader r(verify_sealed(bytes, what));
  if (r.raw(kModelMagic.size()) != kModelMagic) throw FormatError(what + ": bad magic");
  if (const auto v = r.u32(); v != kModelVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(v));
  }
  NetworkConfig c;
  c.input_dim = r.u32();
  c.embedding_dim = r.u32();
  c.bottleneck_widths.resize(r.u32());
  for (auto& x : c.bottleneck_widths) x = r.u32();
  c.trunk_widths.resize(r.u32());
  for (auto& x : c.trunk_widths) x = r.u32();
  c.dropout_rate = r.f32();
  c.epochs = r.u32();
  c.batch_size = r.u32();
  c.learning_rate = r.f32();
  const auto opt = r.u32();
  if (opt > 1) throw FormatError(what + ": unknown optimizer");
  c.optimizer = static_cast<OptimizerKind>(opt);
  c.seed = r.u64();
  try {
    c.validate();
  } catch (const UsageError& e) {
    throw FormatError(what + ": " + e.what());
  }

  UserModel model{r.str16(), c, empty_layers(c), {}};
  model.loss_trace.resize(r.u32());
  for (auto& l : model.loss_trace) l = r.f64();
  if (r.u32() != model.layers.size()) throw FormatError(what + ": layer count mismatch");
  for (auto& l : model.layers) {
    if (r.u32() != l.in || r.u32() != l.out) throw FormatError(what + ": layer shape mismatch");
    for (auto& x : l.weight) x = r.f32();
    for (auto& x : l.bias) x = r.f32();
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes before checksum");
  return model;
}

void save_model(const UserModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, serialize_model(model));
}

UserModel load_model(const std::filesystem::path& path) {
  return deserialize_model(read_file(path), "model " + path.string());
}

}  // namespace dnnr
