#pragma once

// Per-user click model: configuration, initialization, training, scoring and
// the DNNR-MOD file format.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dnnr/encoder.hpp"
#include "dnnr/network.hpp"
#include "dnnr/sampler.hpp"

namespace dnnr {

enum class OptimizerKind : std::uint32_t { adam = 0, sgd = 1 };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(OptimizerKind kind) noexcept;

struct NetworkConfig {
  std::uint32_t input_dim = 612;
  /// Width of the leading embedding slice routed through the bottleneck.
  /// 0 disables the bottleneck (feature sets without embeddings).
  std::uint32_t embedding_dim = 384;
  std::vector<std::uint32_t> bottleneck_widths{256, 128, 64, 64};
  std::vector<std::uint32_t> trunk_widths{256, 128, 64, 32, 16, 2};
  float dropout_rate = 0.2f;
  std::uint32_t epochs = 15;
  std::uint32_t batch_size = 60;
  float learning_rate = 1e-3f;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 0;

  /// Default widths for a feature layout; drops the bottleneck when
  /// embedding_dim is 0.
  static NetworkConfig for_features(std::size_t input_dim, std::size_t embedding_dim);

  /// Throws UsageError when the layer plan is inconsistent.
  void validate() const;

  std::size_t layer_count() const noexcept {
    return bottleneck_widths.size() + trunk_widths.size();
  }
  std::size_t trunk_input_dim() const noexcept;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct UserModel {
  std::string user_id;
  NetworkConfig config;
  /// Bottleneck layers first, then the trunk.
  std::vector<DenseLayer<float>> layers;
  /// Mean training MSE per epoch.
  std::vector<double> loss_trace;
};

/// He-uniform for ReLU layers, Xavier-uniform for the Tanh and output layers,
/// zero biases. Deterministic in config.seed.
UserModel init_network(const NetworkConfig& config, std::string user_id = {});

/// Read probability sigmoid(output[1]). With train_mode the two dropout
/// points are active and `rng` must be non-null.
double forward(const UserModel& model, std::span<const float> features, bool train_mode = false,
               Rng* rng = nullptr);

/// Minimizes mean (sigmoid(output[1]) - label)^2 with shuffled mini-batches.
/// Pool entries must carry features (see attach_features).
void train_user(UserModel& model, const SyntheticPool& pool);

/// Inference scores in input order.
std::vector<double> predict(const UserModel& model, std::span<const FeatureVector> candidates);

struct ScoredNews {
  std::string news_id;
  double score = 0.0;
};

std::vector<ScoredNews> predict(const UserModel& model, std::span<const std::string> news_ids,
                                const FeatureEncoder& encoder);

/// DNNR-MOD v1 (see docs/formats.md).
std::string serialize_model(const UserModel& model);
UserModel deserialize_model(std::string_view bytes, std::string_view what = "model");
void save_model(const UserModel& model, const std::filesystem::path& path);
UserModel load_model(const std::filesystem::path& path);

}  // namespace dnnr
