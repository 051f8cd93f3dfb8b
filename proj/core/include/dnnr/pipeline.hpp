#pragma once

// Stage commands behind the dnnr CLI. Each stage reads and writes versioned
// files, so stages can run on different machines given the same inputs.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dnnr/encoder.hpp"
#include "dnnr/eval.hpp"
#include "dnnr/experiment.hpp"
#include "dnnr/ingest.hpp"
#include "dnnr/sampler.hpp"

namespace dnnr {

enum class EmbeddingMode { file, hash };

EmbeddingMode parse_embedding_mode(std::string_view name);
std::string_view to_string(EmbeddingMode mode) noexcept;

struct RunConfig {
  // Inputs. Either news+behaviors TSVs or an ingested dataset file.
  std::filesystem::path news;
  std::filesystem::path behaviors;
  std::filesystem::path dataset;
  std::filesystem::path embeddings;
  // Stage outputs.
  std::filesystem::path pools;
  std::filesystem::path models;
  std::filesystem::path reports;

  SamplerKind sampler = SamplerKind::synthetic;
  FeatureSet feature_set = FeatureSet::emb_tc;
  std::size_t max_samples = kDefaultMaxSamples;
  std::uint32_t epochs = 15;
  std::uint32_t batch_size = 60;
  float learning_rate = 1e-3f;
  OptimizerKind optimizer = OptimizerKind::adam;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  std::optional<std::size_t> user_limit;

  EmbeddingMode embedding_mode = EmbeddingMode::file;
  std::size_t hash_dim = 384;
  std::uint64_t hash_seed = 1;

  bool merge_clicks = true;
  bool exclude_test_from_negatives = false;
  ParseMode parse_mode = ParseMode::skip;

  // Evaluate/benchmark grids. Empty means "just the scalar setting above".
  std::vector<SamplerKind> sweep_samplers;
  std::vector<FeatureSet> sweep_feature_sets;
  std::vector<std::size_t> sweep_max_samples;
  std::size_t repetitions = 3;

  /// Resolves relative input paths against `root` (typically $DNNR_DATA_ROOT).
  void apply_data_root(const std::filesystem::path& root);

  ExperimentConfig experiment() const;
};

/// Parses "max-samples=15,30,60", "sampler=synthetic,random" or
/// "feature-set=emb,tc" into the matching sweep list.
void apply_sweep(RunConfig& config, std::string_view spec);

/// Dataset plus L2-normalized embeddings, ready for an ExperimentContext.
struct LoadedInputs {
  Dataset data;
  EmbeddingStore store;
  std::string label;
};

LoadedInputs load_inputs(const RunConfig& config);

/// File-system-safe stem for a user id.
std::string model_file_stem(std::string_view user_id);

/// Table-1-style corpus statistics.
void print_corpus_stats(const CorpusStats& stats, std::ostream& out);

void cmd_ingest(const RunConfig& config, std::ostream& out);
void cmd_pool(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
/// Writes one JSON report per grid point plus a combined auc.csv. With
/// `models` set, scores the trained model files instead of training.
std::vector<EvalReport> cmd_evaluate(const RunConfig& config, std::ostream& out);
void cmd_benchmark(const RunConfig& config, std::ostream& out);

/// Scores previously trained models found under `models_dir`. Users without
/// a model file are recorded as skips.
EvalReport evaluate_models(const ExperimentContext& ctx, const ExperimentConfig& config,
                           const std::filesystem::path& models_dir);

}  // namespace dnnr
