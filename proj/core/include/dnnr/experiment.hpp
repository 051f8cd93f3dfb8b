#pragma once

// Train/test protocol and the end-to-end experiment driver.
//
// Per user, impressions are ordered by time and the last `test_impressions`
// of them are held out. Training positives are the history column plus (by
// default) clicks from the remaining impressions; the held-out candidates
// minus anything already in the training history form the test set.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dnnr/encoder.hpp"
#include "dnnr/eval.hpp"
#include "dnnr/ingest.hpp"
#include "dnnr/model.hpp"
#include "dnnr/sampler.hpp"

namespace dnnr {

struct SplitOptions {
  bool merge_clicks = true;
  std::size_t test_impressions = 1;
};

struct UserData {
  UserHistory history;  ///< training positives, time ordered
  std::vector<ImpressionRecord> train_impressions;
  std::vector<Candidate> test;
};

/// One entry per user, ascending user_id. Ids missing from the catalog (or
/// from `store`, when given) are dropped from histories and test sets.
std::vector<UserData> split_users(const Dataset& data, const SplitOptions& options,
                                  const EmbeddingStore* store = nullptr);

/// Immutable state shared by every user in a run: vocabularies, the inner
/// product index and the per-user splits.
class ExperimentContext {
 public:
  /// `store` must already be L2-normalized and must outlive the context.
  ExperimentContext(const Dataset& data, const EmbeddingStore& store, SplitOptions split = {},
                    std::string dataset_label = {});

  const Dataset& data() const noexcept { return data_; }
  const EmbeddingStore& store() const noexcept { return store_; }
  const InnerProductIndex& index() const noexcept { return index_; }
  const Vocabulary& types() const noexcept { return types_; }
  const Vocabulary& categories() const noexcept { return categories_; }
  const std::vector<std::string>& catalog_ids() const noexcept { return catalog_ids_; }
  const std::vector<UserData>& users() const noexcept { return users_; }
  const std::string& dataset_label() const noexcept { return label_; }

  FeatureEncoder encoder(FeatureSet fs) const;
  const UserData* find_user(std::string_view user_id) const;

 private:
  const Dataset& data_;
  const EmbeddingStore& store_;
  InnerProductIndex index_;
  Vocabulary types_;
  Vocabulary categories_;
  std::vector<std::string> catalog_ids_;
  std::vector<UserData> users_;
  std::string label_;
};

struct ExperimentConfig {
  SamplerKind sampler = SamplerKind::synthetic;
  FeatureSet feature_set = FeatureSet::emb_tc;
  std::size_t max_samples = kDefaultMaxSamples;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  /// First N users in ascending id order.
  std::optional<std::size_t> user_limit;
  /// Also keep the user's own test candidates out of the negatives.
  bool exclude_test_from_negatives = false;
  /// Template for per-user networks; dims and seed are filled in per user.
  NetworkConfig network;
};

/// Builds the id/label pool for one user. SkipUser when the user cannot be
/// pooled with this sampler.
SyntheticPool build_pool(const ExperimentContext& ctx, const UserData& user,
                         const ExperimentConfig& cfg);

/// Network config for one user: template widths and hyperparameters with
/// dims from the encoder and a seed derived from (run seed, user id).
NetworkConfig user_network_config(const ExperimentConfig& cfg, const FeatureEncoder& encoder,
                                  std::string_view user_id);

/// Trains a fresh model on `pool`, attaching features first if the entries
/// have none.
UserModel train_on_pool(const ExperimentConfig& cfg, const FeatureEncoder& encoder,
                        SyntheticPool pool);

/// Users the run covers, honoring user_limit.
std::span<const UserData> selected_users(const ExperimentContext& ctx,
                                         const ExperimentConfig& cfg);

/// Pool -> train -> evaluate for every selected user, with stage timings.
/// Pooling time covers negative selection and the pool's feature rows.
/// Per-user failures land in the report's error list.
EvalReport run_experiment(const ExperimentContext& ctx, const ExperimentConfig& cfg);

}  // namespace dnnr
