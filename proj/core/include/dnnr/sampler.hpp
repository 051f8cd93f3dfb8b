#pragma once

// Training-pool construction for one user.
//
// A pool is the user's r most recent reads (label 1) plus r negatives
// (label 0). Three negative strategies are provided:
//   synthetic   - the r catalog items with the smallest inner product against
//                 the mean of the user's normalized title embeddings
//   random      - r unread items drawn uniformly without replacement
//   impressions - the non-clicked candidates the user was actually shown

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dnnr/encoder.hpp"
#include "dnnr/ingest.hpp"

namespace dnnr {

inline constexpr std::size_t kDefaultMaxSamples = 60;

/// L2-normalized title embeddings, one row per catalog item, rows in ascending
/// id order. Items whose embedding is all-zero are left out.
class InnerProductIndex {
 public:
  static InnerProductIndex build(const EmbeddingStore& store);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::string& id(std::size_t row) const { return ids_[row]; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  std::span<const float> row(std::size_t r) const {
    return std::span<const float>(data_).subspan(r * dim_, dim_);
  }
  std::optional<std::size_t> row_of(std::string_view news_id) const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  StringMap<std::size_t> rows_;
};

/// Mean of the index rows for `history`. Ids missing from the index are
/// ignored; SkipUser if none resolve.
std::vector<float> user_centroid(std::span<const std::string> history,
                                 const InnerProductIndex& index);

/// Every non-excluded id ordered by ascending <centroid, row>, ties by id.
std::vector<std::string> rank_by_inner_product(std::span<const float> centroid,
                                               const InnerProductIndex& index,
                                               std::span<const std::string> exclude_ids);

/// The first k entries of rank_by_inner_product, via partial sort.
std::vector<std::string> farthest_items(std::span<const float> centroid,
                                        const InnerProductIndex& index,
                                        std::span<const std::string> exclude_ids, std::size_t k);

enum class SamplerKind : std::uint8_t { synthetic, random, impressions };

inline constexpr SamplerKind kAllSamplers[] = {SamplerKind::synthetic, SamplerKind::random,
                                               SamplerKind::impressions};

SamplerKind parse_sampler_kind(std::string_view name);
std::string_view to_string(SamplerKind kind) noexcept;

struct PoolEntry {
  std::string news_id;
  std::uint8_t label = 0;
  /// Filled by attach_features; empty until then.
  FeatureVector features;
};

struct SyntheticPool {
  std::string user_id;
  SamplerKind kind = SamplerKind::synthetic;
  std::vector<PoolEntry> entries;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  /// Synthetic sampling fell back to random negatives (zero centroid).
  bool fallback = false;

  bool balanced() const noexcept { return positives == negatives; }
};

/// The last min(|items|, max_samples) items of a time-ordered history.
std::span<const std::string> recent_positives(const UserHistory& user, std::size_t max_samples);

struct SyntheticOptions {
  std::size_t max_samples = kDefaultMaxSamples;
  /// Used only when the centroid is zero and random negatives are drawn.
  std::uint64_t fallback_seed = 0;
  /// Extra ids never to use as negatives (e.g. the user's test candidates).
  std::span<const std::string> extra_exclusions = {};
};

SyntheticPool synthetic_pool(const UserHistory& user, const InnerProductIndex& index,
                             const SyntheticOptions& options = {});

/// Negatives uniform over `catalog_ids` minus the user's history. If fewer
/// than r unread items exist the pool is returned unbalanced with a warning.
SyntheticPool random_pool(const UserHistory& user, std::span<const std::string> catalog_ids,
                          std::uint64_t seed, std::size_t max_samples = kDefaultMaxSamples,
                          std::span<const std::string> extra_exclusions = {});

/// The user's own impression candidates with their click labels, in time
/// order. Positives and negatives are each capped at the max_samples most
/// recent. Non-clicked candidates the user read elsewhere are dropped.
/// SkipUser if `records` holds nothing for the user.
SyntheticPool impressions_pool(const UserHistory& user, std::span<const ImpressionRecord> records,
                               std::size_t max_samples = kDefaultMaxSamples);

void attach_features(SyntheticPool& pool, const FeatureEncoder& encoder);

/// Both sides of ||x - y||^2 = 2 - 2<x, y> for unit x, y. NumericError if
/// either input is not unit length to 1e-3 or the dims differ.
struct Eq1Sides {
  double squared_distance = 0.0;
  double cosine_form = 0.0;
};
Eq1Sides eq1_identity_check(std::span<const float> x, std::span<const float> y);

/// The pool-stage output. Entries are stored as (id, label); features are
/// re-derived by the training stage.
struct PoolFile {
  SamplerKind kind = SamplerKind::synthetic;
  std::uint32_t max_samples = kDefaultMaxSamples;
  std::uint64_t seed = 0;
  std::vector<SyntheticPool> pools;  ///< ascending user_id
};

/// DNNR-POOL v1 (see docs/formats.md).
void save_pools(const PoolFile& file, const std::filesystem::path& path);
PoolFile load_pools(const std::filesystem::path& path);

}  // namespace dnnr
