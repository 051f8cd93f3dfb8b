#pragma once

// Title embeddings and the fixed-layout feature vectors fed to the per-user
// networks: [embedding | one-hot type | one-hot category].

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dnnr/ingest.hpp"

namespace dnnr {

using FeatureVector = std::vector<float>;

/// Dense title vectors keyed by news id, stored contiguously.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dim = 0) : dim_(dim) {}

  /// Throws UsageError if vec.size() != dim(), DataError on a duplicate id.
  void insert(std::string news_id, std::span<const float> vec);

  std::optional<std::span<const float>> find(std::string_view news_id) const;
  std::span<const float> row(std::size_t i) const;
  const std::string& id(std::size_t i) const { return ids_[i]; }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool normalized() const noexcept { return normalized_; }
  /// True for rows that were all-zero when normalize() ran.
  bool is_zero(std::size_t i) const { return zero_[i] != 0; }

  /// L2-normalizes every row in place. Zero rows stay zero and are flagged.
  /// Returns the number of zero rows.
  std::size_t normalize();

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::vector<float> data_;
  std::vector<std::uint8_t> zero_;
  StringMap<std::size_t> index_;
  bool normalized_ = false;
};

/// DNNR-EMB v1 reader/writer (see docs/formats.md).
EmbeddingStore load_embeddings(const std::filesystem::path& path);
void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

struct NormalizedVector {
  std::vector<float> values;
  bool zero = false;  ///< input was all-zero and was returned unchanged
};

/// Throws NumericError on NaN/Inf input.
NormalizedVector l2_normalize(std::span<const float> v);

/// Deterministic PLM-free stand-in: each lower-cased alphanumeric token seeds
/// a Gaussian vector; vectors are averaged and L2-normalized. Empty titles
/// give the zero vector.
std::vector<float> hash_embed(std::string_view title, std::size_t dim, std::uint64_t seed);

/// hash_embed over every catalog title, in catalog order.
EmbeddingStore hash_embed_catalog(const Catalog& catalog, std::size_t dim, std::uint64_t seed);

enum class FeatureSet : std::uint8_t { emb, tc, emb_c, emb_t, emb_tc };

inline constexpr FeatureSet kAllFeatureSets[] = {FeatureSet::emb, FeatureSet::tc,
                                                 FeatureSet::emb_c, FeatureSet::emb_t,
                                                 FeatureSet::emb_tc};

bool uses_embedding(FeatureSet fs) noexcept;
bool uses_type(FeatureSet fs) noexcept;
bool uses_category(FeatureSet fs) noexcept;

/// "emb", "tc", "embc", "embt", "embtc" (case-insensitive, '&' and '_' ignored).
FeatureSet parse_feature_set(std::string_view name);
std::string_view to_string(FeatureSet fs) noexcept;

/// Builds feature vectors for catalog items. Holds references; the catalog,
/// store and vocabularies must outlive it. Read-only after construction and
/// safe to share across threads.
class FeatureEncoder {
 public:
  FeatureEncoder(const Catalog& catalog, const EmbeddingStore* store, Vocabulary types,
                 Vocabulary categories, FeatureSet feature_set);

  std::size_t dim() const noexcept { return dim_; }
  /// Length of the leading embedding slice, 0 when the set excludes it.
  std::size_t embedding_dim() const noexcept { return emb_dim_; }
  FeatureSet feature_set() const noexcept { return feature_set_; }

  const Vocabulary& types() const noexcept { return types_; }
  const Vocabulary& categories() const noexcept { return categories_; }
  const Catalog& catalog() const noexcept { return catalog_; }

  FeatureVector encode(const NewsItem& item) const;
  /// Looks the id up in the catalog first; DataError if absent.
  FeatureVector encode(std::string_view news_id) const;

 private:
  const Catalog& catalog_;
  const EmbeddingStore* store_;
  Vocabulary types_;
  Vocabulary categories_;
  FeatureSet feature_set_;
  std::size_t emb_dim_ = 0;
  std::size_t dim_ = 0;
};

}  // namespace dnnr
