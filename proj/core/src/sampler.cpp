#include "dnnr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"
#include "dnnr/random.hpp"

namespace dnnr {
namespace {

constexpr std::string_view kPoolMagic = "DNNRPOL1";
constexpr std::uint32_t kPoolVersion = 1;

struct Scored {
  double score;
  std::size_t row;
};

// Rows are in ascending id order, so comparing rows breaks ties by id.
bool nearer_to_front(const Scored& a, const Scored& b) {
  return std::tie(a.score, a.row) < std::tie(b.score, b.row);
}

// Four independent partial sums so the loop vectorizes.
double dot(std::span<const float> a, std::span<const float> b) {
  double acc[4] = {0.0, 0.0, 0.0, 0.0};
  const std::size_t n = a.size(), blocked = n - n % 4;
  for (std::size_t j = 0; j < blocked; j += 4) {
    for (std::size_t k = 0; k < 4; ++k) {
      acc[k] += static_cast<double>(a[j + k]) * static_cast<double>(b[j + k]);
    }
  }
  for (std::size_t j = blocked; j < n; ++j) acc[j % 4] += static_cast<double>(a[j]) * b[j];
  return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

std::vector<Scored> score_rows(std::span<const float> centroid, const InnerProductIndex& index,
                               std::span<const std::string> exclude_ids) {
  if (centroid.size() != index.dim()) {
    throw NumericError("centroid dim " + std::to_string(centroid.size()) +
                       " does not match index dim " + std::to_string(index.dim()));
  }
  std::vector<std::uint8_t> excluded(index.size(), 0);
  for (const auto& id : exclude_ids) {
    if (auto r = index.row_of(id)) excluded[*r] = 1;
  }
  std::vector<Scored> scored;
  scored.reserve(index.size());
  for (std::size_t r = 0; r < index.size(); ++r) {
    if (excluded[r]) continue;
    scored.push_back({dot(centroid, index.row(r)), r});
  }
  return scored;
}

std::vector<std::string> exclusion_list(const UserHistory& user,
                                        std::span<const std::string> extra) {
  std::vector<std::string> out(user.items.begin(), user.items.end());
  out.insert(out.end(), extra.begin(), extra.end());
  return out;
}

void add_positives(SyntheticPool& pool, std::span<const std::string> positives) {
  for (const auto& id : positives) pool.entries.push_back(PoolEntry{id, 1, {}});
  pool.positives = positives.size();
}

}  // namespace

InnerProductIndex InnerProductIndex::build(const EmbeddingStore& store) {
  InnerProductIndex index;
  index.dim_ = store.dim();
  std::vector<std::size_t> order(store.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return store.id(a) < store.id(b); });
  index.data_.reserve(store.size() * store.dim());
  for (std::size_t i : order) {
    auto n = l2_normalize(store.row(i));
    if (n.zero) continue;
    index.rows_.emplace(store.id(i), index.ids_.size());
    index.ids_.push_back(store.id(i));
    index.data_.insert(index.data_.end(), n.values.begin(), n.values.end());
  }
  return index;
}

std::optional<std::size_t> InnerProductIndex::row_of(std::string_view news_id) const {
  auto it = rows_.find(news_id);
  if (it == rows_.end()) return std::nullopt;
  return it->second;
}

std::vector<float> user_centroid(std::span<const std::string> history,
                                 const InnerProductIndex& index) {
  std::vector<double> acc(index.dim(), 0.0);
  std::size_t n = 0;
  for (const auto& id : history) {
    auto r = index.row_of(id);
    if (!r) continue;
    const auto row = index.row(*r);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += row[j];
    ++n;
  }
  if (n == 0) throw SkipUser("no history item has an embedding");
  std::vector<float> out(acc.size());
  for (std::size_t j = 0; j < acc.size(); ++j) {
    out[j] = static_cast<float>(acc[j] / static_cast<double>(n));
  }
  return out;
}

std::vector<std::string> rank_by_inner_product(std::span<const float> centroid,
                                               const InnerProductIndex& index,
                                               std::span<const std::string> exclude_ids) {
  auto scored = score_rows(centroid, index, exclude_ids);
  std::sort(scored.begin(), scored.end(), nearer_to_front);
  std::vector<std::string> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(index.id(s.row));
  return out;
}

std::vector<std::string> farthest_items(std::span<const float> centroid,
                                        const InnerProductIndex& index,
                                        std::span<const std::string> exclude_ids, std::size_t k) {
  auto scored = score_rows(centroid, index, exclude_ids);
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    nearer_to_front);
  std::vector<std::string> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(index.id(scored[i].row));
  return out;
}

SamplerKind parse_sampler_kind(std::string_view name) {
  if (name == "synthetic") return SamplerKind::synthetic;
  if (name == "random") return SamplerKind::random;
  if (name == "impressions") return SamplerKind::impressions;
  throw UsageError("unknown sampler '" + std::string(name) +
                   "' (expected synthetic, random or impressions)");
}

std::string_view to_string(SamplerKind kind) noexcept {
  switch (kind) {
    case SamplerKind::synthetic: return "synthetic";
    case SamplerKind::random: return "random";
    case SamplerKind::impressions: return "impressions";
  }
  return "?";
}

std::span<const std::string> recent_positives(const UserHistory& user, std::size_t max_samples) {
  const std::span<const std::string> all(user.items);
  const std::size_t r = std::min(all.size(), max_samples);
  return all.subspan(all.size() - r, r);
}

SyntheticPool synthetic_pool(const UserHistory& user, const InnerProductIndex& index,
                             const SyntheticOptions& options) {
  const auto positives = recent_positives(user, options.max_samples);
  if (positives.empty()) throw SkipUser("user " + user.user_id + " has an empty history");
  const auto centroid = user_centroid(positives, index);

  double norm2 = 0.0;
  for (float c : centroid) norm2 += static_cast<double>(c) * c;
  if (norm2 < 1e-12) {
    spdlog::warn("user {}: zero centroid, falling back to random negatives", user.user_id);
    auto pool = random_pool(user, index.ids(), options.fallback_seed, options.max_samples,
                            options.extra_exclusions);
    pool.kind = SamplerKind::synthetic;
    pool.fallback = true;
    return pool;
  }

  SyntheticPool pool;
  pool.user_id = user.user_id;
  pool.kind = SamplerKind::synthetic;
  add_positives(pool, positives);
  const auto excluded = exclusion_list(user, options.extra_exclusions);
  for (auto& id : farthest_items(centroid, index, excluded, positives.size())) {
    pool.entries.push_back(PoolEntry{std::move(id), 0, {}});
  }
  pool.negatives = pool.entries.size() - pool.positives;
  if (!pool.balanced()) {
    spdlog::warn("user {}: only {} eligible negatives for {} positives", user.user_id,
                 pool.negatives, pool.positives);
  }
  return pool;
}

SyntheticPool random_pool(const UserHistory& user, std::span<const std::string> catalog_ids,
                          std::uint64_t seed, std::size_t max_samples,
                          std::span<const std::string> extra_exclusions) {
  SyntheticPool pool;
  pool.user_id = user.user_id;
  pool.kind = SamplerKind::random;
  const auto positives = recent_positives(user, max_samples);
  add_positives(pool, positives);

  std::unordered_set<std::string_view> excluded(user.items.begin(), user.items.end());
  excluded.insert(extra_exclusions.begin(), extra_exclusions.end());
  std::vector<std::uint32_t> eligible;
  eligible.reserve(catalog_ids.size());
  for (std::size_t i = 0; i < catalog_ids.size(); ++i) {
    if (!excluded.contains(catalog_ids[i])) eligible.push_back(static_cast<std::uint32_t>(i));
  }
  const std::size_t k = std::min(positives.size(), eligible.size());
  Rng rng(seed);
  // Partial Fisher-Yates: the first k slots end up a uniform k-subset.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(eligible.size() - i));
    std::swap(eligible[i], eligible[j]);
    pool.entries.push_back(PoolEntry{catalog_ids[eligible[i]], 0, {}});
  }
  pool.negatives = k;
  if (!pool.balanced()) {
    spdlog::warn("user {}: only {} unread items for {} positives", user.user_id, k,
                 positives.size());
  }
  return pool;
}

SyntheticPool impressions_pool(const UserHistory& user, std::span<const ImpressionRecord> records,
                               std::size_t max_samples) {
  std::vector<const ImpressionRecord*> own;
  for (const auto& r : records) {
    if (r.user_id == user.user_id) own.push_back(&r);
  }
  if (own.empty()) throw SkipUser("user " + user.user_id + " has no impressions");
  std::stable_sort(own.begin(), own.end(), [](const auto* a, const auto* b) {
    return std::tie(a->time, a->impression_id) < std::tie(b->time, b->impression_id);
  });

  std::unordered_set<std::string_view> read(user.items.begin(), user.items.end());
  for (const auto* r : own) {
    for (const auto& c : r->candidates) {
      if (c.clicked) read.insert(c.news_id);
    }
  }

  std::vector<std::string> pos, neg;
  std::unordered_set<std::string_view> seen_pos, seen_neg;
  for (const auto* r : own) {
    for (const auto& c : r->candidates) {
      if (c.clicked) {
        if (seen_pos.insert(c.news_id).second) pos.push_back(c.news_id);
      } else if (!read.contains(c.news_id) && seen_neg.insert(c.news_id).second) {
        neg.push_back(c.news_id);
      }
    }
  }
  auto keep_recent = [&](std::vector<std::string>& v) {
    if (v.size() > max_samples) v.erase(v.begin(), v.end() - static_cast<std::ptrdiff_t>(max_samples));
  };
  keep_recent(pos);
  keep_recent(neg);

  SyntheticPool pool;
  pool.user_id = user.user_id;
  pool.kind = SamplerKind::impressions;
  add_positives(pool, pos);
  for (auto& id : neg) pool.entries.push_back(PoolEntry{std::move(id), 0, {}});
  pool.negatives = neg.size();
  if (pool.negatives == 0 || pool.positives == 0) {
    spdlog::warn("user {}: impressions pool has {} positives and {} negatives", user.user_id,
                 pool.positives, pool.negatives);
  }
  return pool;
}

void attach_features(SyntheticPool& pool, const FeatureEncoder& encoder) {
  for (auto& e : pool.entries) e.features = encoder.encode(e.news_id);
}

Eq1Sides eq1_identity_check(std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size()) throw NumericError("eq1_identity_check: dim mismatch");
  double xx = 0.0, yy = 0.0, xy = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = x[i], b = y[i];
    xx += a * a;
    yy += b * b;
    xy += a * b;
    d2 += (a - b) * (a - b);
  }
  if (std::abs(xx - 1.0) > 1e-3 || std::abs(yy - 1.0) > 1e-3) {
    throw NumericError("eq1_identity_check: inputs must be unit vectors");
  }
  return {d2, 2.0 - 2.0 * xy};
}

void save_pools(const PoolFile& file, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw(kPoolMagic);
  w.u32(kPoolVersion);
  w.u8(static_cast<std::uint8_t>(file.kind));
  w.u32(file.max_samples);
  w.u64(file.seed);
  w.u64(file.pools.size());
  for (const auto& p : file.pools) {
    w.str16(p.user_id);
    w.u8(p.fallback ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(p.entries.size()));
    for (const auto& e : p.entries) {
      w.str16(e.news_id);
      w.u8(e.label);
    }
  }
  write_file_atomic(path, std::move(w).seal());
}

PoolFile load_pools(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string what = "pool file " + path.string();
  ByteReader r(verify_sealed(bytes, what));
  if (r.raw(kPoolMagic.size()) != kPoolMagic) throw FormatError(what + ": bad magic");
  if (const auto v = r.u32(); v != kPoolVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(v));
  }
  PoolFile file;
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(SamplerKind::impressions)) {
    throw FormatError(what + ": unknown sampler kind");
  }
  file.kind = static_cast<SamplerKind>(kind);
  file.max_samples = r.u32();
  file.seed = r.u64();
  const auto n = r.u64();
  file.pools.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    SyntheticPool p;
    p.user_id = r.str16();
    p.kind = file.kind;
    p.fallback = r.u8() != 0;
    const auto entries = r.u32();
    p.entries.reserve(entries);
    for (std::uint32_t k = 0; k < entries; ++k) {
      PoolEntry e;
      e.news_id = r.str16();
      e.label = r.u8();
      if (e.label > 1) throw FormatError(what + ": label out of range");
      (e.label ? p.positives : p.negatives) += 1;
      p.entries.push_back(std::move(e));
    }
    file.pools.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes before checksum");
  return file;
}

}  // namespace dnnr
