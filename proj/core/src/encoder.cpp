#include "dnnr/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <spdlog/spdlog.h>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"
#include "dnnr/random.hpp"

namespace dnnr {
namespace {

constexpr std::string_view kEmbMagic = "DNNREMB1";
constexpr std::uint32_t kEmbVersion = 1;

bool is_token_char(unsigned char c) { return std::isalnum(c) != 0 || c >= 0x80; }

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    if (is_token_char(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

}  // namespace

void EmbeddingStore::insert(std::string news_id, std::span<const float> vec) {
  if (vec.size() != dim_) {
    throw UsageError("embedding for " + news_id + " has dim " + std::to_string(vec.size()) +
                     ", store dim is " + std::to_string(dim_));
  }
  if (!index_.emplace(news_id, ids_.size()).second) {
    throw DataError("duplicate embedding id " + news_id);
  }
  ids_.push_back(std::move(news_id));
  data_.insert(data_.end(), vec.begin(), vec.end());
  zero_.push_back(0);
  normalized_ = false;
}

std::optional<std::span<const float>> EmbeddingStore::find(std::string_view news_id) const {
  auto it = index_.find(news_id);
  if (it == index_.end()) return std::nullopt;
  return row(it->second);
}

std::span<const float> EmbeddingStore::row(std::size_t i) const {
  return std::span<const float>(data_).subspan(i * dim_, dim_);
}

std::size_t EmbeddingStore::normalize() {
  std::size_t zeros = 0;
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    auto n = l2_normalize(row(i));
    std::copy(n.values.begin(), n.values.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * dim_));
    zero_[i] = n.zero ? 1 : 0;
    zeros += n.zero ? 1 : 0;
  }
  normalized_ = true;
  return zeros;
}

EmbeddingStore load_embeddings(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const std::string what = "embeddings " + path.string();
  ByteReader r(verify_sealed(bytes, what));
  if (r.raw(kEmbMagic.size()) != kEmbMagic) throw FormatError(what + ": bad magic");
  if (const auto v = r.u32(); v != kEmbVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(v));
  }
  const auto dim = r.u32();
  if (dim == 0) throw FormatError(what + ": zero dim");
  const auto count = r.u64();
  EmbeddingStore store(dim);
  std::vector<float> vec(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id(r.raw(r.u16()));
    for (auto& x : vec) x = r.f32();
    store.insert(std::move(id), vec);
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes before checksum");
  return store;
}

void save_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw(kEmbMagic);
  w.u32(kEmbVersion);
  w.u32(static_cast<std::uint32_t>(store.dim()));
  w.u64(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    w.str16(store.id(i));
    for (float x : store.row(i)) w.f32(x);
  }
  write_file_atomic(path, std::move(w).seal());
}

NormalizedVector l2_normalize(std::span<const float> v) {
  double ss = 0.0;
  for (float x : v) {
    if (!std::isfinite(x)) throw NumericError("l2_normalize: non-finite input");
    ss += static_cast<double>(x) * x;
  }
  NormalizedVector out{std::vector<float>(v.begin(), v.end()), false};
  if (ss == 0.0) {
    out.zero = true;
    return out;
  }
  const double inv = 1.0 / std::sqrt(ss);
  for (auto& x : out.values) x = static_cast<float>(x * inv);
  return out;
}

std::vector<float> hash_embed(std::string_view title, std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw UsageError("hash_embed: dim must be >= 1");
  const auto tokens = tokenize(title);
  std::vector<float> out(dim, 0.0f);
  if (tokens.empty()) return out;
  std::vector<double> acc(dim, 0.0);
  for (const auto& tok : tokens) {
    Rng rng(derive_seed(seed, tok));
    for (auto& a : acc) a += rng.normal();
  }
  double ss = 0.0;
  for (auto& a : acc) {
    a /= static_cast<double>(tokens.size());
    ss += a * a;
  }
  const double inv = ss > 0.0 ? 1.0 / std::sqrt(ss) : 0.0;
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<float>(acc[i] * inv);
  return out;
}

EmbeddingStore hash_embed_catalog(const Catalog& catalog, std::size_t dim, std::uint64_t seed) {
  EmbeddingStore store(dim);
  for (const auto& item : catalog.items()) {
    store.insert(item.news_id, hash_embed(item.title, dim, seed));
  }
  return store;
}

bool uses_embedding(FeatureSet fs) noexcept { return fs != FeatureSet::tc; }

bool uses_type(FeatureSet fs) noexcept {
  return fs == FeatureSet::tc || fs == FeatureSet::emb_t || fs == FeatureSet::emb_tc;
}

bool uses_category(FeatureSet fs) noexcept {
  return fs == FeatureSet::tc || fs == FeatureSet::emb_c || fs == FeatureSet::emb_tc;
}

FeatureSet parse_feature_set(std::string_view name) {
  std::string key;
  for (unsigned char c : name) {
    if (c == '&' || c == '_' || c == '-') continue;
    key.push_back(static_cast<char>(std::tolower(c)));
  }
  if (key == "emb") return FeatureSet::emb;
  if (key == "tc") return FeatureSet::tc;
  if (key == "embc") return FeatureSet::emb_c;
  if (key == "embt") return FeatureSet::emb_t;
  if (key == "embtc") return FeatureSet::emb_tc;
  throw UsageError("unknown feature set '" + std::string(name) +
                   "' (expected emb, tc, embc, embt or embtc)");
}

std::string_view to_string(FeatureSet fs) noexcept {
  switch (fs) {
    case FeatureSet::emb: return "Emb";
    case FeatureSet::tc: return "TC";
    case FeatureSet::emb_c: return "EmbC";
    case FeatureSet::emb_t: return "EmbT";
    case FeatureSet::emb_tc: return "EmbTC";
  }
  return "?";
}

FeatureEncoder::FeatureEncoder(const Catalog& catalog, const EmbeddingStore* store,
                               Vocabulary types, Vocabulary categories, FeatureSet feature_set)
    : catalog_(catalog),
      store_(store),
      types_(std::move(types)),
      categories_(std::move(categories)),
      feature_set_(feature_set) {
  if (uses_embedding(feature_set_)) {
    if (store_ == nullptr) {
      throw UsageError(std::string("feature set ") + std::string(to_string(feature_set_)) +
                       " needs an embedding store");
    }
    emb_dim_ = store_->dim();
  }
  dim_ = emb_dim_ + (uses_type(feature_set_) ? types_.size() : 0) +
         (uses_category(feature_set_) ? categories_.size() : 0);
}

FeatureVector FeatureEncoder::encode(const NewsItem& item) const {
  FeatureVector out(dim_, 0.0f);
  std::size_t offset = 0;
  if (emb_dim_ > 0) {
    auto emb = store_->find(item.news_id);
    if (!emb) throw DataError("no embedding for news id " + item.news_id);
    std::copy(emb->begin(), emb->end(), out.begin());
    offset = emb_dim_;
  }
  auto one_hot = [&](const Vocabulary& vocab, const std::string& label, const char* field) {
    if (auto idx = vocab.index_of(label)) {
      out[offset + *idx] = 1.0f;
    } else {
      spdlog::warn("unknown news {} '{}' for {}, encoding all-zero", field, label, item.news_id);
    }
    offset += vocab.size();
  };
  if (uses_type(feature_set_)) one_hot(types_, item.news_type, "type");
  if (uses_category(feature_set_)) one_hot(categories_, item.news_category, "category");
  return out;
}

FeatureVector FeatureEncoder::encode(std::string_view news_id) const {
  const NewsItem* item = catalog_.find(news_id);
  if (item == nullptr) throw DataError("news id " + std::string(news_id) + " not in catalog");
  return encode(*item);
}

}  // namespace dnnr
