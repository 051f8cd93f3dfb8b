#pragma once

// MIND-format ingestion: news.tsv -> Catalog, behaviors.tsv -> ImpressionRecord.
//
// Column mapping: MIND's "category" column is the news *type* (16 values on
// MIND-small) and its "subcategory" column is the news *category* (212 values).

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dnnr/stats.hpp"

namespace dnnr {

/// Hash for string-keyed maps that accept string_view lookups.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept { return std::hash<std::string_view>{}(s); }
};

template <class V>
using StringMap = std::unordered_map<std::string, V, StringHash, std::equal_to<>>;

struct NewsItem {
  std::string news_id;
  std::string news_type;
  std::string news_category;
  std::string title;

  friend bool operator==(const NewsItem&, const NewsItem&) = default;
};

/// News items keyed by id, kept in first-insertion order.
class Catalog {
 public:
  /// Inserts or replaces. Returns true if an item with the same id existed.
  bool upsert(NewsItem item);

  const NewsItem* find(std::string_view news_id) const;
  bool contains(std::string_view news_id) const { return find(news_id) != nullptr; }

  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const std::vector<NewsItem>& items() const noexcept { return items_; }

  /// All ids in ascending byte order.
  std::vector<std::string> sorted_ids() const;

 private:
  std::vector<NewsItem> items_;
  StringMap<std::size_t> index_;
};

using Timestamp = std::chrono::sys_seconds;

/// Parses MIND's "M/D/YYYY h:mm:ss AM|PM".
std::optional<Timestamp> parse_mind_time(std::string_view text);
std::string format_mind_time(Timestamp t);

struct Candidate {
  std::string news_id;
  std::uint8_t clicked = 0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct ImpressionRecord {
  std::int64_t impression_id = 0;
  std::string user_id;
  Timestamp time{};
  std::vector<std::string> history;
  std::vector<Candidate> candidates;

  friend bool operator==(const ImpressionRecord&, const ImpressionRecord&) = default;
};

enum class ParseMode {
  skip,    ///< log and drop malformed rows
  strict,  ///< throw ParseError on the first malformed row
};

struct ParseStats {
  std::size_t lines = 0;
  std::size_t parsed = 0;
  std::size_t skipped = 0;
  std::size_t duplicates = 0;
};

Catalog parse_news(std::istream& in, ParseMode mode = ParseMode::skip,
                   ParseStats* stats = nullptr);

/// Parses one behaviors.tsv row; throws ParseError (line 0) when malformed.
ImpressionRecord parse_behavior_row(std::string_view line);

/// Inverse of parse_behavior_row.
std::string format_behavior_row(const ImpressionRecord& record);

std::vector<ImpressionRecord> parse_behaviors(std::istream& in,
                                              ParseMode mode = ParseMode::skip,
                                              ParseStats* stats = nullptr);

/// A user's positives in time order.
struct UserHistory {
  std::string user_id;
  std::vector<std::string> items;
};

struct HistoryOptions {
  /// Also count clicked impression candidates as reads.
  bool merge_clicks = true;
};

/// Per-user union of history ids (and optionally clicked candidates),
/// deduplicated, ordered by impression time. Output is sorted by user_id.
std::vector<UserHistory> build_user_history(std::span<const ImpressionRecord> records,
                                            HistoryOptions options = {});

class Vocabulary {
 public:
  Vocabulary() = default;
  /// Sorts and deduplicates.
  explicit Vocabulary(std::vector<std::string> labels);

  std::optional<std::size_t> index_of(std::string_view label) const;
  std::size_t size() const noexcept { return labels_.size(); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

 private:
  std::vector<std::string> labels_;
  StringMap<std::size_t> index_;
};

enum class CatalogField { type, category };

/// "type" or "category"; anything else is a UsageError.
CatalogField parse_catalog_field(std::string_view name);

Vocabulary build_vocab(const Catalog& catalog, CatalogField field);
Vocabulary build_vocab(const Catalog& catalog, std::string_view field);

/// Parsed corpus, the unit the ingest stage persists.
struct Dataset {
  Catalog catalog;
  std::vector<ImpressionRecord> behaviors;

  /// Keeps the behaviors of the first `limit` users in ascending id order.
  /// The catalog is left intact.
  void restrict_users(std::size_t limit);
};

Dataset load_mind(const std::filesystem::path& news_tsv,
                  const std::filesystem::path& behaviors_tsv,
                  ParseMode mode = ParseMode::skip);

/// DNNR-DAT v1 (see docs/formats.md).
void save_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

struct CorpusStats {
  std::size_t users = 0;
  std::size_t news = 0;
  std::size_t impressions = 0;
  std::size_t candidate_impressions = 0;
  std::size_t unique_interactions = 0;
  std::size_t news_types = 0;
  std::size_t news_categories = 0;
  Summary items_read;
};

CorpusStats corpus_stats(const Dataset& data, HistoryOptions options = {});

}  // namespace dnnr
