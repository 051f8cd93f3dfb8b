#include "dnnr/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <tuple>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"

namespace dnnr {
namespace {

constexpr std::string_view kDatasetMagic = "DNNRDAT1";
constexpr std::uint32_t kDatasetVersion = 1;

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string_view> split_tokens(std::string_view s) {
  std::vector<std::string_view> out;
  for (auto tok : split(s, ' ')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

template <class Int>
std::optional<Int> to_int(std::string_view s) {
  Int v{};
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || ptr != end || s.empty()) return std::nullopt;
  return v;
}

NewsItem parse_news_row(std::string_view line) {
  auto cols = split(line, '\t');
  if (cols.size() < 4) {
    throw ParseError(0, "expected at least 4 tab-separated columns, found " +
                            std::to_string(cols.size()));
  }
  if (cols[0].empty()) throw ParseError(0, "empty news id");
  return NewsItem{std::string(cols[0]), std::string(cols[1]), std::string(cols[2]),
                  std::string(cols[3])};
}

template <class Row, class Parse, class Sink>
void parse_lines(std::istream& in, ParseMode mode, ParseStats* stats, std::string_view what,
                 Parse&& parse, Sink&& sink) {
  ParseStats local;
  std::string line;
  while (std::getline(in, line)) {
    ++local.lines;
    const auto view = chomp(line);
    if (view.empty()) continue;
    try {
      Row row = parse(view);
      ++local.parsed;
      if (sink(std::move(row))) ++local.duplicates;
    } catch (const ParseError& e) {
      if (mode == ParseMode::strict) throw ParseError(local.lines, e.what());
      ++local.skipped;
      spdlog::warn("{}: skipping line {}: {}", what, local.lines, e.what());
    }
  }
  if (stats != nullptr) *stats = local;
}

}  // namespace

bool Catalog::upsert(NewsItem item) {
  auto it = index_.find(item.news_id);
  if (it != index_.end()) {
    items_[it->second] = std::move(item);
    return true;
  }
  index_.emplace(item.news_id, items_.size());
  items_.push_back(std::move(item));
  return false;
}

const NewsItem* Catalog::find(std::string_view news_id) const {
  auto it = index_.find(news_id);
  return it == index_.end() ? nullptr : &items_[it->second];
}

std::vector<std::string> Catalog::sorted_ids() const {
  std::vector<std::string> ids;
  ids.reserve(items_.size());
  for (const auto& item : items_) ids.push_back(item.news_id);
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::optional<Timestamp> parse_mind_time(std::string_view text) {
  using namespace std::chrono;
  const auto parts = split(text, ' ');
  if (parts.size() != 3) return std::nullopt;
  const auto date = split(parts[0], '/');
  const auto clock = split(parts[1], ':');
  if (date.size() != 3 || clock.size() != 3) return std::nullopt;
  if (clock[1].size() != 2 || clock[2].size() != 2) return std::nullopt;

  const auto mon = to_int<unsigned>(date[0]);
  const auto day = to_int<unsigned>(date[1]);
  const auto yr = to_int<int>(date[2]);
  const auto hh = to_int<int>(clock[0]);
  const auto mm = to_int<int>(clock[1]);
  const auto ss = to_int<int>(clock[2]);
  if (!mon || !day || !yr || !hh || !mm || !ss) return std::nullopt;
  if (*hh < 1 || *hh > 12 || *mm > 59 || *ss > 59) return std::nullopt;

  int hour24 = *hh % 12;
  if (parts[2] == "PM") {
    hour24 += 12;
  } else if (parts[2] != "AM") {
    return std::nullopt;
  }

  const year_month_day ymd{year{*yr}, month{*mon}, std::chrono::day{*day}};
  if (!ymd.ok()) return std::nullopt;
  return Timestamp{sys_days{ymd}.time_since_epoch() + hours{hour24} + minutes{*mm} +
                   seconds{*ss}};
}

std::string format_mind_time(Timestamp t) {
  using namespace std::chrono;
  const auto day_start = floor<days>(t);
  const year_month_day ymd{day_start};
  const hh_mm_ss hms{t - day_start};
  const int h24 = static_cast<int>(hms.hours().count());
  const int h12 = h24 % 12 == 0 ? 12 : h24 % 12;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%u/%u/%d %d:%02d:%02d %s",
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(ymd.year()), h12, static_cast<int>(hms.minutes().count()),
                static_cast<int>(hms.seconds().count()), h24 < 12 ? "AM" : "PM");
  return buf;
}

Catalog parse_news(std::istream& in, ParseMode mode, ParseStats* stats) {
  Catalog catalog;
  parse_lines<NewsItem>(in, mode, stats, "news", parse_news_row, [&](NewsItem item) {
    const std::string id = item.news_id;
    const bool replaced = catalog.upsert(std::move(item));
    if (replaced) spdlog::warn("news: duplicate id {}, keeping the last occurrence", id);
    return replaced;
  });
  return catalog;
}

ImpressionRecord parse_behavior_row(std::string_view line) {
  const auto cols = split(line, '\t');
  if (cols.size() != 5) {
    throw ParseError(0, "expected 5 tab-separated columns, found " + std::to_string(cols.size()));
  }
  ImpressionRecord rec;
  const auto id = to_int<std::int64_t>(cols[0]);
  if (!id) throw ParseError(0, "bad impression id '" + std::string(cols[0]) + "'");
  rec.impression_id = *id;
  if (cols[1].empty()) throw ParseError(0, "empty user id");
  rec.user_id = std::string(cols[1]);
  const auto time = parse_mind_time(cols[2]);
  if (!time) throw ParseError(0, "unparseable time '" + std::string(cols[2]) + "'");
  rec.time = *time;

  for (auto tok : split_tokens(cols[3])) rec.history.emplace_back(tok);

  for (auto tok : split_tokens(cols[4])) {
    const auto dash = tok.rfind('-');
    if (dash == std::string_view::npos || dash == 0) {
      throw ParseError(0, "candidate '" + std::string(tok) + "' lacks a -0/-1 label");
    }
    const auto label = tok.substr(dash + 1);
    if (label != "0" && label != "1") {
      throw ParseError(0, "candidate '" + std::string(tok) + "' has label other than 0/1");
    }
    rec.candidates.push_back(
        Candidate{std::string(tok.substr(0, dash)), static_cast<std::uint8_t>(label == "1")});
  }
  if (rec.candidates.empty()) throw ParseError(0, "impression has no candidates");
  return rec;
}

std::string format_behavior_row(const ImpressionRecord& record) {
  std::string out = std::to_string(record.impression_id);
  out += '\t';
  out += record.user_id;
  out += '\t';
  out += format_mind_time(record.time);
  out += '\t';
  for (std::size_t i = 0; i < record.history.size(); ++i) {
    if (i != 0) out += ' ';
    out += record.history[i];
  }
  out += '\t';
  for (std::size_t i = 0; i < record.candidates.size(); ++i) {
    if (i != 0) out += ' ';
    out += record.candidates[i].news_id;
    out += record.candidates[i].clicked ? "-1" : "-0";
  }
  return out;
}

std::vector<ImpressionRecord> parse_behaviors(std::istream& in, ParseMode mode,
                                              ParseStats* stats) {
  std::vector<ImpressionRecord> records;
  parse_lines<ImpressionRecord>(in, mode, stats, "behaviors", parse_behavior_row,
                                [&](ImpressionRecord r) {
                                  records.push_back(std::move(r));
                                  return false;
                                });
  return records;
}

std::vector<UserHistory> build_user_history(std::span<const ImpressionRecord> records,
                                            HistoryOptions options) {
  std::map<std::string_view, std::vector<const ImpressionRecord*>> by_user;
  for (const auto& r : records) by_user[r.user_id].push_back(&r);

  std::vector<UserHistory> out;
  out.reserve(by_user.size());
  for (auto& [user, recs] : by_user) {
    std::stable_sort(recs.begin(), recs.end(), [](const auto* a, const auto* b) {
      return std::tie(a->time, a->impression_id) < std::tie(b->time, b->impression_id);
    });
    UserHistory h{std::string(user), {}};
    std::unordered_set<std::string_view> seen;
    auto add = [&](const std::string& id) {
      if (seen.insert(id).second) h.items.push_back(id);
    };
    for (const auto* r : recs) {
      for (const auto& id : r->history) add(id);
      if (options.merge_clicks) {
        for (const auto& c : r->candidates) {
          if (c.clicked) add(c.news_id);
        }
      }
    }
    out.push_back(std::move(h));
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> labels) : labels_(std::move(labels)) {
  std::sort(labels_.begin(), labels_.end());
  labels_.erase(std::unique(labels_.begin(), labels_.end()), labels_.end());
  for (std::size_t i = 0; i < labels_.size(); ++i) index_.emplace(labels_[i], i);
}

std::optional<std::size_t> Vocabulary::index_of(std::string_view label) const {
  auto it = index_.find(label);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

CatalogField parse_catalog_field(std::string_view name) {
  if (name == "type") return CatalogField::type;
  if (name == "category") return CatalogField::category;
  throw UsageError("unknown catalog field '" + std::string(name) +
                   "' (expected 'type' or 'category')");
}

Vocabulary build_vocab(const Catalog& catalog, CatalogField field) {
  std::vector<std::string> labels;
  labels.reserve(catalog.size());
  for (const auto& item : catalog.items()) {
    labels.push_back(field == CatalogField::type ? item.news_type : item.news_category);
  }
  return Vocabulary(std::move(labels));
}

Vocabulary build_vocab(const Catalog& catalog, std::string_view field) {
  return build_vocab(catalog, parse_catalog_field(field));
}

void Dataset::restrict_users(std::size_t limit) {
  std::set<std::string_view> users;
  for (const auto& r : behaviors) users.insert(r.user_id);
  if (users.size() <= limit) return;
  std::unordered_set<std::string> keep;
  for (auto it = users.begin(); keep.size() < limit; ++it) keep.emplace(*it);
  std::erase_if(behaviors, [&](const ImpressionRecord& r) { return !keep.contains(r.user_id); });
}

Dataset load_mind(const std::filesystem::path& news_tsv,
                  const std::filesystem::path& behaviors_tsv, ParseMode mode) {
  std::ifstream news(news_tsv);
  if (!news) throw DataError("cannot open news file " + news_tsv.string());
  std::ifstream beh(behaviors_tsv);
  if (!beh) throw DataError("cannot open behaviors file " + behaviors_tsv.string());
  Dataset data;
  data.catalog = parse_news(news, mode);
  data.behaviors = parse_behaviors(beh, mode);
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
  ByteWriter w;
  w.raw(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u64(data.catalog.size());
  for (const auto& item : data.catalog.items()) {
    w.str16(item.news_id);
    w.str16(item.news_type);
    w.str16(item.news_category);
    w.u32(static_cast<std::uint32_t>(item.title.size()));
    w.raw(item.title);
  }
  w.u64(data.behaviors.size());
  for (const auto& r : data.behaviors) {
    w.u64(static_cast<std::uint64_t>(r.impression_id));
    w.str16(r.user_id);
    w.u64(static_cast<std::uint64_t>(r.time.time_since_epoch().count()));
    w.u32(static_cast<std::uint32_t>(r.history.size()));
    for (const auto& h : r.history) w.str16(h);
    w.u32(static_cast<std::uint32_t>(r.candidates.size()));
    for (const auto& c : r.candidates) {
      w.str16(c.news_id);
      w.u8(c.clicked);
    }
  }
  write_file_atomic(path, std::move(w).seal());
}

Dataset load_dataset(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  const auto what = "dataset " + path.string();
  ByteReader r(verify_sealed(bytes, what));
  if (r.raw(kDatasetMagic.size()) != kDatasetMagic) throw FormatError(what + ": bad magic");
  if (const auto v = r.u32(); v != kDatasetVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(v));
  }
  Dataset data;
  const auto n_news = r.u64();
  for (std::uint64_t i = 0; i < n_news; ++i) {
    NewsItem item;
    item.news_id = r.str16();
    item.news_type = r.str16();
    item.news_category = r.str16();
    item.title = std::string(r.raw(r.u32()));
    data.catalog.upsert(std::move(item));
  }
  const auto n_rec = r.u64();
  data.behaviors.reserve(n_rec);
  for (std::uint64_t i = 0; i < n_rec; ++i) {
    ImpressionRecord rec;
    rec.impression_id = static_cast<std::int64_t>(r.u64());
    rec.user_id = r.str16();
    rec.time = Timestamp{std::chrono::seconds{static_cast<std::int64_t>(r.u64())}};
    const auto nh = r.u32();
    rec.history.reserve(nh);
    for (std::uint32_t k = 0; k < nh; ++k) rec.history.push_back(r.str16());
    const auto nc = r.u32();
    rec.candidates.reserve(nc);
    for (std::uint32_t k = 0; k < nc; ++k) {
      Candidate c;
      c.news_id = r.str16();
      c.clicked = r.u8();
      if (c.clicked > 1) throw FormatError(what + ": click flag out of range");
      rec.candidates.push_back(std::move(c));
    }
    data.behaviors.push_back(std::move(rec));
  }
  if (!r.done()) throw FormatError(what + ": trailing bytes");
  return data;
}

CorpusStats corpus_stats(const Dataset& data, HistoryOptions options) {
  CorpusStats s;
  s.news = data.catalog.size();
  s.impressions = data.behaviors.size();
  for (const auto& r : data.behaviors) s.candidate_impressions += r.candidates.size();
  const auto histories = build_user_history(data.behaviors, options);
  s.users = histories.size();
  std::vector<double> reads;
  reads.reserve(histories.size());
  for (const auto& h : histories) {
    s.unique_interactions += h.items.size();
    reads.push_back(static_cast<double>(h.items.size()));
  }
  s.items_read = describe(reads);
  if (!data.catalog.empty()) {
    s.news_types = build_vocab(data.catalog, CatalogField::type).size();
    s.news_categories = build_vocab(data.catalog, CatalogField::category).size();
  }
  return s;
}

}  // namespace dnnr
