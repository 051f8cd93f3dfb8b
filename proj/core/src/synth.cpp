#include "dnnr/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"
#include "dnnr/random.hpp"

namespace dnnr {
namespace {

constexpr std::array<const char*, 16> kTypeNames = {
    "news",  "sports", "finance", "foodanddrink", "lifestyle", "travel",        "video", "weather",
    "health", "autos", "tv",      "music",        "movies",    "entertainment", "kids",  "middleeast"};

constexpr std::array<const char*, 20> kSyllables = {"ka", "lo", "mi", "ren", "tu", "sa", "vor",
                                                    "el", "dan", "qui", "ba", "ne", "ros", "fi",
                                                    "gal", "op", "ith", "mu", "zer", "ta"};

std::string pseudo_word(Rng& rng, std::size_t syllables) {
  std::string w;
  for (std::size_t i = 0; i < syllables; ++i) w += kSyllables[rng.below(kSyllables.size())];
  return w;
}

std::vector<std::string> word_list(Rng& rng, std::size_t n) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  while (out.size() < n) {
    auto w = pseudo_word(rng, 2 + rng.below(2));
    if (seen.insert(w).second) out.push_back(std::move(w));
  }
  return out;
}

std::size_t geometric_length(Rng& rng, double mean, std::size_t cap) {
  const double p = 1.0 / std::max(mean, 1.0);
  double u;
  do {
    u = rng.uniform();
  } while (u <= 0.0);
  const auto n = static_cast<std::size_t>(std::floor(std::log(u) / std::log1p(-p))) + 1;
  return std::min(n, cap);
}

}  // namespace

Dataset generate_corpus(const SynthConfig& cfg) {
  if (cfg.types == 0 || cfg.types > kTypeNames.size()) throw UsageError("synth: types must be 1..16");
  if (cfg.categories < cfg.types) throw UsageError("synth: need at least one category per type");
  if (cfg.news < cfg.categories) throw UsageError("synth: need at least one news item per category");
  if (cfg.min_candidates < 2 || cfg.max_candidates < cfg.min_candidates) {
    throw UsageError("synth: bad candidate range");
  }
  if (cfg.min_impressions == 0 || cfg.max_impressions < cfg.min_impressions) {
    throw UsageError("synth: bad impression range");
  }
  Rng rng(mix64(cfg.seed));

  const auto filler = word_list(rng, 300);
  std::vector<std::vector<std::string>> type_words(cfg.types);
  for (auto& w : type_words) w = word_list(rng, 10);

  struct Category {
    std::string name;
    std::size_t type;
    std::vector<std::string> words;
    std::vector<std::size_t> items;
  };
  std::vector<Category> cats(cfg.categories);
  std::unordered_set<std::string> cat_names;
  for (std::size_t c = 0; c < cfg.categories; ++c) {
    cats[c].type = c % cfg.types;
    do {
      cats[c].name = std::string(kTypeNames[cats[c].type]) + pseudo_word(rng, 2);
    } while (!cat_names.insert(cats[c].name).second);
    cats[c].words = word_list(rng, 12);
  }

  // Zipf-like category popularity.
  std::vector<double> cat_cdf(cfg.categories);
  double acc = 0.0;
  for (std::size_t c = 0; c < cfg.categories; ++c) {
    acc += 1.0 / std::pow(static_cast<double>(c) + 1.0, 0.8);
    cat_cdf[c] = acc;
  }
  auto pick_category = [&] {
    const double u = rng.uniform() * acc;
    return static_cast<std::size_t>(std::upper_bound(cat_cdf.begin(), cat_cdf.end(), u) -
                                    cat_cdf.begin());
  };

  Dataset data;
  std::vector<std::size_t> item_cat(cfg.news);
  for (std::size_t i = 0; i < cfg.news; ++i) {
    const std::size_t c = i < cfg.categories ? i : pick_category();
    item_cat[i] = c;
    cats[c].items.push_back(i);
    const std::size_t len = 5 + rng.below(6);
    std::string title;
    for (std::size_t t = 0; t < len; ++t) {
      const double u = rng.uniform();
      const auto& list = u < 0.45 ? cats[c].words : u < 0.65 ? type_words[cats[c].type] : filler;
      if (t != 0) title += ' ';
      title += list[rng.below(list.size())];
    }
    title[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(title[0])));
    data.catalog.upsert(NewsItem{"N" + std::to_string(10000 + i),
                                 kTypeNames[cats[c].type], cats[c].name, std::move(title)});
  }
  const auto& items = data.catalog.items();

  using namespace std::chrono;
  const Timestamp base = sys_days{year{2019} / November / 9} + hours{0};
  std::int64_t impression_id = 1;

  for (std::size_t u = 0; u < cfg.users; ++u) {
    const std::string user_id = "U" + std::to_string(100000 + u * 7 + rng.below(7));
    const std::size_t n_fav = 1 + rng.below(3);
    std::vector<std::size_t> fav;
    while (fav.size() < n_fav) {
      const auto c = pick_category();
      if (std::find(fav.begin(), fav.end(), c) == fav.end()) fav.push_back(c);
    }
    auto is_fav = [&](std::size_t item) {
      return std::find(fav.begin(), fav.end(), item_cat[item]) != fav.end();
    };
    auto fav_type = [&](std::size_t item) {
      for (auto c : fav) {
        if (cats[c].type == cats[item_cat[item]].type) return true;
      }
      return false;
    };
    auto draw_fav_item = [&] {
      const auto& pool = cats[fav[rng.below(fav.size())]].items;
      return pool[rng.below(pool.size())];
    };

    std::vector<std::string> history;
    std::unordered_set<std::size_t> in_history;
    const std::size_t hlen = geometric_length(rng, cfg.mean_history, cfg.max_history);
    for (std::size_t tries = 0; history.size() < hlen && tries < hlen * 20; ++tries) {
      const std::size_t item =
          rng.uniform() < cfg.history_focus ? draw_fav_item() : rng.below(cfg.news);
      if (in_history.insert(item).second) history.push_back(items[item].news_id);
    }

    const std::size_t n_imp =
        cfg.min_impressions + rng.below(cfg.max_impressions - cfg.min_impressions + 1);
    Timestamp t = base + seconds{static_cast<std::int64_t>(rng.below(3 * 86400))};
    for (std::size_t k = 0; k < n_imp; ++k) {
      t += seconds{600 + static_cast<std::int64_t>(rng.below(86400))};
      ImpressionRecord rec;
      rec.impression_id = impression_id++;
      rec.user_id = user_id;
      rec.time = t;
      rec.history = history;
      const std::size_t n_cand =
          cfg.min_candidates + rng.below(cfg.max_candidates - cfg.min_candidates + 1);
      std::unordered_set<std::size_t> chosen;
      for (std::size_t tries = 0; chosen.size() < n_cand && tries < n_cand * 50; ++tries) {
        const std::size_t item = rng.uniform() < 0.3 ? draw_fav_item() : rng.below(cfg.news);
        if (in_history.contains(item) || !chosen.insert(item).second) continue;
        const double p = is_fav(item) ? 0.45 : fav_type(item) ? 0.12 : 0.03;
        rec.candidates.push_back(
            Candidate{items[item].news_id, static_cast<std::uint8_t>(rng.uniform() < p)});
      }
      const bool any_click = std::any_of(rec.candidates.begin(), rec.candidates.end(),
                                         [](const Candidate& c) { return c.clicked != 0; });
      if (!any_click && !rec.candidates.empty()) {
        rec.candidates[rng.below(rec.candidates.size())].clicked = 1;
      }
      data.behaviors.push_back(std::move(rec));
    }
  }
  return data;
}

void write_mind_tsv(const Dataset& data, const std::filesystem::path& dir) {
  std::string news;
  for (const auto& item : data.catalog.items()) {
    news += item.news_id + '\t' + item.news_type + '\t' + item.news_category + '\t' + item.title +
            "\t\t\t[]\t[]\n";
  }
  std::string beh;
  for (const auto& r : data.behaviors) beh += format_behavior_row(r) + '\n';
  write_file_atomic(dir / "news.tsv", news);
  write_file_atomic(dir / "behaviors.tsv", beh);
}

}  // namespace dnnr
