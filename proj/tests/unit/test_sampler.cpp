#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "dnnr/error.hpp"
#include "dnnr/ingest.hpp"
#include "dnnr/sampler.hpp"
#include "test_support.hpp"

using namespace dnnr;
using namespace std::chrono;

namespace {

EmbeddingStore axis_store() {
  EmbeddingStore s(2);
  const std::vector<float> a{1, 0}, b{0, 1}, c{-1, 0}, d{0, -1};
  s.insert("A", a);
  s.insert("B", b);
  s.insert("C", c);
  s.insert("D", d);
  return s;
}

std::set<std::string> negatives_of(const SyntheticPool& p) {
  std::set<std::string> out;
  for (const auto& e : p.entries) {
    if (e.label == 0) out.insert(e.news_id);
  }
  return out;
}

std::vector<std::string> positives_of(const SyntheticPool& p) {
  std::vector<std::string> out;
  for (const auto& e : p.entries) {
    if (e.label == 1) out.push_back(e.news_id);
  }
  return out;
}

EmbeddingStore random_store(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  EmbeddingStore s(dim);
  for (std::size_t i = 0; i < n; ++i) {
    char id[16];
    std::snprintf(id, sizeof(id), "N%04zu", i);
    s.insert(id, support::random_unit(rng, dim));
  }
  return s;
}

UserHistory user_with(std::string id, std::vector<std::string> items) {
  return UserHistory{std::move(id), std::move(items)};
}

}  // namespace

TEST(InnerProductIndex, SortedNormalizedAndSkipsZeros) {
  EmbeddingStore s(2);
  const std::vector<float> b{0, 2}, a{3, 4}, z{0, 0};
  s.insert("B", b);
  s.insert("A", a);
  s.insert("Z", z);
  const auto index = InnerProductIndex::build(s);
  ASSERT_EQ(index.size(), 2u);
  EXPECT_EQ(index.id(0), "A");
  EXPECT_EQ(index.id(1), "B");
  EXPECT_FLOAT_EQ(index.row(0)[0], 0.6f);
  EXPECT_FLOAT_EQ(index.row(1)[1], 1.0f);
  EXPECT_FALSE(index.row_of("Z"));
}

TEST(UserCentroid, SingleItemIsItsEmbedding) {
  const auto index = InnerProductIndex::build(axis_store());
  const std::vector<std::string> h{"B"};
  EXPECT_EQ(user_centroid(h, index), (std::vector<float>{0, 1}));
}

TEST(UserCentroid, AntipodalPairCancels) {
  const auto index = InnerProductIndex::build(axis_store());
  const std::vector<std::string> h{"A", "C"};
  EXPECT_EQ(user_centroid(h, index), (std::vector<float>{0, 0}));
}

TEST(UserCentroid, MatchesElementwiseMean) {
  Rng rng(3);
  EmbeddingStore s(4);
  std::vector<std::vector<float>> rows;
  for (const char* id : {"X", "Y", "Z"}) {
    rows.push_back(support::random_unit(rng, 4));
    s.insert(id, rows.back());
  }
  const auto index = InnerProductIndex::build(s);
  const std::vector<std::string> h{"X", "Y", "Z", "missing"};
  const auto c = user_centroid(h, index);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_NEAR(c[j], (rows[0][j] + rows[1][j] + rows[2][j]) / 3.0, 1e-6);
  }
}

TEST(UserCentroid, NothingResolvesSkips) {
  const auto index = InnerProductIndex::build(axis_store());
  const std::vector<std::string> h{"nope"};
  EXPECT_THROW(user_centroid(h, index), SkipUser);
}

TEST(RankByInnerProduct, HandExample) {
  EmbeddingStore s(2);
  const std::vector<float> a{1, 0}, b{0, 1}, c{-1, 0};
  s.insert("A", a);
  s.insert("B", b);
  s.insert("C", c);
  const auto index = InnerProductIndex::build(s);
  const std::vector<float> centroid{1, 0};
  EXPECT_EQ(rank_by_inner_product(centroid, index, {}), (std::vector<std::string>{"C", "B", "A"}));
  const std::vector<std::string> ex{"B"};
  EXPECT_EQ(rank_by_inner_product(centroid, index, ex), (std::vector<std::string>{"C", "A"}));
}

TEST(RankByInnerProduct, TiesBreakByIdAndDimChecked) {
  EmbeddingStore s(2);
  const std::vector<float> v{0, 1};
  s.insert("Q", v);
  s.insert("P", v);
  s.insert("R", v);
  const auto index = InnerProductIndex::build(s);
  const std::vector<float> centroid{1, 0};
  EXPECT_EQ(rank_by_inner_product(centroid, index, {}), (std::vector<std::string>{"P", "Q", "R"}));
  const std::vector<float> bad{1, 0, 0};
  EXPECT_THROW(rank_by_inner_product(bad, index, {}), NumericError);
}

TEST(RankByInnerProduct, MatchesFullSortOracleAndScaleInvariant) {
  const auto store = random_store(50, 8, 9);
  const auto index = InnerProductIndex::build(store);
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto centroid = support::random_unit(rng, 8);
    std::vector<std::pair<double, std::string>> oracle;
    for (std::size_t i = 0; i < store.size(); ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < 8; ++j) s += static_cast<double>(centroid[j]) * index.row(*index.row_of(store.id(i)))[j];
      oracle.emplace_back(s, store.id(i));
    }
    std::sort(oracle.begin(), oracle.end());
    std::vector<std::string> expected;
    for (const auto& [s, id] : oracle) expected.push_back(id);
    const auto got = rank_by_inner_product(centroid, index, {});
    EXPECT_EQ(got, expected);
    std::vector<float> scaled = centroid;
    for (auto& x : scaled) x *= 4.0f;
    EXPECT_EQ(rank_by_inner_product(scaled, index, {}), got);
    EXPECT_EQ(farthest_items(centroid, index, {}, 7),
              std::vector<std::string>(got.begin(), got.begin() + 7));
  }
}

TEST(SyntheticPool, OneReadOnAxes) {
  const auto index = InnerProductIndex::build(axis_store());
  const auto pool = synthetic_pool(user_with("U", {"A"}), index);
  EXPECT_EQ(positives_of(pool), (std::vector<std::string>{"A"}));
  EXPECT_EQ(negatives_of(pool), (std::set<std::string>{"C"}));
  EXPECT_TRUE(pool.balanced());
  EXPECT_FALSE(pool.fallback);
}

TEST(SyntheticPool, CapsToMostRecentAndBalances) {
  const auto store = random_store(300, 16, 2);
  const auto index = InnerProductIndex::build(store);
  std::vector<std::string> items;
  for (std::size_t i = 0; i < 80; ++i) items.push_back(store.id(i * 3));
  const auto user = user_with("U", items);
  const auto pool = synthetic_pool(user, index, SyntheticOptions{60});
  EXPECT_EQ(pool.entries.size(), 120u);
  EXPECT_EQ(pool.positives, 60u);
  EXPECT_EQ(pool.negatives, 60u);
  EXPECT_EQ(positives_of(pool), std::vector<std::string>(items.end() - 60, items.end()));
  const std::set<std::string> read(items.begin(), items.end());
  for (const auto& n : negatives_of(pool)) EXPECT_FALSE(read.contains(n)) << n;
  // Centroid over the 60 kept, exclusions over the full history.
  const std::unordered_set<std::string> excluded(items.begin(), items.end());
  const std::vector<std::string> recent(items.end() - 60, items.end());
  EXPECT_EQ(negatives_of(pool), support::brute_force_negatives(store, recent, excluded, 60));
}

TEST(SyntheticPool, ExtraExclusionsRespected) {
  const auto index = InnerProductIndex::build(axis_store());
  const std::vector<std::string> extra{"C"};
  const auto pool = synthetic_pool(user_with("U", {"A"}), index, SyntheticOptions{60, 0, extra});
  EXPECT_EQ(negatives_of(pool), (std::set<std::string>{"B"}));
}

TEST(SyntheticPool, ZeroCentroidFallsBackToRandom) {
  const auto index = InnerProductIndex::build(axis_store());
  const auto pool = synthetic_pool(user_with("U", {"A", "C"}), index, SyntheticOptions{60, 5});
  EXPECT_TRUE(pool.fallback);
  EXPECT_EQ(pool.kind, SamplerKind::synthetic);
  EXPECT_EQ(negatives_of(pool), (std::set<std::string>{"B", "D"}));
}

TEST(SyntheticPool, EmptyHistorySkips) {
  const auto index = InnerProductIndex::build(axis_store());
  EXPECT_THROW(synthetic_pool(user_with("U", {}), index), SkipUser);
}

TEST(SyntheticPool, MatchesBruteForceOnHashCatalog) {
  const auto data = generate_corpus(support::small_corpus(60, 3));
  auto store = hash_embed_catalog(data.catalog, 64, 1);
  const auto index = InnerProductIndex::build(store);
  for (const auto& user : build_user_history(data.behaviors)) {
    for (std::size_t cap : {5u, 60u}) {
      const auto pool = synthetic_pool(user, index, SyntheticOptions{cap});
      const auto recent = recent_positives(user, cap);
      const std::unordered_set<std::string> excluded(user.items.begin(), user.items.end());
      EXPECT_EQ(negatives_of(pool),
                support::brute_force_negatives(store, recent, excluded, recent.size()))
          << user.user_id;
    }
  }
}

TEST(RandomPool, DeterministicAndExcludesHistory) {
  std::vector<std::string> catalog;
  for (int i = 0; i < 50; ++i) catalog.push_back("N" + std::to_string(i));
  const auto user = user_with("U", {"N1", "N2", "N3"});
  const auto a = random_pool(user, catalog, 7, 60);
  const auto b = random_pool(user, catalog, 7, 60);
  ASSERT_EQ(a.entries.size(), b.entries.size());
  for (std::size_t i = 0; i < a.entries.size(); ++i) EXPECT_EQ(a.entries[i].news_id, b.entries[i].news_id);
  EXPECT_EQ(a.negatives, 3u);
  for (const auto& n : negatives_of(a)) EXPECT_FALSE(n == "N1" || n == "N2" || n == "N3");
  EXPECT_NE(negatives_of(a), negatives_of(random_pool(user, catalog, 8, 60)));
}

TEST(RandomPool, CatalogEqualsHistoryGivesNoNegatives) {
  const std::vector<std::string> catalog{"A", "B"};
  const auto pool = random_pool(user_with("U", {"A", "B"}), catalog, 1, 60);
  EXPECT_EQ(pool.negatives, 0u);
  EXPECT_FALSE(pool.balanced());
}

TEST(RandomPool, SelectionFrequencyIsUniform) {
  std::vector<std::string> catalog;
  for (int i = 0; i < 100; ++i) catalog.push_back("N" + std::to_string(i));
  const auto user = user_with("U", {"N0"});
  std::map<std::string, int> counts;
  const int draws = 10000;
  for (int s = 0; s < draws; ++s) {
    for (const auto& n : negatives_of(random_pool(user, catalog, static_cast<std::uint64_t>(s), 60))) {
      ++counts[n];
    }
  }
  // Each of 99 eligible items is picked with p = 1/99 per draw.
  const double p = 1.0 / 99.0;
  const double mean = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  EXPECT_EQ(counts.count("N0"), 0u);
  EXPECT_EQ(counts.size(), 99u);
  int outside = 0;
  for (const auto& [id, c] : counts) outside += std::abs(c - mean) > 3 * sigma ? 1 : 0;
  // 3 sigma holds for ~99.7% of items; allow the expected handful.
  EXPECT_LE(outside, 2);
}

TEST(ImpressionsPool, Table2Row) {
  const std::vector<ImpressionRecord> recs{parse_behavior_row(support::table2_row())};
  const auto user = build_user_history(recs, HistoryOptions{false})[0];
  const auto pool = impressions_pool(user, recs);
  EXPECT_EQ(positives_of(pool), (std::vector<std::string>{"N26703", "N120089"}));
  EXPECT_EQ(pool.negatives, 5u);
  EXPECT_EQ(pool.kind, SamplerKind::impressions);
}

TEST(ImpressionsPool, ClicksOnlyAndAbsentUser) {
  std::vector<ImpressionRecord> recs{parse_behavior_row("1\tU1\t1/1/2019 1:00:00 AM\t\tA-1 B-1")};
  const auto pool = impressions_pool(user_with("U1", {}), recs);
  EXPECT_EQ(pool.positives, 2u);
  EXPECT_EQ(pool.negatives, 0u);
  EXPECT_THROW(impressions_pool(user_with("U2", {}), recs), SkipUser);
}

TEST(ImpressionsPool, TruncatesToMostRecent) {
  std::vector<ImpressionRecord> recs;
  std::vector<std::string> clicked;
  for (int i = 0; i < 70; ++i) {
    ImpressionRecord r;
    r.impression_id = i;
    r.user_id = "U";
    r.time = Timestamp{sys_days{year{2019} / 11 / 9}} + minutes{70 - i};  // reverse of id order
    r.candidates = {{"P" + std::to_string(i), 1}, {"Q" + std::to_string(i), 0}};
    recs.push_back(r);
  }
  // Reference slicing rule: order by time, keep the last 60 of each label.
  for (int i = 69; i >= 0; --i) clicked.push_back("P" + std::to_string(i));
  const auto pool = impressions_pool(user_with("U", {}), recs, 60);
  EXPECT_EQ(positives_of(pool), std::vector<std::string>(clicked.end() - 60, clicked.end()));
  EXPECT_EQ(pool.negatives, 60u);
  EXPECT_FALSE(negatives_of(pool).contains("Q69"));
  EXPECT_TRUE(negatives_of(pool).contains("Q0"));
}

TEST(Eq1, HandCases) {
  const std::vector<float> x{1, 0}, neg{-1, 0};
  const auto same = eq1_identity_check(x, x);
  EXPECT_EQ(same.squared_distance, 0.0);
  EXPECT_EQ(same.cosine_form, 0.0);
  const auto anti = eq1_identity_check(x, neg);
  EXPECT_EQ(anti.squared_distance, 4.0);
  EXPECT_EQ(anti.cosine_form, 4.0);
  const std::vector<float> long_v{2, 0}, short_v{1};
  EXPECT_THROW(eq1_identity_check(x, long_v), NumericError);
  EXPECT_THROW(eq1_identity_check(x, short_v), NumericError);
}

TEST(Eq1, RandomPairs) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const auto x = support::random_unit(rng, 384);
    const auto y = support::random_unit(rng, 384);
    const auto s = eq1_identity_check(x, y);
    EXPECT_LE(std::abs(s.squared_distance - s.cosine_form), 1e-5);
  }
}

TEST(PoolFile, RoundTrip) {
  support::TempDir dir;
  PoolFile f;
  f.kind = SamplerKind::random;
  f.max_samples = 30;
  f.seed = 99;
  SyntheticPool p;
  p.user_id = "U1";
  p.fallback = true;
  p.entries = {{"A", 1, {}}, {"B", 0, {}}};
  f.pools.push_back(p);
  save_pools(f, dir / "p.dnnrpool");
  const auto back = load_pools(dir / "p.dnnrpool");
  EXPECT_EQ(back.kind, SamplerKind::random);
  EXPECT_EQ(back.max_samples, 30u);
  EXPECT_EQ(back.seed, 99u);
  ASSERT_EQ(back.pools.size(), 1u);
  EXPECT_EQ(back.pools[0].user_id, "U1");
  EXPECT_TRUE(back.pools[0].fallback);
  EXPECT_EQ(back.pools[0].positives, 1u);
  EXPECT_EQ(back.pools[0].negatives, 1u);
  EXPECT_EQ(back.pools[0].entries[1].news_id, "B");
}

TEST(SamplerKind, ParseAndName) {
  for (auto k : kAllSamplers) EXPECT_EQ(parse_sampler_kind(to_string(k)), k);
  EXPECT_THROW(parse_sampler_kind("nearest"), UsageError);
}
