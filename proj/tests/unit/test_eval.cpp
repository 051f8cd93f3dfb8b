#include <gtest/gtest.h>

#include <cmath>

#include <json.hpp>

#include "dnnr/eval.hpp"
#include "dnnr/random.hpp"
#include "test_support.hpp"

using namespace dnnr;

namespace {

struct Instance {
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

/// Random scores on a coarse grid so ties are common.
Instance random_instance(Rng& rng, std::size_t n, int levels) {
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    in.scores.push_back(static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / levels);
    in.labels.push_back(rng.uniform() < 0.3 ? 1 : 0);
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

UserEval user(std::string id, std::vector<double> s, std::vector<std::uint8_t> l) {
  UserEval u;
  u.user_id = std::move(id);
  u.scores = std::move(s);
  u.labels = std::move(l);
  u.auc = auc(u.scores, u.labels);
  return u;
}

}  // namespace

TEST(Auc, HandCases) {
  const std::vector<double> s{0.1, 0.4, 0.35, 0.8};
  const std::vector<std::uint8_t> l{0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(auc(s, l), 0.75);
  const std::vector<double> tied{0.5, 0.5};
  const std::vector<std::uint8_t> tl{1, 0};
  EXPECT_DOUBLE_EQ(auc(tied, tl), 0.5);
  const std::vector<std::uint8_t> inverted{1, 1, 0, 0};
  EXPECT_DOUBLE_EQ(auc(s, inverted), 0.25);
}

TEST(Auc, EqualsExhaustivePairCounting) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const auto in = random_instance(rng, 2 + rng.below(60), 1 + static_cast<int>(rng.below(12)));
    const auto [num, den] = support::pair_count(in.scores, in.labels);
    EXPECT_EQ(auc(in.scores, in.labels), static_cast<double>(num) / static_cast<double>(den))
        << "trial " << trial;
  }
}

TEST(Auc, InvariantUnderMonotoneTransforms) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto in = random_instance(rng, 40, 8);
    auto shifted = in.scores;
    for (auto& s : shifted) s = std::exp(3.0 * s) - 7.0;
    EXPECT_EQ(auc(in.scores, in.labels), auc(shifted, in.labels));
  }
}

TEST(Auc, PerfectRankingOfTable2Impression) {
  // Labels of the worked impression: N26703 and N120089 were clicked.
  const std::vector<std::uint8_t> labels{0, 1, 1, 0, 0, 0, 0};
  const std::vector<double> scores{0.1, 0.9, 0.8, 0.2, 0.3, 0.05, 0.4};
  EXPECT_DOUBLE_EQ(auc(scores, labels), 1.0);
}

TEST(Auc, SingleClassIsUndefined) {
  const std::vector<double> s{0.1, 0.2};
  const std::vector<std::uint8_t> pos{1, 1}, neg{0, 0};
  EXPECT_THROW(auc(s, pos), UndefinedAuc);
  EXPECT_THROW(auc(s, neg), UndefinedAuc);
  EXPECT_THROW(auc(std::vector<double>{}, std::vector<std::uint8_t>{}), UndefinedAuc);
  EXPECT_THROW(auc(s, std::vector<std::uint8_t>{1}), UsageError);
}

TEST(Auc, RandomScoresCentreOnOneHalf) {
  Rng rng(3);
  double total = 0.0;
  const int users = 1000;
  for (int u = 0; u < users; ++u) {
    std::vector<double> s(20);
    std::vector<std::uint8_t> l(20);
    for (std::size_t i = 0; i < 20; ++i) {
      s[i] = rng.uniform();
      l[i] = i < 5 ? 1 : 0;
    }
    total += auc(s, l);
  }
  EXPECT_NEAR(total / users, 0.5, 0.02);

  std::vector<double> s(20000);
  std::vector<std::uint8_t> l(20000);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform();
    l[i] = i % 4 == 0;
  }
  EXPECT_NEAR(group_auc(s, l), 0.5, 0.02);  // sd about 0.005
}

TEST(GroupAuc, DiffersFromPerUserMean) {
  // Each user is ranked perfectly but their score scales differ.
  EvalReport r;
  r.users.push_back(user("U1", {0.9, 0.8}, {1, 0}));
  r.users.push_back(user("U2", {0.3, 0.2}, {1, 0}));
  r.finalize();
  EXPECT_DOUBLE_EQ(r.individual.mean, 1.0);
  ASSERT_TRUE(r.group_auc);
  EXPECT_DOUBLE_EQ(*r.group_auc, 0.75);
}

TEST(GroupAuc, SingleUserMatchesAuc) {
  EvalReport r;
  r.users.push_back(user("U1", {0.1, 0.7, 0.4, 0.2}, {0, 1, 0, 1}));
  r.finalize();
  EXPECT_EQ(*r.group_auc, *r.users[0].auc);
}

TEST(EvalReport, FinalizeSortsAndSkipsUndefined) {
  EvalReport r;
  r.users.push_back(user("U2", {0.1, 0.9}, {0, 1}));
  UserEval skipped;
  skipped.user_id = "U1";
  skipped.skip_reason = "no test candidates";
  r.users.push_back(skipped);
  r.finalize();
  EXPECT_EQ(r.users[0].user_id, "U1");
  EXPECT_EQ(r.evaluated(), 1u);
  EXPECT_EQ(r.individual_aucs(), std::vector<double>{1.0});
}

TEST(EvalReport, NoUsersLeavesGroupAucEmpty) {
  EvalReport r;
  r.finalize();
  EXPECT_FALSE(r.group_auc);
  EXPECT_EQ(r.evaluated(), 0u);
}

TEST(Timing, ProbeOfNothingIsTiny) {
  const double s = timing_probe([] {});
  EXPECT_GE(s, 0.0);
  EXPECT_LT(s, 0.01);
  TimingBlock t;
  timing_probe(Stage::training, t, [] {});
  EXPECT_GE(t.train_seconds, 0.0);
  EXPECT_EQ(t.pooling_seconds, 0.0);
}

TEST(Timing, MinutesPer4000Users) {
  TimingBlock t;
  t.users = 100;
  EXPECT_DOUBLE_EQ(t.minutes_per_4000(60.0), 40.0);
  t.users = 0;
  EXPECT_EQ(t.minutes_per_4000(60.0), 0.0);
}

TEST(ReportJson, SchemaAndFields) {
  EvalReport r;
  r.meta.sampler = SamplerKind::random;
  r.meta.feature_set = FeatureSet::tc;
  r.meta.max_samples = 30;
  r.meta.seed = 9;
  r.meta.dataset = "synth";
  r.users.push_back(user("U1", {0.2, 0.6}, {0, 1}));
  UserEval skipped;
  skipped.user_id = "U2";
  skipped.skip_reason = "single-class test set";
  r.users.push_back(skipped);
  r.errors.emplace_back("U3", "boom");
  r.timing.users = 3;
  r.timing.train_seconds = 1.5;
  r.finalize();

  const auto j = nlohmann::json::parse(report_to_json(r));
  EXPECT_EQ(j["schema"], "dnnr.eval_report");
  EXPECT_EQ(j["schema_version"], 1);
  EXPECT_EQ(j["run"]["sampler"], "random");
  EXPECT_EQ(j["run"]["feature_set"], "TC");
  EXPECT_EQ(j["run"]["max_samples"], 30);
  EXPECT_EQ(j["group_auc"], 1.0);
  EXPECT_EQ(j["individual_auc"]["count"], 1);
  ASSERT_EQ(j["users"].size(), 2u);
  EXPECT_TRUE(j["users"][1]["auc"].is_null());
  EXPECT_EQ(j["users"][1]["skip_reason"], "single-class test set");
  EXPECT_EQ(j["errors"][0]["user_id"], "U3");
  EXPECT_DOUBLE_EQ(j["timing"]["train_minutes_per_4000_users"].get<double>(), 1.5 / 60 * 4000 / 3);

  const auto no_timing = nlohmann::json::parse(report_to_json(r, false));
  EXPECT_FALSE(no_timing.contains("timing"));
}

TEST(ReportCsv, OneRowPerUser) {
  EvalReport r;
  r.meta.max_samples = 60;
  r.users.push_back(user("U1", {0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}));
  UserEval skipped;
  skipped.user_id = "U2";
  skipped.skip_reason = "a, b";
  r.users.push_back(skipped);
  r.finalize();
  const std::vector<EvalReport> reports{r};
  EXPECT_EQ(report_to_csv(reports),
            "user_id,sampler,feature_set,max_samples,auc,skip_reason\n"
            "U1,synthetic,EmbTC,60,0.75,\n"
            "U2,synthetic,EmbTC,60,,a; b\n");
}
