#include <gtest/gtest.h>

#include <sstream>

#include <json.hpp>

#include "dnnr/binary_io.hpp"
#include "dnnr/pipeline.hpp"
#include "test_support.hpp"

using namespace dnnr;

namespace {

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    write_mind_tsv(generate_corpus(support::small_corpus(8, 21)), dir.path());
    cfg.news = dir / "news.tsv";
    cfg.behaviors = dir / "behaviors.tsv";
    cfg.embedding_mode = EmbeddingMode::hash;
    cfg.hash_dim = 24;
    cfg.max_samples = 15;
    cfg.epochs = 3;
    cfg.seed = 1;
  }

  std::string run(void (*cmd)(const RunConfig&, std::ostream&)) {
    std::ostringstream out;
    cmd(cfg, out);
    return out.str();
  }

  support::TempDir dir;
  RunConfig cfg;
};

nlohmann::json read_json(const std::filesystem::path& p) { return nlohmann::json::parse(read_file(p)); }

}  // namespace

TEST(ApplySweep, ParsesEachKind) {
  RunConfig c;
  apply_sweep(c, "max-samples=15,30,60");
  EXPECT_EQ(c.sweep_max_samples, (std::vector<std::size_t>{15, 30, 60}));
  apply_sweep(c, "sampler=synthetic,impressions");
  EXPECT_EQ(c.sweep_samplers, (std::vector<SamplerKind>{SamplerKind::synthetic, SamplerKind::impressions}));
  apply_sweep(c, "feature-set=all");
  EXPECT_EQ(c.sweep_feature_sets.size(), 5u);
  apply_sweep(c, "feature_set=emb,tc");
  EXPECT_EQ(c.sweep_feature_sets, (std::vector<FeatureSet>{FeatureSet::emb, FeatureSet::tc}));
  EXPECT_THROW(apply_sweep(c, "max-samples"), UsageError);
  EXPECT_THROW(apply_sweep(c, "max-samples="), UsageError);
  EXPECT_THROW(apply_sweep(c, "max-samples=0"), UsageError);
  EXPECT_THROW(apply_sweep(c, "max-samples=ten"), UsageError);
  EXPECT_THROW(apply_sweep(c, "epochs=1,2"), UsageError);
  EXPECT_THROW(apply_sweep(c, "sampler=best"), UsageError);
}

TEST(ModelFileStem, SanitizesIds) {
  EXPECT_EQ(model_file_stem("U397059"), "U397059");
  EXPECT_EQ(model_file_stem("a/b\\c d"), "a_b_c_d");
  EXPECT_EQ(model_file_stem(".."), "_..");
  EXPECT_EQ(model_file_stem(""), "_");
}

TEST(RunConfig, DataRootAppliesToRelativeInputs) {
  RunConfig c;
  c.news = "news.tsv";
  c.behaviors = "/abs/behaviors.tsv";
  c.embeddings = "emb/x.dnnremb";
  c.pools = "pools.bin";
  c.apply_data_root("/data");
  EXPECT_EQ(c.news, std::filesystem::path("/data/news.tsv"));
  EXPECT_EQ(c.behaviors, std::filesystem::path("/abs/behaviors.tsv"));
  EXPECT_EQ(c.embeddings, std::filesystem::path("/data/emb/x.dnnremb"));
  EXPECT_EQ(c.pools, std::filesystem::path("pools.bin"));
}

TEST(RunConfig, ExperimentCopiesSettings) {
  RunConfig c;
  c.epochs = 7;
  c.batch_size = 10;
  c.learning_rate = 0.01f;
  c.user_limit = 4;
  const auto e = c.experiment();
  EXPECT_EQ(e.network.epochs, 7u);
  EXPECT_EQ(e.network.batch_size, 10u);
  EXPECT_FLOAT_EQ(e.network.learning_rate, 0.01f);
  EXPECT_EQ(e.user_limit, std::optional<std::size_t>(4));
  EXPECT_EQ(parse_embedding_mode("hash"), EmbeddingMode::hash);
  EXPECT_THROW(parse_embedding_mode("glove"), UsageError);
}

TEST_F(PipelineTest, LoadInputsNeedsEmbeddingsInFileMode) {
  cfg.embedding_mode = EmbeddingMode::file;
  EXPECT_THROW(load_inputs(cfg), UsageError);
  RunConfig none;
  EXPECT_THROW(load_inputs(none), UsageError);
}

TEST_F(PipelineTest, IngestPrintsStatsAndSavesDataset) {
  cfg.dataset = dir / "d.dnnrdat";
  const auto text = run(cmd_ingest);
  EXPECT_NE(text.find("users"), std::string::npos);
  const auto loaded = load_dataset(cfg.dataset);
  const auto direct = load_mind(cfg.news, cfg.behaviors);
  EXPECT_EQ(loaded.behaviors, direct.behaviors);
  EXPECT_EQ(loaded.catalog.items(), direct.catalog.items());
}

TEST_F(PipelineTest, EmbeddingFileMatchesHashMode) {
  const auto data = load_mind(cfg.news, cfg.behaviors);
  save_embeddings(hash_embed_catalog(data.catalog, 24, 1), dir / "e.dnnremb");
  cfg.reports = dir / "hash";
  std::ostringstream sink;
  const auto a = cmd_evaluate(cfg, sink);
  cfg.embedding_mode = EmbeddingMode::file;
  cfg.embeddings = dir / "e.dnnremb";
  cfg.reports = dir / "file";
  const auto b = cmd_evaluate(cfg, sink);
  ASSERT_EQ(a.size(), 1u);
  ASSERT_EQ(a[0].users.size(), b[0].users.size());
  for (std::size_t i = 0; i < a[0].users.size(); ++i) EXPECT_EQ(a[0].users[i].scores, b[0].users[i].scores);
}

TEST_F(PipelineTest, StagesChainThroughFiles) {
  cfg.pools = dir / "pools.dnnrpol";
  cfg.models = dir / "models";
  cfg.reports = dir / "reports";
  EXPECT_NE(run(cmd_pool).find("pooling time"), std::string::npos);
  const auto pools = load_pools(cfg.pools);
  EXPECT_EQ(pools.kind, SamplerKind::synthetic);
  EXPECT_EQ(pools.max_samples, 15u);
  ASSERT_FALSE(pools.pools.empty());
  for (const auto& p : pools.pools) EXPECT_TRUE(p.entries.front().features.empty());

  run(cmd_train);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(cfg.models)) files += e.path().extension() == ".dnnrmod";
  EXPECT_EQ(files, pools.pools.size());

  std::ostringstream out;
  const auto reports = cmd_evaluate(cfg, out);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_TRUE(reports[0].errors.empty());
  EXPECT_GT(reports[0].evaluated(), 0u);
  EXPECT_TRUE(std::filesystem::exists(cfg.reports / "report_synthetic_EmbTC_15.json"));
  EXPECT_TRUE(std::filesystem::exists(cfg.reports / "auc.csv"));

  // Scoring stored models reproduces the in-memory run exactly.
  cfg.models.clear();
  cfg.reports = dir / "direct";
  const auto direct = cmd_evaluate(cfg, out);
  ASSERT_EQ(direct[0].users.size(), reports[0].users.size());
  for (std::size_t i = 0; i < direct[0].users.size(); ++i) {
    EXPECT_EQ(direct[0].users[i].scores, reports[0].users[i].scores) << direct[0].users[i].user_id;
  }
}

TEST_F(PipelineTest, StoredModelsRejectOtherFeatureSet) {
  cfg.pools = dir / "pools.dnnrpol";
  cfg.models = dir / "models";
  cfg.reports = dir / "reports";
  run(cmd_pool);
  run(cmd_train);
  cfg.feature_set = FeatureSet::tc;
  std::ostringstream out;
  const auto reports = cmd_evaluate(cfg, out);
  EXPECT_EQ(reports[0].evaluated(), 0u);
  ASSERT_FALSE(reports[0].errors.empty());
  EXPECT_NE(reports[0].errors[0].second.find("TC"), std::string::npos);
}

TEST_F(PipelineTest, EmptyPoolFileNamesTheFile) {
  cfg.pools = dir / "empty.dnnrpol";
  cfg.models = dir / "models";
  save_pools(PoolFile{}, cfg.pools);
  try {
    run(cmd_train);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("empty.dnnrpol"), std::string::npos);
  }
}

TEST_F(PipelineTest, MissingPathsAreUsageErrors) {
  EXPECT_THROW(run(cmd_pool), UsageError);
  EXPECT_THROW(run(cmd_train), UsageError);
  EXPECT_THROW(cmd_evaluate(cfg, std::cout), UsageError);
  cfg.news.clear();
  EXPECT_THROW(run(cmd_ingest), UsageError);
}

TEST_F(PipelineTest, RandomPoolsAreReproducible) {
  cfg.sampler = SamplerKind::random;
  cfg.pools = dir / "a.dnnrpol";
  run(cmd_pool);
  cfg.pools = dir / "b.dnnrpol";
  run(cmd_pool);
  EXPECT_EQ(read_file(dir / "a.dnnrpol"), read_file(dir / "b.dnnrpol"));
  cfg.seed = 2;
  cfg.pools = dir / "c.dnnrpol";
  run(cmd_pool);
  EXPECT_NE(read_file(dir / "a.dnnrpol"), read_file(dir / "c.dnnrpol"));
}

TEST_F(PipelineTest, SweepWritesOneReportPerPoint) {
  cfg.reports = dir / "reports";
  apply_sweep(cfg, "feature-set=tc,emb_tc");
  apply_sweep(cfg, "max-samples=5,15");
  std::ostringstream out;
  const auto reports = cmd_evaluate(cfg, out);
  ASSERT_EQ(reports.size(), 4u);
  const auto tc = read_json(cfg.reports / "report_synthetic_TC_5.json");
  EXPECT_EQ(tc["run"]["feature_set"], "TC");
  EXPECT_EQ(tc["run"]["max_samples"], 5);
  EXPECT_TRUE(tc.contains("timing"));
  EXPECT_TRUE(std::filesystem::exists(cfg.reports / "report_synthetic_EmbTC_15.json"));
  EXPECT_NE(out.str().find("min/4000"), std::string::npos);
  std::istringstream csv(read_file(cfg.reports / "auc.csv"));
  std::string line;
  std::size_t rows = 0;
  while (std::getline(csv, line)) ++rows;
  std::size_t users = 0;
  for (const auto& r : reports) users += r.users.size();
  EXPECT_EQ(rows, users + 1);
}

TEST_F(PipelineTest, BenchmarkWritesJson) {
  cfg.reports = dir / "bench";
  cfg.repetitions = 2;
  cfg.user_limit = 3;
  cfg.embedding_mode = EmbeddingMode::file;  // no file: falls back to hash
  std::ostringstream out;
  cmd_benchmark(cfg, out);
  const auto j = read_json(cfg.reports / "benchmark.json");
  EXPECT_EQ(j["schema"], "dnnr.benchmark");
  EXPECT_EQ(j["embedding_mode"], "hash");
  ASSERT_EQ(j["runs"].size(), 1u);
  EXPECT_EQ(j["runs"][0]["users"], 3);
  EXPECT_EQ(j["runs"][0]["stages"]["training"]["minutes_per_4000_users"].size(), 2u);
  cfg.repetitions = 0;
  EXPECT_THROW(cmd_benchmark(cfg, out), UsageError);
}

TEST(CorpusStatsOutput, PrintsRows) {
  CorpusStats s;
  s.users = 3;
  s.news = 10;
  std::ostringstream out;
  print_corpus_stats(s, out);
  EXPECT_NE(out.str().find("10"), std::string::npos);
}
