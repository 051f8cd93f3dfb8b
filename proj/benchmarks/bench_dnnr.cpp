#include <benchmark/benchmark.h>

#include <memory>

#include "dnnr/eval.hpp"
#include "dnnr/experiment.hpp"
#include "dnnr/synth.hpp"

using namespace dnnr;

namespace {

struct World {
  Dataset data;
  EmbeddingStore store;
  std::unique_ptr<ExperimentContext> ctx;

  explicit World(std::size_t news) {
    SynthConfig cfg;
    cfg.users = 100;
    cfg.news = news;
    cfg.mean_history = 60.0;
    data = generate_corpus(cfg);
    store = hash_embed_catalog(data.catalog, 384, 1);
    store.normalize();
    ctx = std::make_unique<ExperimentContext>(data, store);
  }

  const UserData& busiest() const {
    const UserData* best = &ctx->users().front();
    for (const auto& u : ctx->users()) {
      if (u.history.items.size() > best->history.items.size()) best = &u;
    }
    return *best;
  }
};

World& world(std::size_t news) {
  static std::map<std::size_t, std::unique_ptr<World>> cache;
  auto& w = cache[news];
  if (!w) w = std::make_unique<World>(news);
  return *w;
}

void BM_FarthestItems(benchmark::State& state) {
  auto& w = world(static_cast<std::size_t>(state.range(0)));
  const auto& user = w.busiest();
  const auto centroid = user_centroid(user.history.items, w.ctx->index());
  for (auto _ : state) {
    benchmark::DoNotOptimize(farthest_items(centroid, w.ctx->index(), user.history.items, 60));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FarthestItems)->Arg(3000)->Arg(20000)->Arg(51282)->Unit(benchmark::kMicrosecond);

void BM_SyntheticPool(benchmark::State& state) {
  auto& w = world(20000);
  const auto& user = w.busiest();
  const SyntheticOptions opts{static_cast<std::size_t>(state.range(0))};
  for (auto _ : state) benchmark::DoNotOptimize(synthetic_pool(user.history, w.ctx->index(), opts));
}
BENCHMARK(BM_SyntheticPool)->Arg(15)->Arg(30)->Arg(60)->Arg(120)->Unit(benchmark::kMicrosecond);

void BM_TrainUser(benchmark::State& state) {
  auto& w = world(3000);
  const auto& user = w.busiest();
  ExperimentConfig cfg;
  cfg.max_samples = static_cast<std::size_t>(state.range(0));
  const auto encoder = w.ctx->encoder(FeatureSet::emb_tc);
  auto pool = build_pool(*w.ctx, user, cfg);
  attach_features(pool, encoder);
  for (auto _ : state) benchmark::DoNotOptimize(train_on_pool(cfg, encoder, pool));
}
BENCHMARK(BM_TrainUser)->Arg(15)->Arg(30)->Arg(60)->Unit(benchmark::kMillisecond);

void BM_Predict(benchmark::State& state) {
  auto& w = world(3000);
  ExperimentConfig cfg;
  const auto encoder = w.ctx->encoder(FeatureSet::emb_tc);
  const auto model = init_network(user_network_config(cfg, encoder, "U"), "U");
  std::vector<FeatureVector> feats;
  for (std::size_t i = 0; i < 100; ++i) feats.push_back(encoder.encode(w.data.catalog.items()[i].news_id));
  for (auto _ : state) benchmark::DoNotOptimize(predict(model, feats));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_Predict)->Unit(benchmark::kMicrosecond);

void BM_Auc(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<double> scores(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    scores[i] = rng.uniform();
    labels[i] = i % 3 == 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(scores, labels));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Auc)->Arg(100)->Arg(100000)->Unit(benchmark::kMicrosecond);

void BM_ParseBehaviorRow(benchmark::State& state) {
  const std::string row =
      "91\tU397059\t11/15/2019 10:22:32 AM\tN106403 N71977 N97080 N102132 N97212 N121652\t"
      "N129416-0 N26703-1 N120089-1 N53018-0 N89764-0 N91737-0 N29160-0";
  for (auto _ : state) benchmark::DoNotOptimize(parse_behavior_row(row));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(row.size()));
}
BENCHMARK(BM_ParseBehaviorRow);

}  // namespace

BENCHMARK_MAIN();
