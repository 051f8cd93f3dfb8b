#include "dnnr/experiment.hpp"

#include <algorithm>
#include <map>
#include <tuple>
#include <unordered_set>

#include <spdlog/spdlog.h>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"
#include "dnnr/parallel.hpp"

namespace dnnr {

std::vector<UserData> split_users(const Dataset& data, const SplitOptions& options,
                                  const EmbeddingStore* store) {
  auto usable = [&](const std::string& id) {
    return data.catalog.contains(id) && (store == nullptr || store->find(id).has_value());
  };

  std::map<std::string_view, std::vector<const ImpressionRecord*>> by_user;
  for (const auto& r : data.behaviors) by_user[r.user_id].push_back(&r);

  std::vector<UserData> out;
  out.reserve(by_user.size());
  for (auto& [user, recs] : by_user) {
    std::stable_sort(recs.begin(), recs.end(), [](const auto* a, const auto* b) {
      return std::tie(a->time, a->impression_id) < std::tie(b->time, b->impression_id);
    });
    const std::size_t held = std::min(options.test_impressions, recs.size());
    const std::size_t n_train = recs.size() - held;

    UserData ud;
    std::vector<ImpressionRecord> for_history;
    for (std::size_t i = 0; i < recs.size(); ++i) {
      if (i < n_train) {
        ud.train_impressions.push_back(*recs[i]);
        for_history.push_back(*recs[i]);
      } else {
        // The history column predates the impression; only its clicks are held out.
        ImpressionRecord r = *recs[i];
        r.candidates.clear();
        for_history.push_back(std::move(r));
      }
    }
    auto hist = build_user_history(for_history, HistoryOptions{options.merge_clicks});
    ud.history.user_id = std::string(user);
    std::unordered_set<std::string> read;
    if (!hist.empty()) {
      read.insert(hist.front().items.begin(), hist.front().items.end());
      for (auto& id : hist.front().items) {
        if (usable(id)) ud.history.items.push_back(std::move(id));
      }
    }
    for (std::size_t i = n_train; i < recs.size(); ++i) {
      for (const auto& c : recs[i]->candidates) {
        if (!read.contains(c.news_id) && usable(c.news_id)) ud.test.push_back(c);
      }
    }
    out.push_back(std::move(ud));
  }
  return out;
}

ExperimentContext::ExperimentContext(const Dataset& data, const EmbeddingStore& store,
                                     SplitOptions split, std::string dataset_label)
    : data_(data),
      store_(store),
      index_(InnerProductIndex::build(store)),
      types_(build_vocab(data.catalog, CatalogField::type)),
      categories_(build_vocab(data.catalog, CatalogField::category)),
      catalog_ids_(data.catalog.sorted_ids()),
      users_(split_users(data, split, &store)),
      label_(std::move(dataset_label)) {}

FeatureEncoder ExperimentContext::encoder(FeatureSet fs) const {
  return FeatureEncoder(data_.catalog, &store_, types_, categories_, fs);
}

const UserData* ExperimentContext::find_user(std::string_view user_id) const {
  auto it = std::lower_bound(users_.begin(), users_.end(), user_id,
                             [](const UserData& u, std::string_view id) {
                               return u.history.user_id < id;
                             });
  if (it == users_.end() || it->history.user_id != user_id) return nullptr;
  return &*it;
}

SyntheticPool build_pool(const ExperimentContext& ctx, const UserData& user,
                         const ExperimentConfig& cfg) {
  const auto& uid = user.history.user_id;
  const std::uint64_t pool_seed = derive_seed(cfg.seed, "pool:" + uid);
  std::vector<std::string> extra;
  if (cfg.exclude_test_from_negatives) {
    for (const auto& c : user.test) extra.push_back(c.news_id);
  }
  switch (cfg.sampler) {
    case SamplerKind::synthetic:
      return synthetic_pool(user.history, ctx.index(),
                            SyntheticOptions{cfg.max_samples, pool_seed, extra});
    case SamplerKind::random:
      if (user.history.items.empty()) throw SkipUser("user " + uid + " has an empty history");
      return random_pool(user.history, ctx.catalog_ids(), pool_seed, cfg.max_samples, extra);
    case SamplerKind::impressions:
      return impressions_pool(user.history, user.train_impressions, cfg.max_samples);
  }
  throw UsageError("unknown sampler");
}

NetworkConfig user_network_config(const ExperimentConfig& cfg, const FeatureEncoder& encoder,
                                  std::string_view user_id) {
  NetworkConfig net = cfg.network;
  net.input_dim = static_cast<std::uint32_t>(encoder.dim());
  net.embedding_dim = static_cast<std::uint32_t>(encoder.embedding_dim());
  if (net.embedding_dim == 0) {
    net.bottleneck_widths.clear();
  } else if (net.bottleneck_widths.empty()) {
    net.bottleneck_widths = NetworkConfig{}.bottleneck_widths;
  }
  net.seed = derive_seed(cfg.seed, "model:" + std::string(user_id));
  return net;
}

UserModel train_on_pool(const ExperimentConfig& cfg, const FeatureEncoder& encoder,
                        SyntheticPool pool) {
  if (!pool.entries.empty() && pool.entries.front().features.empty()) attach_features(pool, encoder);
  UserModel model = init_network(user_network_config(cfg, encoder, pool.user_id), pool.user_id);
  train_user(model, pool);
  return model;
}

std::span<const UserData> selected_users(const ExperimentContext& ctx,
                                         const ExperimentConfig& cfg) {
  std::span<const UserData> all(ctx.users());
  if (cfg.user_limit && *cfg.user_limit < all.size()) return all.first(*cfg.user_limit);
  return all;
}

EvalReport run_experiment(const ExperimentContext& ctx, const ExperimentConfig& cfg) {
  EvalReport report;
  report.meta = RunMetadata{cfg.sampler, cfg.feature_set, cfg.max_samples, cfg.seed,
                            ctx.dataset_label()};
  const auto users = selected_users(ctx, cfg);
  const FeatureEncoder encoder = ctx.encoder(cfg.feature_set);

  struct Slot {
    std::optional<SyntheticPool> pool;
    UserEval eval;
    std::string error;
    double pool_s = 0.0, train_s = 0.0, predict_s = 0.0;
  };
  std::vector<Slot> slots(users.size());

  const double wall = timing_probe([&] {
    parallel_for(users.size(), cfg.workers, [&](std::size_t i) {
      auto& s = slots[i];
      s.eval.user_id = users[i].history.user_id;
      s.pool_s = timing_probe([&] {
        try {
          s.pool = build_pool(ctx, users[i], cfg);
          attach_features(*s.pool, encoder);
        } catch (const SkipUser& e) {
          s.eval.skip_reason = e.what();
        } catch (const Error& e) {
          s.error = e.what();
        }
      });
    });

    parallel_for(users.size(), cfg.workers, [&](std::size_t i) {
      auto& s = slots[i];
      if (!s.pool) return;
      if (users[i].test.empty()) {
        s.eval.skip_reason = "no test candidates";
        return;
      }
      try {
        s.eval.train_positives = s.pool->positives;
        s.eval.train_negatives = s.pool->negatives;
        std::optional<UserModel> model;
        s.train_s = timing_probe([&] { model = train_on_pool(cfg, encoder, std::move(*s.pool)); });
        s.predict_s = timing_probe([&] {
          auto ev = evaluate_user(*model, users[i].test, encoder);
          ev.train_positives = s.eval.train_positives;
          ev.train_negatives = s.eval.train_negatives;
          s.eval = std::move(ev);
        });
      } catch (const Error& e) {
        s.error = e.what();
      }
      s.pool.reset();
    });
  });

  for (auto& s : slots) {
    report.timing.add(Stage::pooling, s.pool_s);
    report.timing.add(Stage::training, s.train_s);
    report.timing.add(Stage::prediction, s.predict_s);
    if (!s.error.empty()) {
      report.errors.emplace_back(s.eval.user_id, s.error);
      continue;
    }
    if (!s.eval.auc && s.eval.skip_reason.empty()) s.eval.skip_reason = "not evaluated";
    report.users.push_back(std::move(s.eval));
  }
  report.timing.users = users.size();
  report.timing.wall_seconds = wall;
  report.finalize();
  return report;
}

}  // namespace dnnr
