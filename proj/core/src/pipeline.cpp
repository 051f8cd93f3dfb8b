#include "dnnr/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <ostream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dnnr/binary_io.hpp"
#include "dnnr/error.hpp"
#include "dnnr/model.hpp"
#include "dnnr/parallel.hpp"

namespace dnnr {
namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::vector<std::string_view> split_list(std::string_view text) {
  std::vector<std::string_view> out;
  while (!text.empty()) {
    const auto comma = text.find(',');
    auto item = text.substr(0, comma);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.front()))) item.remove_prefix(1);
    while (!item.empty() && std::isspace(static_cast<unsigned char>(item.back()))) item.remove_suffix(1);
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}

std::size_t parse_count(std::string_view text) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size() || v == 0) {
    throw UsageError("expected a positive integer, got '" + std::string(text) + "'");
  }
  return v;
}

void require_path(const std::filesystem::path& p, std::string_view flag) {
  if (p.empty()) throw UsageError("missing required " + std::string(flag));
}

struct GridPoint {
  SamplerKind sampler;
  FeatureSet feature_set;
  std::size_t max_samples;
};

std::vector<GridPoint> grid(const RunConfig& cfg) {
  const auto samplers =
      cfg.sweep_samplers.empty() ? std::vector<SamplerKind>{cfg.sampler} : cfg.sweep_samplers;
  const auto sets = cfg.sweep_feature_sets.empty() ? std::vector<FeatureSet>{cfg.feature_set}
                                                   : cfg.sweep_feature_sets;
  const auto sizes = cfg.sweep_max_samples.empty() ? std::vector<std::size_t>{cfg.max_samples}
                                                   : cfg.sweep_max_samples;
  std::vector<GridPoint> out;
  for (auto s : samplers) {
    for (auto fs : sets) {
      for (auto m : sizes) out.push_back({s, fs, m});
    }
  }
  return out;
}

std::string report_name(const GridPoint& g) {
  return "report_" + std::string(to_string(g.sampler)) + "_" + std::string(to_string(g.feature_set)) +
         "_" + std::to_string(g.max_samples) + ".json";
}

void print_run_line(const EvalReport& r, std::ostream& out) {
  out << to_string(r.meta.sampler) << ' ' << to_string(r.meta.feature_set)
      << " max_samples=" << r.meta.max_samples << ": users=" << r.users.size()
      << " evaluated=" << r.evaluated() << " errors=" << r.errors.size();
  if (r.evaluated() > 0) {
    out << " mean_auc=" << fixed(r.individual.mean, 4) << " median_auc="
        << fixed(r.individual.median, 4) << " std_auc=" << fixed(r.individual.std, 4);
  }
  if (r.group_auc) out << " group_auc=" << fixed(*r.group_auc, 4);
  out << '\n';
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

EmbeddingMode parse_embedding_mode(std::string_view name) {
  if (name == "file") return EmbeddingMode::file;
  if (name == "hash") return EmbeddingMode::hash;
  throw UsageError("unknown embedding mode '" + std::string(name) + "' (expected file or hash)");
}

std::string_view to_string(EmbeddingMode mode) noexcept {
  return mode == EmbeddingMode::file ? "file" : "hash";
}

void RunConfig::apply_data_root(const std::filesystem::path& root) {
  if (root.empty()) return;
  for (auto* p : {&news, &behaviors, &dataset, &embeddings}) {
    if (!p->empty() && p->is_relative()) *p = root / *p;
  }
}

ExperimentConfig RunConfig::experiment() const {
  ExperimentConfig e;
  e.sampler = sampler;
  e.feature_set = feature_set;
  e.max_samples = max_samples;
  e.seed = seed;
  e.workers = workers;
  e.user_limit = user_limit;
  e.exclude_test_from_negatives = exclude_test_from_negatives;
  e.network.epochs = epochs;
  e.network.batch_size = batch_size;
  e.network.learning_rate = learning_rate;
  e.network.optimizer = optimizer;
  return e;
}

void apply_sweep(RunConfig& config, std::string_view spec) {
  const auto eq = spec.find('=');
  if (eq == std::string_view::npos) {
    throw UsageError("sweep must look like name=v1,v2,... (got '" + std::string(spec) + "')");
  }
  const auto name = spec.substr(0, eq);
  const auto values = split_list(spec.substr(eq + 1));
  if (values.empty()) throw UsageError("sweep '" + std::string(name) + "' has no values");
  if (name == "max-samples" || name == "max_samples") {
    config.sweep_max_samples.clear();
    for (auto v : values) config.sweep_max_samples.push_back(parse_count(v));
  } else if (name == "sampler") {
    config.sweep_samplers.clear();
    for (auto v : values) config.sweep_samplers.push_back(parse_sampler_kind(v));
  } else if (name == "feature-set" || name == "feature_set") {
    config.sweep_feature_sets.clear();
    for (auto v : values) {
      if (v == "all") {
        config.sweep_feature_sets.assign(std::begin(kAllFeatureSets), std::end(kAllFeatureSets));
      } else {
        config.sweep_feature_sets.push_back(parse_feature_set(v));
      }
    }
  } else {
    throw UsageError("unknown sweep '" + std::string(name) +
                     "' (expected max-samples, sampler or feature-set)");
  }
}

LoadedInputs load_inputs(const RunConfig& cfg) {
  LoadedInputs in;
  if (!cfg.dataset.empty()) {
    in.data = load_dataset(cfg.dataset);
    in.label = cfg.dataset.filename().string();
  } else if (!cfg.news.empty() && !cfg.behaviors.empty()) {
    in.data = load_mind(cfg.news, cfg.behaviors, cfg.parse_mode);
    in.label = cfg.behaviors.parent_path().filename().string();
  } else {
    throw UsageError("need --dataset, or both --news and --behaviors");
  }
  if (cfg.embedding_mode == EmbeddingMode::file) {
    require_path(cfg.embeddings, "--embeddings (or use --embedding-mode hash)");
    in.store = load_embeddings(cfg.embeddings);
  } else {
    in.store = hash_embed_catalog(in.data.catalog, cfg.hash_dim, cfg.hash_seed);
  }
  const std::size_t zero = in.store.normalize();
  if (zero > 0) spdlog::warn("{} embedding rows are all-zero and will be ignored", zero);
  return in;
}

std::string model_file_stem(std::string_view user_id) {
  std::string out;
  for (char c : user_id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out.front() == '.') out.insert(out.begin(), '_');
  return out;
}

void print_corpus_stats(const CorpusStats& s, std::ostream& out) {
  auto row = [&](std::string_view name, const std::string& value) {
    out << name;
    for (std::size_t i = name.size(); i < 28; ++i) out << ' ';
    out << value << '\n';
  };
  row("users", std::to_string(s.users));
  row("news", std::to_string(s.news));
  row("impressions", std::to_string(s.impressions));
  row("candidate impressions", std::to_string(s.candidate_impressions));
  row("unique interactions", std::to_string(s.unique_interactions));
  row("news types", std::to_string(s.news_types));
  row("news categories", std::to_string(s.news_categories));
  const auto& r = s.items_read;
  row("items read per user", "mean " + fixed(r.mean, 2) + ", std " + fixed(r.std, 2) + ", min " +
                                 fixed(r.min, 0) + ", median " + fixed(r.median, 1) + ", max " +
                                 fixed(r.max, 0));
}

void cmd_ingest(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.news, "--news");
  require_path(cfg.behaviors, "--behaviors");
  double seconds = 0.0;
  Dataset data;
  seconds = timing_probe([&] { data = load_mind(cfg.news, cfg.behaviors, cfg.parse_mode); });
  if (cfg.user_limit) data.restrict_users(*cfg.user_limit);
  print_corpus_stats(corpus_stats(data, HistoryOptions{cfg.merge_clicks}), out);
  out << "parse time (s)              " << fixed(seconds, 3) << '\n';
  if (!cfg.dataset.empty()) {
    save_dataset(data, cfg.dataset);
    out << "wrote " << cfg.dataset.string() << '\n';
  }
}

void cmd_pool(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.pools, "--pools");
  const auto in = load_inputs(cfg);
  const ExperimentContext ctx(in.data, in.store, SplitOptions{cfg.merge_clicks}, in.label);
  const auto ecfg = cfg.experiment();
  const auto users = selected_users(ctx, ecfg);

  std::vector<std::optional<SyntheticPool>> slots(users.size());
  std::vector<std::string> reasons(users.size());
  const double seconds = timing_probe([&] {
    parallel_for(users.size(), cfg.workers, [&](std::size_t i) {
      try {
        slots[i] = build_pool(ctx, users[i], ecfg);
      } catch (const SkipUser& e) {
        reasons[i] = e.what();
      }
    });
  });

  PoolFile file;
  file.kind = cfg.sampler;
  file.max_samples = static_cast<std::uint32_t>(cfg.max_samples);
  file.seed = cfg.seed;
  std::size_t skipped = 0;
  for (std::size_t i = 0; i < users.size(); ++i) {
    if (slots[i]) {
      file.pools.push_back(std::move(*slots[i]));
    } else {
      ++skipped;
      spdlog::warn("skipping user {}: {}", users[i].history.user_id, reasons[i]);
    }
  }
  save_pools(file, cfg.pools);
  TimingBlock t;
  t.users = users.size();
  out << "pooled " << file.pools.size() << " users (" << skipped << " skipped) with sampler "
      << to_string(cfg.sampler) << ", max_samples " << cfg.max_samples << '\n';
  out << "pooling time " << fixed(seconds, 3) << " s (" << fixed(t.minutes_per_4000(seconds), 3)
      << " min per 4000 users)\n";
  out << "wrote " << cfg.pools.string() << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.pools, "--pools");
  require_path(cfg.models, "--models");
  PoolFile file = load_pools(cfg.pools);
  if (file.pools.empty()) throw DataError("pool file " + cfg.pools.string() + " contains no pools");
  const auto in = load_inputs(cfg);
  const auto types = build_vocab(in.data.catalog, CatalogField::type);
  const auto categories = build_vocab(in.data.catalog, CatalogField::category);
  const FeatureEncoder encoder(in.data.catalog, &in.store, types, categories, cfg.feature_set);
  const auto ecfg = cfg.experiment();

  std::filesystem::create_directories(cfg.models);
  std::vector<std::string> errors(file.pools.size());
  const double seconds = timing_probe([&] {
    parallel_for(file.pools.size(), cfg.workers, [&](std::size_t i) {
      const std::string uid = file.pools[i].user_id;
      try {
        const auto model = train_on_pool(ecfg, encoder, std::move(file.pools[i]));
        save_model(model, cfg.models / (model_file_stem(uid) + ".dnnrmod"));
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    });
  });
  std::size_t failed = 0;
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (errors[i].empty()) continue;
    ++failed;
    spdlog::error("training failed for user {}: {}", file.pools[i].user_id, errors[i]);
  }
  out << "trained " << (file.pools.size() - failed) << " models (" << failed << " failed), "
      << to_string(cfg.feature_set) << " features, " << cfg.epochs << " epochs\n";
  out << "training time " << fixed(seconds, 3) << " s\n";
  out << "wrote " << cfg.models.string() << '\n';
  if (failed == file.pools.size()) throw DataError("no model could be trained");
}

EvalReport evaluate_models(const ExperimentContext& ctx, const ExperimentConfig& cfg,
                           const std::filesystem::path& models_dir) {
  EvalReport report;
  report.meta = RunMetadata{cfg.sampler, cfg.feature_set, cfg.max_samples, cfg.seed,
                            ctx.dataset_label()};
  const auto users = selected_users(ctx, cfg);
  const FeatureEncoder encoder = ctx.encoder(cfg.feature_set);
  std::vector<UserEval> evals(users.size());
  std::vector<std::string> errors(users.size());
  std::vector<double> predict_s(users.size(), 0.0);

  report.timing.wall_seconds = timing_probe([&] {
    parallel_for(users.size(), cfg.workers, [&](std::size_t i) {
      const auto& uid = users[i].history.user_id;
      evals[i].user_id = uid;
      const auto path = models_dir / (model_file_stem(uid) + ".dnnrmod");
      if (!std::filesystem::exists(path)) {
        evals[i].skip_reason = "no model file";
        return;
      }
      if (users[i].test.empty()) {
        evals[i].skip_reason = "no test candidates";
        return;
      }
      try {
        const auto model = load_model(path);
        if (model.user_id != uid) {
          throw DataError(path.string() + " holds a model for user " + model.user_id);
        }
        if (model.config.input_dim != encoder.dim()) {
          throw UsageError(path.string() + " expects " + std::to_string(model.config.input_dim) +
                           "-d inputs but feature set " + std::string(to_string(cfg.feature_set)) +
                           " gives " + std::to_string(encoder.dim()));
        }
        predict_s[i] = timing_probe([&] { evals[i] = evaluate_user(model, users[i].test, encoder); });
      } catch (const Error& e) {
        errors[i] = e.what();
      }
    });
  });

  for (std::size_t i = 0; i < users.size(); ++i) {
    report.timing.add(Stage::prediction, predict_s[i]);
    if (!errors[i].empty()) {
      report.errors.emplace_back(users[i].history.user_id, errors[i]);
    } else {
      report.users.push_back(std::move(evals[i]));
    }
  }
  report.timing.users = users.size();
  report.finalize();
  return report;
}

std::vector<EvalReport> cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  require_path(cfg.reports, "--reports");
  const auto in = load_inputs(cfg);
  const ExperimentContext ctx(in.data, in.store, SplitOptions{cfg.merge_clicks}, in.label);
  std::filesystem::create_directories(cfg.reports);

  std::vector<EvalReport> reports;
  for (const auto& g : grid(cfg)) {
    RunConfig point = cfg;
    point.sampler = g.sampler;
    point.feature_set = g.feature_set;
    point.max_samples = g.max_samples;
    const auto ecfg = point.experiment();
    auto report = cfg.models.empty() ? run_experiment(ctx, ecfg)
                                     : evaluate_models(ctx, ecfg, cfg.models);
    write_report_json(report, cfg.reports / report_name(g));
    print_run_line(report, out);
    const auto& t = report.timing;
    out << "  pooling " << fixed(t.minutes_per_4000(t.pooling_seconds), 3) << " min/4000, training "
        << fixed(t.minutes_per_4000(t.train_seconds), 3) << " min/4000, prediction "
        << fixed(t.minutes_per_4000(t.predict_seconds), 3) << " min/4000\n";
    for (const auto& [user, msg] : report.errors) spdlog::error("user {}: {}", user, msg);
    reports.push_back(std::move(report));
  }
  write_auc_csv(reports, cfg.reports / "auc.csv");
  out << "wrote " << reports.size() << " report(s) and auc.csv to " << cfg.reports.string() << '\n';
  return reports;
}

void cmd_benchmark(const RunConfig& cfg_in, std::ostream& out) {
  RunConfig cfg = cfg_in;
  if (cfg.embedding_mode == EmbeddingMode::file && cfg.embeddings.empty()) {
    spdlog::info("no embedding file given; benchmarking with hash embeddings");
    cfg.embedding_mode = EmbeddingMode::hash;
  }
  if (cfg.repetitions == 0) throw UsageError("--repetitions must be at least 1");
  const auto in = load_inputs(cfg);
  const ExperimentContext ctx(in.data, in.store, SplitOptions{cfg.merge_clicks}, in.label);

  nlohmann::json runs = nlohmann::json::array();
  out << "sampler     features  max  stage       min/4000 mean   std\n";
  for (const auto& g : grid(cfg)) {
    RunConfig point = cfg;
    point.sampler = g.sampler;
    point.feature_set = g.feature_set;
    point.max_samples = g.max_samples;
    const auto ecfg = point.experiment();
    std::vector<double> pool_m, train_m, pred_m, aucs;
    std::size_t users = 0;
    for (std::size_t rep = 0; rep < cfg.repetitions; ++rep) {
      const auto r = run_experiment(ctx, ecfg);
      const auto& t = r.timing;
      users = t.users;
      pool_m.push_back(t.minutes_per_4000(t.pooling_seconds));
      train_m.push_back(t.minutes_per_4000(t.train_seconds));
      pred_m.push_back(t.minutes_per_4000(t.predict_seconds));
      if (r.evaluated() > 0) aucs.push_back(r.individual.mean);
    }
    nlohmann::json stages = nlohmann::json::object();
    for (const auto& [name, v] : {std::pair{"pooling", &pool_m}, std::pair{"training", &train_m},
                                  std::pair{"prediction", &pred_m}}) {
      stages[name] = {{"minutes_per_4000_users", *v},
                      {"mean", mean_of(*v)},
                      {"std", std_of(*v)}};
      char line[160];
      std::snprintf(line, sizeof(line), "%-11s %-9s %4zu  %-10s %14.4f %8.4f\n",
                    std::string(to_string(g.sampler)).c_str(),
                    std::string(to_string(g.feature_set)).c_str(), g.max_samples, name,
                    mean_of(*v), std_of(*v));
      out << line;
    }
    runs.push_back({{"sampler", std::string(to_string(g.sampler))},
                    {"feature_set", std::string(to_string(g.feature_set))},
                    {"max_samples", g.max_samples},
                    {"users", users},
                    {"repetitions", cfg.repetitions},
                    {"mean_individual_auc", aucs.empty() ? nlohmann::json() : nlohmann::json(mean_of(aucs))},
                    {"stages", std::move(stages)}});
  }
  if (!cfg.reports.empty()) {
    std::filesystem::create_directories(cfg.reports);
    nlohmann::json j = {{"schema", "dnnr.benchmark"},
                        {"schema_version", 1},
                        {"embedding_mode", std::string(to_string(cfg.embedding_mode))},
                        {"workers", cfg.workers},
                        {"runs", std::move(runs)}};
    write_file_atomic(cfg.reports / "benchmark.json", j.dump(2) + "\n");
    out << "wrote " << (cfg.reports / "benchmark.json").string() << '\n';
  }
}

}  // namespace dnnr
