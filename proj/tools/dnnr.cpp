// dnnr: per-user news recommendation pipeline.
//
//   dnnr ingest    --news N --behaviors B [--dataset out.dnnrdat]
//   dnnr pool      --dataset D --embeddings E --pools out.dnnrpool
//   dnnr train     --dataset D --embeddings E --pools P --models dir/
//   dnnr evaluate  --dataset D --embeddings E --reports dir/ [--sweep max-samples=15,30,60,120]
//   dnnr benchmark --dataset D [--embedding-mode hash] --reports dir/
//   dnnr synth     --out dir/ [--users 200 --items 3000]
//
// Options are shared by every subcommand and may also come from a TOML/INI
// file given with --config. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dnnr/error.hpp"
#include "dnnr/pipeline.hpp"
#include "dnnr/synth.hpp"

namespace {

struct Flags {
  dnnr::RunConfig run;
  std::string sampler = "synthetic";
  std::string feature_set = "embtc";
  std::string optimizer = "adam";
  std::string embedding_mode = "file";
  std::string parse_mode = "skip";
  std::string data_root;
  std::size_t user_limit = 0;
  std::vector<std::string> sweeps;
  bool history_only = false;
  bool verbose = false;
  bool quiet = false;
};

void add_run_options(CLI::App& app, Flags& f) {
  auto& r = f.run;
  app.add_option("--news", r.news, "MIND news.tsv");
  app.add_option("--behaviors", r.behaviors, "MIND behaviors.tsv");
  app.add_option("--dataset", r.dataset, "Ingested dataset file (DNNR-DAT)");
  app.add_option("--embeddings", r.embeddings, "Title embedding file (DNNR-EMB)");
  app.add_option("--pools", r.pools, "Pool file (DNNR-POOL)");
  app.add_option("--models", r.models, "Directory of per-user model files");
  app.add_option("--reports", r.reports, "Directory for reports");
  app.add_option("--data-root", f.data_root, "Base directory for relative input paths")
      ->envname("DNNR_DATA_ROOT");

  app.add_option("--sampler", f.sampler, "synthetic, random or impressions")->capture_default_str();
  app.add_option("--feature-set", f.feature_set, "emb, tc, embc, embt or embtc")
      ->capture_default_str();
  app.add_option("--max-samples", r.max_samples, "Positives per user (and negatives)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--epochs", r.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--batch-size", r.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--learning-rate", r.learning_rate)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--optimizer", f.optimizer, "adam or sgd")->capture_default_str();
  app.add_option("--seed", r.seed)->capture_default_str();
  app.add_option("--workers", r.workers)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--user-limit", f.user_limit, "Only the first N users by id (0 = all)");
  app.add_option("--embedding-mode", f.embedding_mode, "file or hash")->capture_default_str();
  app.add_option("--hash-dim", r.hash_dim)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--hash-seed", r.hash_seed)->capture_default_str();
  app.add_flag("--history-only", f.history_only,
               "Train on the history column only, ignoring clicks in earlier impressions");
  app.add_flag("--exclude-test-negatives", r.exclude_test_from_negatives,
               "Never draw a user's test candidates as negatives");
  app.add_option("--parse-mode", f.parse_mode, "skip or strict")->capture_default_str();
  app.add_option("--sweep", f.sweeps, "Grid axis, e.g. max-samples=15,30,60,120 (repeatable)");
  app.add_option("--repetitions", r.repetitions, "Benchmark repetitions")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_flag("-v,--verbose", f.verbose);
  app.add_flag("-q,--quiet", f.quiet, "Only log errors");
}

void finish_config(Flags& f) {
  auto& r = f.run;
  r.sampler = dnnr::parse_sampler_kind(f.sampler);
  r.feature_set = dnnr::parse_feature_set(f.feature_set);
  r.optimizer = dnnr::parse_optimizer(f.optimizer);
  r.embedding_mode = dnnr::parse_embedding_mode(f.embedding_mode);
  if (f.parse_mode == "skip") {
    r.parse_mode = dnnr::ParseMode::skip;
  } else if (f.parse_mode == "strict") {
    r.parse_mode = dnnr::ParseMode::strict;
  } else {
    throw dnnr::UsageError("unknown parse mode '" + f.parse_mode + "' (expected skip or strict)");
  }
  if (f.user_limit > 0) r.user_limit = f.user_limit;
  r.merge_clicks = !f.history_only;
  for (const auto& s : f.sweeps) dnnr::apply_sweep(r, s);
  r.apply_data_root(f.data_root);
  if (f.quiet) {
    spdlog::set_level(spdlog::level::err);
  } else if (f.verbose) {
    spdlog::set_level(spdlog::level::debug);
  }
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("dnnr"));
  CLI::App app{"Per-user neural news recommendation pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI file with option defaults");
  Flags flags;
  add_run_options(app, flags);

  auto* ingest = app.add_subcommand("ingest", "Parse MIND TSVs and print corpus statistics");
  auto* pool = app.add_subcommand("pool", "Build per-user training pools");
  auto* train = app.add_subcommand("train", "Train one model per pooled user");
  auto* evaluate = app.add_subcommand("evaluate", "Train, score and report AUC");
  auto* benchmark = app.add_subcommand("benchmark", "Time pooling, training and prediction");
  auto* synth = app.add_subcommand("synth", "Write a synthetic MIND-format corpus");

  dnnr::SynthConfig synth_cfg;
  std::string synth_out;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--users", synth_cfg.users)->capture_default_str();
  synth->add_option("--items", synth_cfg.news)->capture_default_str();
  synth->add_option("--categories", synth_cfg.categories)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(dnnr::ErrorKind::usage);
  }

  try {
    finish_config(flags);
    const auto& cfg = flags.run;
    if (*ingest) {
      dnnr::cmd_ingest(cfg, std::cout);
    } else if (*pool) {
      dnnr::cmd_pool(cfg, std::cout);
    } else if (*train) {
      dnnr::cmd_train(cfg, std::cout);
    } else if (*evaluate) {
      dnnr::cmd_evaluate(cfg, std::cout);
    } else if (*benchmark) {
      dnnr::cmd_benchmark(cfg, std::cout);
    } else if (*synth) {
      synth_cfg.seed = cfg.seed;
      const auto data = dnnr::generate_corpus(synth_cfg);
      std::filesystem::create_directories(synth_out);
      dnnr::write_mind_tsv(data, synth_out);
      std::cout << "wrote " << data.catalog.size() << " news and " << data.behaviors.size()
                << " impressions to " << synth_out << '\n';
    }
  } catch (const dnnr::Error& e) {
    spdlog::error("{}", e.what());
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(dnnr::ErrorKind::data);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return static_cast<int>(dnnr::ErrorKind::data);
  }
  return EXIT_SUCCESS;
}
