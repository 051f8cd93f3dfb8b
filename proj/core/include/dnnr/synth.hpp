#pragma once

// Synthetic MIND-format corpora for tests, smoke runs and benchmarks.
//
// Titles are built from per-category and per-type word lists plus shared
// filler words, so hash embeddings cluster by topic. Each user favors a few
// categories; histories and clicks lean toward them.

#include <cstdint>
#include <filesystem>

#include "dnnr/ingest.hpp"

namespace dnnr {

struct SynthConfig {
  std::size_t users = 200;
  std::size_t news = 3000;
  std::size_t types = 16;
  std::size_t categories = 64;
  std::size_t min_impressions = 1;
  std::size_t max_impressions = 4;
  std::size_t min_candidates = 5;
  std::size_t max_candidates = 20;
  double mean_history = 20.0;
  std::size_t max_history = 150;
  /// Probability that a history item comes from a favored category.
  double history_focus = 0.75;
  std::uint64_t seed = 7;
};

Dataset generate_corpus(const SynthConfig& config);

/// Writes news.tsv (8 MIND columns, abstract/url/entities empty) and
/// behaviors.tsv under `dir`.
void write_mind_tsv(const Dataset& data, const std::filesystem::path& dir);

}  // namespace dnnr
