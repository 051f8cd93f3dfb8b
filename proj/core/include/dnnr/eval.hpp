#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dnnr/encoder.hpp"
#include "dnnr/error.hpp"
#include "dnnr/ingest.hpp"
#include "dnnr/model.hpp"
#include "dnnr/sampler.hpp"
#include "dnnr/stats.hpp"

namespace dnnr {

/// AUC needs at least one positive and one negative.
class UndefinedAuc : public DataError {
 public:
  explicit UndefinedAuc(const std::string& why) : DataError(why) {}
};

/// Mann-Whitney AUC: fraction of (positive, negative) pairs ranked correctly,
/// ties counting one half. O(n log n).
double auc(std::span<const double> scores, std::span<const std::uint8_t> labels);

/// AUC over the pooled predictions of many users.
double group_auc(std::span<const double> all_scores, std::span<const std::uint8_t> all_labels);

struct UserEval {
  std::string user_id;
  std::optional<double> auc;
  std::string skip_reason;  ///< set iff auc is empty
  std::size_t train_positives = 0;
  std::size_t train_negatives = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
};

/// Scores the user's held-out candidates and computes their AUC. A test set
/// with a single class is a recorded skip, not an error.
UserEval evaluate_user(const UserModel& model, std::span<const Candidate> test,
                       const FeatureEncoder& encoder);

enum class Stage { pooling, training, prediction };

/// Seconds spent per stage plus the user count they cover.
struct TimingBlock {
  double pooling_seconds = 0.0;
  double train_seconds = 0.0;
  double predict_seconds = 0.0;
  double wall_seconds = 0.0;
  std::size_t users = 0;

  void add(Stage stage, double seconds);
  /// Minutes per 4,000 users for a stage total in seconds.
  double minutes_per_4000(double seconds) const;
};

/// Times `work` on a monotonic clock and returns elapsed seconds.
template <class Work>
double timing_probe(Work&& work) {
  const auto start = std::chrono::steady_clock::now();
  std::forward<Work>(work)();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

/// Times `work` and adds the duration to `timing` under `stage`.
template <class Work>
double timing_probe(Stage stage, TimingBlock& timing, Work&& work) {
  const double s = timing_probe(std::forward<Work>(work));
  timing.add(stage, s);
  return s;
}

struct RunMetadata {
  SamplerKind sampler = SamplerKind::synthetic;
  FeatureSet feature_set = FeatureSet::emb_tc;
  std::size_t max_samples = kDefaultMaxSamples;
  std::uint64_t seed = 0;
  std::string dataset;
};

struct EvalReport {
  static constexpr int kSchemaVersion = 1;

  RunMetadata meta;
  std::vector<UserEval> users;  ///< ascending user_id
  std::optional<double> group_auc;
  Summary individual;  ///< over users with a defined AUC
  TimingBlock timing;
  /// (user_id, message) for users that failed outright.
  std::vector<std::pair<std::string, std::string>> errors;

  std::size_t evaluated() const noexcept { return individual.count; }
  std::vector<double> individual_aucs() const;

  /// Sorts users, fills group_auc and the summary.
  void finalize();
};

/// Versioned JSON; see docs/formats.md.
std::string report_to_json(const EvalReport& report, bool include_timing = true);
void write_report_json(const EvalReport& report, const std::filesystem::path& path,
                       bool include_timing = true);

/// One row per user: user_id,sampler,feature_set,max_samples,auc,skip_reason.
std::string report_to_csv(std::span<const EvalReport> reports);
void write_auc_csv(std::span<const EvalReport> reports, const std::filesystem::path& path);

}  // namespace dnnr
