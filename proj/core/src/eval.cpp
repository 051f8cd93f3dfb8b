#include "dnnr/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>

#include <json.hpp>

#include "dnnr/binary_io.hpp"

namespace dnnr {
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

nlohmann::json summary_json(const Summary& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std},       {"min", s.min},
          {"q25", s.q25},     {"median", s.median}, {"q75", s.q75}, {"max", s.max}};
}

}  // namespace

double auc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw UsageError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the Mann-Whitney U, kept integral: each tie group of size g
  // starting at 0-based rank i has mid-rank (2i + g + 1) / 2.
  std::uint64_t pos = 0;
  std::uint64_t twice_rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    std::uint64_t group_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      group_pos += labels[order[j]] ? 1 : 0;
      ++j;
    }
    twice_rank_sum += group_pos * (2 * i + (j - i) + 1);
    pos += group_pos;
    i = j;
  }
  const std::uint64_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0) {
    throw UndefinedAuc(pos == 0 ? "no positive labels" : "no negative labels");
  }
  const std::uint64_t twice_u = twice_rank_sum - pos * (pos + 1);
  return static_cast<double>(twice_u) / static_cast<double>(2 * pos * neg);
}

double group_auc(std::span<const double> all_scores, std::span<const std::uint8_t> all_labels) {
  return auc(all_scores, all_labels);
}

UserEval evaluate_user(const UserModel& model, std::span<const Candidate> test,
                       const FeatureEncoder& encoder) {
  UserEval out;
  out.user_id = model.user_id;
  out.scores.reserve(test.size());
  out.labels.reserve(test.size());
  for (const auto& c : test) {
    out.scores.push_back(forward(model, encoder.encode(c.news_id), false));
    out.labels.push_back(c.clicked);
  }
  try {
    out.auc = auc(out.scores, out.labels);
  } catch (const UndefinedAuc& e) {
    out.skip_reason = std::string("single-class test set: ") + e.what();
  }
  return out;
}

void TimingBlock::add(Stage stage, double seconds) {
  switch (stage) {
    case Stage::pooling: pooling_seconds += seconds; break;
    case Stage::training: train_seconds += seconds; break;
    case Stage::prediction: predict_seconds += seconds; break;
  }
}

double TimingBlock::minutes_per_4000(double seconds) const {
  if (users == 0) return 0.0;
  return seconds / 60.0 * 4000.0 / static_cast<double>(users);
}

std::vector<double> EvalReport::individual_aucs() const {
  std::vector<double> v;
  for (const auto& u : users) {
    if (u.auc) v.push_back(*u.auc);
  }
  return v;
}

void EvalReport::finalize() {
  std::sort(users.begin(), users.end(),
            [](const UserEval& a, const UserEval& b) { return a.user_id < b.user_id; });
  std::sort(errors.begin(), errors.end());
  const auto aucs = individual_aucs();
  individual = describe(aucs);
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  for (const auto& u : users) {
    scores.insert(scores.end(), u.scores.begin(), u.scores.end());
    labels.insert(labels.end(), u.labels.begin(), u.labels.end());
  }
  try {
    group_auc = dnnr::group_auc(scores, labels);
  } catch (const UndefinedAuc&) {
    group_auc.reset();
  }
}

std::string report_to_json(const EvalReport& report, bool include_timing) {
  nlohmann::json j;
  j["schema"] = "dnnr.eval_report";
  j["schema_version"] = EvalReport::kSchemaVersion;
  j["run"] = {{"sampler", std::string(to_string(report.meta.sampler))},
              {"feature_set", std::string(to_string(report.meta.feature_set))},
              {"max_samples", report.meta.max_samples},
              {"seed", report.meta.seed},
              {"dataset", report.meta.dataset}};
  j["group_auc"] = report.group_auc ? nlohmann::json(*report.group_auc) : nlohmann::json();
  j["individual_auc"] = summary_json(report.individual);
  auto users = nlohmann::json::array();
  for (const auto& u : report.users) {
    nlohmann::json row = {{"user_id", u.user_id},
                          {"train_positives", u.train_positives},
                          {"train_negatives", u.train_negatives},
                          {"test_candidates", u.scores.size()}};
    row["auc"] = u.auc ? nlohmann::json(*u.auc) : nlohmann::json();
    if (!u.auc) row["skip_reason"] = u.skip_reason;
    users.push_back(std::move(row));
  }
  j["users"] = std::move(users);
  auto errors = nlohmann::json::array();
  for (const auto& [user, msg] : report.errors) errors.push_back({{"user_id", user}, {"error", msg}});
  j["errors"] = std::move(errors);
  if (include_timing) {
    const auto& t = report.timing;
    j["timing"] = {{"users", t.users},
                   {"pooling_seconds", t.pooling_seconds},
                   {"train_seconds", t.train_seconds},
                   {"predict_seconds", t.predict_seconds},
                   {"wall_seconds", t.wall_seconds},
                   {"pooling_minutes_per_4000_users", t.minutes_per_4000(t.pooling_seconds)},
                   {"train_minutes_per_4000_users", t.minutes_per_4000(t.train_seconds)},
                   {"predict_minutes_per_4000_users", t.minutes_per_4000(t.predict_seconds)}};
  }
  return j.dump(2) + "\n";
}

void write_report_json(const EvalReport& report, const std::filesystem::path& path,
                       bool include_timing) {
  write_file_atomic(path, report_to_json(report, include_timing));
}

std::string report_to_csv(std::span<const EvalReport> reports) {
  std::string out = "user_id,sampler,feature_set,max_samples,auc,skip_reason\n";
  for (const auto& r : reports) {
    for (const auto& u : r.users) {
      out += u.user_id;
      out += ',';
      out += to_string(r.meta.sampler);
      out += ',';
      out += to_string(r.meta.feature_set);
      out += ',';
      out += std::to_string(r.meta.max_samples);
      out += ',';
      if (u.auc) out += format_double(*u.auc);
      out += ',';
      if (!u.auc) {
        // The reason is free text; keep the CSV single-field.
        std::string reason = u.skip_reason;
        std::replace(reason.begin(), reason.end(), ',', ';');
        out += reason;
      }
      out += '\n';
    }
  }
  return out;
}

void write_auc_csv(std::span<const EvalReport> reports, const std::filesystem::path& path) {
  write_file_atomic(path, report_to_csv(reports));
}

}  // namespace dnnr
