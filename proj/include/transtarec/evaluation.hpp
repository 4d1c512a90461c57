// Top@k evaluation over a chronological split, report comparison, and the
// time-sensitivity case study.
#pragma once

#include "transtarec/corpus.hpp"
#include "transtarec/model.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace transtarec {

struct EvalConfig {
  std::vector<int> ks = {1, 5, 10, 20, 50};
  TransitionTask task = TransitionTask::next;
  double gap_hours = 5.0;
  RankMode rank_mode = RankMode::inner;
  bool skip_unknown = false;  // skip (and count) transitions with ids unknown to the model
  int n_threads = 1;
  bool per_user = false;
  bool collect_ranks = false;  // keep per-transition ground-truth ranks in the report

  void validate(int n_pois) const;  // ks strictly increasing, max <= |P|
};

struct PerUserStats {
  std::int64_t n_samples = 0;
  std::vector<std::int64_t> hits;  // parallel to ks
};

struct EvalReport {
  std::vector<int> ks;
  std::vector<std::int64_t> hits;    // per k
  std::vector<double> hit_ratio;     // hits / n_samples
  std::int64_t n_samples = 0;
  std::int64_t skipped = 0;          // transitions dropped under skip_unknown
  TransitionTask task = TransitionTask::next;
  double gap_hours = 5.0;
  RankMode rank_mode = RankMode::inner;
  std::map<std::string, PerUserStats> per_user;  // keyed by user id, optional
  // Ground-truth ranks in transition order (users ascending, pairs in
  // make_transitions order); filled only under collect_ranks.
  std::vector<int> ranks;
};

// Translation from a corpus's index space into the model's (entry -1 =
// unknown to the model). Identity when evaluating on the training corpus.
struct IndexMaps {
  std::vector<int> users;
  std::vector<int> pois;
};

// Ground-truth rank per test transition: transitions come from
// make_transitions over each user's full sequence, keeping pairs whose
// target lies in the test region; candidates are the model's whole POI
// vocabulary. Hit counting is integer so any n_threads gives the same report.
EvalReport evaluate(const Model& model, const Split& split, const EvalConfig& config,
                    const IndexMaps* maps = nullptr);

std::string format_report(const EvalReport& report, const std::string& name = "");

struct Comparison {
  std::vector<std::string> names;
  std::vector<int> ks;
  std::vector<std::vector<double>> ratios;       // [report][k]
  std::vector<std::vector<double>> improvement;  // [report>0][k], (first-other)/other
};

// Side-by-side table; the first report is the reference whose relative
// improvement over each other report is tabulated. Reports must share ks and
// task (MismatchedConfig otherwise).
Comparison compare(std::span<const std::pair<std::string, EvalReport>> reports);
std::string format_comparison(const Comparison& cmp);

struct CaseQuery {
  TimeKey prev_time;
  int prev_poi = -1;
  TimeKey next_time;
};

// Full-vocabulary rank of each watched POI for each query, in query order.
std::vector<std::vector<int>> case_study(const Model& model, int user,
                                         std::span<const CaseQuery> queries,
                                         std::span<const int> watch);

const char* to_string(TransitionTask task);

}  // namespace transtarec
