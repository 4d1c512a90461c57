#include "transtarec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <thread>

namespace transtarec {

namespace {

struct TestTransition {
  int user_model = -1;  // model index space
  int user_corpus = -1;
  TimeKey prev_time;
  int prev_poi = -1;  // model index space
  TimeKey next_time;
  int truth = -1;  // model index space
};

int map_index(const std::vector<int>& map, int idx) {
  return map.empty() ? idx : map[static_cast<std::size_t>(idx)];
}

}  // namespace

void EvalConfig::validate(int n_pois) const {
  if (ks.empty()) throw InvalidArgumentError("ks must not be empty");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] < 1) throw InvalidArgumentError("every k must be >= 1");
    if (i > 0 && ks[i] <= ks[i - 1]) {
      throw InvalidArgumentError("ks must be strictly increasing");
    }
  }
  if (ks.back() > n_pois) {
    throw InvalidArgumentError("largest k (" + std::to_string(ks.back()) +
                               ") exceeds POI vocabulary size (" + std::to_string(n_pois) +
                               ")");
  }
  if (n_threads < 1) throw InvalidArgumentError("n_threads must be >= 1");
  if (!(gap_hours >= 0)) throw InvalidArgumentError("gap_hours must be >= 0");
}

EvalReport evaluate(const Model& model, const Split& split, const EvalConfig& config,
                    const IndexMaps* maps) {
  config.validate(model.params.n_pois());
  if (maps == nullptr) {
    // Identity mapping only makes sense when the split lives in the model's
    // index space already.
    if (split.corpus.users.size() > model.params.n_users() ||
        split.corpus.pois.size() > model.params.n_pois()) {
      throw VocabMismatchError("split vocabulary exceeds model vocabulary; pass index maps");
    }
  }

  EvalReport report;
  report.ks = config.ks;
  report.task = config.task;
  report.gap_hours = config.gap_hours;
  report.rank_mode = config.rank_mode;
  report.hits.assign(config.ks.size(), 0);

  std::vector<TestTransition> transitions;
  for (int u = 0; u < split.corpus.users.size(); ++u) {
    const auto& seq = split.corpus.sequences[static_cast<std::size_t>(u)];
    const std::size_t boundary = split.boundary[static_cast<std::size_t>(u)];
    const auto pairs = make_transitions(seq, config.task, config.gap_hours);

    const int user_m = maps ? map_index(maps->users, u) : u;
    for (const auto& [i, j] : pairs) {
      if (static_cast<std::size_t>(j) < boundary) continue;  // target must be a test record
      const Event& prev = seq[static_cast<std::size_t>(i)];
      const Event& next = seq[static_cast<std::size_t>(j)];
      const int prev_m = maps ? map_index(maps->pois, prev.poi) : prev.poi;
      const int next_m = maps ? map_index(maps->pois, next.poi) : next.poi;
      if (user_m < 0 || prev_m < 0 || next_m < 0) {
        if (!config.skip_unknown) {
          const std::string offending = user_m < 0 ? split.corpus.users.id(u)
                                        : prev_m < 0 ? split.corpus.pois.id(prev.poi)
                                                     : split.corpus.pois.id(next.poi);
          throw VocabMismatchError("id unknown to the model: " + offending);
        }
        ++report.skipped;
        continue;
      }
      TestTransition t;
      t.user_model = user_m;
      t.user_corpus = u;
      t.prev_time = prev.time;
      t.prev_poi = prev_m;
      t.next_time = next.time;
      t.truth = next_m;
      transitions.push_back(t);
    }
  }

  if (transitions.empty()) throw EmptyTestSetError("no test transitions for this task");
  report.n_samples = static_cast<std::int64_t>(transitions.size());

  std::vector<int> ranks(transitions.size());
  const auto rank_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const TestTransition& t = transitions[i];
      const QueryContext ctx =
          make_query_context(model, t.user_model, t.prev_time, t.prev_poi, t.next_time);
      ranks[i] = rank_of(model, ctx, t.truth, config.rank_mode);
    }
  };

  const int threads = std::min<int>(config.n_threads, static_cast<int>(transitions.size()));
  if (threads <= 1) {
    rank_range(0, transitions.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (transitions.size() + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::size_t begin = static_cast<std::size_t>(t) * chunk;
      const std::size_t end = std::min(transitions.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(rank_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < transitions.size(); ++i) {
    for (std::size_t ki = 0; ki < config.ks.size(); ++ki) {
      if (ranks[i] <= config.ks[ki]) ++report.hits[ki];
    }
    if (config.per_user) {
      auto& pu = report.per_user[split.corpus.users.id(transitions[i].user_corpus)];
      if (pu.hits.empty()) pu.hits.assign(config.ks.size(), 0);
      ++pu.n_samples;
      for (std::size_t ki = 0; ki < config.ks.size(); ++ki) {
        if (ranks[i] <= config.ks[ki]) ++pu.hits[ki];
      }
    }
  }

  report.hit_ratio.resize(config.ks.size());
  for (std::size_t ki = 0; ki < config.ks.size(); ++ki) {
    report.hit_ratio[ki] = static_cast<double>(report.hits[ki]) /
                           static_cast<double>(report.n_samples);
  }
  if (config.collect_ranks) report.ranks = std::move(ranks);
  return report;
}

std::string format_report(const EvalReport& report, const std::string& name) {
  std::string out;
  char buf[128];
  if (!name.empty()) out += "model " + name + "\n";
  out += std::string("task ") + to_string(report.task) + "\n";
  if (report.task == TransitionTask::timespec_min_gap) {
    std::snprintf(buf, sizeof buf, "gap_hours %g\n", report.gap_hours);
    out += buf;
  }
  out += std::string("rank_mode ") + to_string(report.rank_mode) + "\n";
  std::snprintf(buf, sizeof buf, "n_samples %lld\n",
                static_cast<long long>(report.n_samples));
  out += buf;
  if (report.skipped > 0) {
    std::snprintf(buf, sizeof buf, "skipped %lld\n", static_cast<long long>(report.skipped));
    out += buf;
  }
  for (std::size_t i = 0; i < report.ks.size(); ++i) {
    std::snprintf(buf, sizeof buf, "top@%d %.6f\n", report.ks[i], report.hit_ratio[i]);
    out += buf;
  }
  return out;
}

Comparison compare(std::span<const std::pair<std::string, EvalReport>> reports) {
  if (reports.size() < 2) throw InvalidArgumentError("compare needs at least two reports");
  const EvalReport& first = reports.front().second;
  Comparison cmp;
  cmp.ks = first.ks;
  for (const auto& [name, rep] : reports) {
    if (rep.ks != first.ks || rep.task != first.task) {
      throw MismatchedConfigError("report '" + name + "' has different ks or task");
    }
    cmp.names.push_back(name);
    cmp.ratios.push_back(rep.hit_ratio);
  }
  for (std::size_t r = 1; r < reports.size(); ++r) {
    std::vector<double> imp(cmp.ks.size());
    for (std::size_t ki = 0; ki < cmp.ks.size(); ++ki) {
      const double a = cmp.ratios[0][ki];
      const double b = cmp.ratios[r][ki];
      imp[ki] = b == 0.0 ? std::numeric_limits<double>::quiet_NaN() : (a - b) / b;
    }
    cmp.improvement.push_back(std::move(imp));
  }
  return cmp;
}

std::string format_comparison(const Comparison& cmp) {
  std::string out;
  char buf[160];
  out += "k";
  for (const auto& name : cmp.names) out += "\t" + name;
  for (std::size_t r = 1; r < cmp.names.size(); ++r) out += "\timprovement_vs_" + cmp.names[r];
  out += "\n";
  for (std::size_t ki = 0; ki < cmp.ks.size(); ++ki) {
    std::snprintf(buf, sizeof buf, "%d", cmp.ks[ki]);
    out += buf;
    for (const auto& ratios : cmp.ratios) {
      std::snprintf(buf, sizeof buf, "\t%.6f", ratios[ki]);
      out += buf;
    }
    for (const auto& imp : cmp.improvement) {
      if (std::isnan(imp[ki])) {
        out += "\tn/a";
      } else {
        std::snprintf(buf, sizeof buf, "\t%+.2f%%", 100.0 * imp[ki]);
        out += buf;
      }
    }
    out += "\n";
  }
  return out;
}

std::vector<std::vector<int>> case_study(const Model& model, int user,
                                         std::span<const CaseQuery> queries,
                                         std::span<const int> watch) {
  for (const int poi : watch) {
    if (poi < 0 || poi >= model.params.n_pois()) {
      throw VocabMismatchError("watched POI index " + std::to_string(poi) + " out of range");
    }
  }
  std::vector<std::vector<int>> out;
  out.reserve(queries.size());
  for (const CaseQuery& q : queries) {
    const QueryContext ctx =
        make_query_context(model, user, q.prev_time, q.prev_poi, q.next_time);
    std::vector<int> ranks;
    ranks.reserve(watch.size());
    for (const int poi : watch) {
      ranks.push_back(rank_of(model, ctx, poi, model.hyper.rank_mode));
    }
    out.push_back(std::move(ranks));
  }
  return out;
}

const char* to_string(TransitionTask task) {
  switch (task) {
    case TransitionTask::next:
      return "next";
    case TransitionTask::timespec:
      return "timespec";
    case TransitionTask::timespec_min_gap:
      return "timespec_min_gap";
  }
  return "unknown";
}

}  // namespace transtarec
