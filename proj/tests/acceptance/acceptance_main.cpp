// Acceptance suite: one line per criterion, PASS/FAIL/SKIP, non-zero exit if
// any required criterion fails. Criterion 8 (public check-in dataset) is a
// soft direction-only check and runs only when the dataset is found locally.
//
// Usage: acceptance [--cli PATH] [--workdir DIR] [--foursquare TSV]
#include "../grad_check.hpp"
#include "../oracles.hpp"

#include "transtarec/archive.hpp"
#include "transtarec/corpus.hpp"
#include "transtarec/evaluation.hpp"
#include "transtarec/geometry.hpp"
#include "transtarec/model.hpp"
#include "transtarec/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace transtarec;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string cli;
  fs::path workdir = "acceptance_work";
  std::string foursquare;
};

struct Outcome {
  bool pass = false;
  bool skipped = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

char fmtbuf[512];
template <typename... Args>
std::string fmt(const char* f, Args... args) {
  std::snprintf(fmtbuf, sizeof fmtbuf, f, args...);
  return fmtbuf;
}

// ---- criterion 1: gradient correctness ----
Outcome criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0xC1);
  Scalar worst = 0;
  int done = 0;
  int attempts = 0;
  while (done < 20 && attempts < 400) {
    ++attempts;
    Model m = oracle::random_model(rng, 4, 12, 8);
    m.hyper.margin = 1.0;
    m.hyper.soft_c = 1.0;
    m.hyper.epsilon = 0.001;
    std::vector<TrainingExample> batch;
    for (int i = 0; i < 4; ++i) batch.push_back(grad_check::make_example(rng, 4, 12, 2));
    bool kinky = false;
    for (const auto& ex : batch) kinky = kinky || grad_check::near_kink(m, ex);
    if (kinky) continue;
    ModelParams grads = grad_check::extract_gradients(m, batch);
    worst = std::max(worst, grad_check::max_fd_error(m, batch, grads));
    ++done;
  }
  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = done == 20 && worst < 1e-4 && secs < 30.0;
  out.detail = fmt("%d instances, max rel err %.2e, %.1fs", done, worst, secs);
  return out;
}

// ---- criterion 2: geometry suite ----
Outcome criterion_geometry() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0xC2);
  Scalar worst_idem = 0, worst_orth = 0, worst_unit = 0, worst_golden = 0, worst_inv = 0;

  for (int trial = 0; trial < 1000; ++trial) {
    // projection idempotence + orthogonality
    const int d = 2 + rng.below_int(31);
    Vec v(d), w(d);
    oracle::fill_uniform(rng, v, -2, 2);
    oracle::fill_uniform(rng, w, -1, 1);
    if (w.norm() < 1e-6) {
      w.setZero();
      w(0) = 1;
    }
    w /= w.norm();
    const Vec once = project_to_hyperplane(v, w);
    worst_idem = std::max(worst_idem, (project_to_hyperplane(once, w) - once).norm());
    worst_orth = std::max(worst_orth, std::abs(w.dot(once)) / std::max<Scalar>(v.norm(), 1e-12));

    // unit normals from the fused h layer
    const Model m = oracle::random_model(rng, 3, 6, 2 + rng.below_int(10));
    const Vec n = fuse_normal(m, oracle::random_time(rng), rng.below_int(3),
                              oracle::random_time(rng));
    worst_unit = std::max(worst_unit, std::abs(n.norm() - 1));

    // golden triplet scores zero
    {
      const int gd = 2 + rng.below_int(10);
      Model g;
      g.hyper.dim = gd;
      g.params.user_emb = Mat::Zero(1, gd);
      g.params.poi_emb = Mat::Zero(2, gd);
      g.params.month_emb = Mat::Zero(kMonths, gd);
      g.params.weekday_emb = Mat::Zero(kWeekdays, gd);
      g.params.hour_emb = Mat::Zero(kHours, gd);
      g.params.g_weight = Mat::Zero(gd, 3 * gd);
      g.params.h_weight = Mat::Zero(gd, 3 * gd);
      g.params.g_bias = Vec::Zero(gd);
      g.params.h_bias = Vec::Zero(gd);
      oracle::fill_uniform(rng, g.params.h_bias, 0.2, 1.0);
      const Vec wn = g.params.h_bias / g.params.h_bias.norm();
      Vec b(gd);
      oracle::fill_uniform(rng, b, -1, 1);
      g.params.g_bias = b - wn.dot(b) * wn;
      Vec pi(gd);
      oracle::fill_uniform(rng, pi, -1, 1);
      g.params.poi_emb.row(0) = pi.transpose();
      g.params.poi_emb.row(1) = (project_unchecked(pi, wn) + g.params.g_bias).transpose();
      Triplet t;
      t.user = 0;
      t.prev_poi = 0;
      t.prev_time = oracle::random_time(rng);
      t.next_poi = 1;
      t.next_time = oracle::random_time(rng);
      worst_golden = std::max(worst_golden, score_triplet(g, t));
    }

    // score invariance to normal-direction shifts of either POI embedding
    {
      Model s = oracle::random_model(rng, 2, 4, 6);
      Triplet t = oracle::random_triplet(rng, 2, 4);
      const Scalar base = score_triplet(s, t);
      const Vec wn = fuse_normal(s, t.prev_time, t.user, t.next_time);
      const Scalar alpha = rng.uniform(-2, 2);
      Model shifted = s;
      shifted.params.poi_emb.row(t.prev_poi) += alpha * wn.transpose();
      worst_inv = std::max(worst_inv,
                           std::abs(score_triplet(shifted, t) - base) / (1 + std::abs(base)));
      shifted = s;
      shifted.params.poi_emb.row(t.next_poi) += alpha * wn.transpose();
      worst_inv = std::max(worst_inv,
                           std::abs(score_triplet(shifted, t) - base) / (1 + std::abs(base)));
    }
  }

  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = worst_idem <= 1e-10 && worst_orth <= 1e-6 && worst_unit <= 1e-9 &&
             worst_golden <= 1e-12 && worst_inv <= 1e-9 && secs < 10.0;
  out.detail = fmt("idem %.1e orth %.1e unit %.1e golden %.1e inv %.1e, %.1fs", worst_idem,
                   worst_orth, worst_unit, worst_golden, worst_inv, secs);
  return out;
}

// ---- criterion 3: evaluate() equals brute-force re-ranking ----
Outcome criterion_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(0xC3);
  long long decisions = 0;
  long long mismatches = 0;

  for (int trial = 0; trial < 10; ++trial) {
    const int n_pois = 8 + rng.below_int(13);  // 8..20
    const int n_users = 4 + rng.below_int(4);
    const Corpus corpus =
        generate_synthetic(n_users, n_pois, SyntheticPattern::time_blind,
                           900 + static_cast<std::uint64_t>(trial), 25);
    const Split split = chronological_split(corpus, 0.8);

    Model m;
    if (trial < 8) {
      m = oracle::random_model(rng, split.corpus.users.size(), split.corpus.pois.size(), 6);
    } else {
      HyperParams hyper;
      hyper.dim = 8;
      TrainConfig config;
      config.epochs = 5;
      config.seed = 7 + static_cast<std::uint64_t>(trial);
      m = train(split, hyper, config).model;
    }

    for (const RankMode mode : {RankMode::inner, RankMode::neg_l2}) {
      EvalConfig cfg;
      cfg.ks = {1, 3, 5, std::min(10, n_pois)};
      cfg.rank_mode = mode;
      cfg.collect_ranks = true;
      const EvalReport report = evaluate(m, split, cfg);

      std::size_t idx = 0;
      for (int u = 0; u < split.corpus.users.size(); ++u) {
        const auto& seq = split.corpus.sequences[static_cast<std::size_t>(u)];
        for (const auto& [i, j] : make_transitions(seq, cfg.task, cfg.gap_hours)) {
          if (static_cast<std::size_t>(j) < split.boundary[static_cast<std::size_t>(u)]) {
            continue;
          }
          const int oracle_rank = oracle::rank_by_sort(m, u, seq[i].time, seq[i].poi,
                                                       seq[j].time, seq[j].poi, mode);
          for (const int k : cfg.ks) {
            ++decisions;
            if ((report.ranks[idx] <= k) != (oracle_rank <= k)) ++mismatches;
          }
          ++idx;
        }
      }
      if (idx != report.ranks.size()) ++mismatches;  // transition sets must agree
    }
  }

  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = mismatches == 0 && decisions > 0 && secs < 30.0;
  out.detail = fmt("%lld hit decisions, %lld mismatches, %.1fs", decisions, mismatches, secs);
  return out;
}

// ---- criterion 4: time-blind reduction equals the plain translation oracle ----
Outcome criterion_baseline_reduction() {
  Rng rng(0xC4);
  Scalar worst = 0;
  for (int trial = 0; trial < 100; ++trial) {
    Model m;
    if (trial % 2 == 0) {
      m = oracle::random_model(rng, 4, 8, 6, /*baseline=*/true);
    } else {
      // warm-start init with zero fusion noise
      HyperParams hyper;
      hyper.dim = 6;
      hyper.baseline_mode = true;
      TrainConfig config;
      config.seed = rng.next();
      config.init_scale = 0.0;
      m.hyper = hyper;
      m.params = init_params(4, 8, hyper, config);
    }
    for (int q = 0; q < 20; ++q) {
      const Triplet t = oracle::random_triplet(rng, 4, 8);
      Vec a(m.params.dim());
      for (int i = 0; i < m.params.dim(); ++i) {
        a(i) = m.params.poi_emb(t.prev_poi, i) + m.params.user_emb(t.user, i) -
               m.params.poi_emb(t.next_poi, i);
      }
      worst = std::max(worst, std::abs(score_triplet(m, t) - oracle::sq_norm(a)));
    }
  }
  Outcome out;
  out.pass = worst <= 1e-12;
  out.detail = fmt("max |score - oracle| = %.2e over 2000 triplets", worst);
  return out;
}

// ---- criterion 5: synthetic temporal separation ----
Outcome criterion_temporal_separation() {
  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = generate_synthetic(50, 20, SyntheticPattern::time_dependent, 101, 100);
  const Split split = chronological_split(corpus, 0.8);

  HyperParams hyper;
  hyper.dim = 16;
  TrainConfig config;  // defaults: lr 0.01, 50 epochs, neg 1, batch 64, seed 42

  const TrainResult full = train(split, hyper, config);

  HyperParams base_hyper = hyper;
  base_hyper.baseline_mode = true;
  const TrainResult baseline = train(split, base_hyper, config);

  EvalConfig cfg;
  cfg.ks = {1};
  const double top1_full = evaluate(full.model, split, cfg).hit_ratio[0];
  const double top1_base = evaluate(baseline.model, split, cfg).hit_ratio[0];

  const double secs = seconds_since(t0);
  Outcome out;
  out.pass = top1_full >= 0.85 && top1_base <= 0.65 && secs < 120.0;
  out.detail = fmt("time-adaptive Top@1 %.3f (>= 0.85), time-blind Top@1 %.3f (<= 0.65), %.0fs",
                   top1_full, top1_base, secs);
  return out;
}

// ---- criterion 6: untrained model sits in the binomial band ----
Outcome criterion_untrained_band() {
  const int n_pois = 20;
  const Corpus corpus = generate_synthetic(50, n_pois, SyntheticPattern::time_blind, 202, 100);
  const Split split = chronological_split(corpus, 0.8);

  HyperParams hyper;
  hyper.dim = 16;
  TrainConfig config;
  config.seed = 7;
  Model m;
  m.hyper = hyper;
  m.params = init_params(split.corpus.users.size(), split.corpus.pois.size(), hyper, config);

  EvalConfig cfg;
  cfg.ks = {1, 5, 10};
  const EvalReport report = evaluate(m, split, cfg);

  Outcome out;
  out.pass = report.n_samples >= 500;
  std::string detail = fmt("n=%lld", static_cast<long long>(report.n_samples));
  for (std::size_t ki = 0; ki < cfg.ks.size(); ++ki) {
    const double p = static_cast<double>(cfg.ks[ki]) / n_pois;
    const double sigma = std::sqrt(p * (1 - p) / static_cast<double>(report.n_samples));
    const double dev = std::abs(report.hit_ratio[ki] - p);
    detail += fmt("  top@%d %.3f (uniform %.3f, dev %.1f sigma)", cfg.ks[ki],
                  report.hit_ratio[ki], p, dev / sigma);
    if (dev > 3 * sigma) out.pass = false;
  }
  out.detail = detail;
  return out;
}

// ---- criterion 7: end-to-end determinism ----
Outcome criterion_determinism(const Options& opts) {
  Outcome out;
  if (opts.cli.empty()) {
    out.detail = "no --cli path given";
    return out;
  }
  fs::create_directories(opts.workdir);
  const auto run = [&](const std::string& args) {
    const std::string cmd = opts.cli + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  const fs::path data = opts.workdir / "det_data.tsv";
  const fs::path data2 = opts.workdir / "det_data2.tsv";
  const fs::path m1 = opts.workdir / "det_m1.ttr";
  const fs::path m2 = opts.workdir / "det_m2.ttr";
  const fs::path m3 = opts.workdir / "det_m3.ttr";

  const std::string gen_flags = "gen-synthetic --users 8 --pois 10 --pattern time_dependent"
                                " --seed 5 --records 40 --out ";
  if (run(gen_flags + data.string()) != 0 || run(gen_flags + data2.string()) != 0) {
    out.detail = "gen-synthetic failed";
    return out;
  }
  if (slurp(data) != slurp(data2) || slurp(data).empty()) {
    out.detail = "gen-synthetic not byte-deterministic";
    return out;
  }

  const std::string train_flags =
      " --dim 8 --epochs 5 --seed 42 --data " + data.string() + " --out ";
  if (run("train" + train_flags + m1.string()) != 0 ||
      run("train" + train_flags + m2.string()) != 0) {
    out.detail = "train failed";
    return out;
  }
  if (slurp(m1).empty() || slurp(m1) != slurp(m2)) {
    out.detail = "model archives differ between identical runs";
    return out;
  }

  // persistence round-trip byte stability
  save_archive(load_archive(m1), m3);
  if (slurp(m1) != slurp(m3)) {
    out.detail = "save(load(x)) changed bytes";
    return out;
  }

  // the archive loads and carries the right shapes
  const ModelArchive a = load_archive(m1);
  if (a.hyper.dim != 8 || a.params.n_pois() != 10 || a.params.n_users() != 8) {
    out.detail = "unexpected archive shapes";
    return out;
  }
  out.pass = true;
  out.detail = "identical bytes across reruns; save-load-save stable";
  return out;
}

// ---- criterion 8 (optional): public dataset direction check ----
Outcome criterion_public_dataset(const Options& opts) {
  Outcome out;
  std::string path = opts.foursquare;
  if (path.empty()) {
    if (const char* env = std::getenv("TRANSTAREC_FOURSQUARE")) path = env;
  }
  if (path.empty()) {
    for (const char* cand :
         {"dataset_TSMC2014_NYC.txt", "data/dataset_TSMC2014_NYC.txt"}) {
      if (fs::exists(cand)) {
        path = cand;
        break;
      }
    }
  }
  if (path.empty() || !fs::exists(path)) {
    out.skipped = true;
    out.detail = "dataset not present locally";
    return out;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const Corpus corpus = parse_dataset(path, DataFormat::foursquare_tsv);
  const Split split = chronological_split(corpus, 0.8);

  HyperParams hyper;  // d=100, margin 1, C 1, epsilon 0.001
  TrainConfig config;
  const TrainResult full = train(split, hyper, config, [](const EpochStats& s) {
    std::fprintf(stderr, "  [public] epoch %d total %.4f (%.1fs)\n", s.epoch + 1,
                 s.mean_total, s.seconds);
  });
  HyperParams base_hyper = hyper;
  base_hyper.baseline_mode = true;
  const TrainResult baseline = train(split, base_hyper, config);

  EvalConfig cfg;
  cfg.ks = {10};
  cfg.n_threads = std::max(1u, std::thread::hardware_concurrency());
  const double ours = evaluate(full.model, split, cfg).hit_ratio[0];
  const double base = evaluate(baseline.model, split, cfg).hit_ratio[0];

  out.pass = ours > base;
  out.detail = fmt("time-adaptive Top@10 %.4f vs time-blind %.4f, %.0fs", ours, base,
                   seconds_since(t0));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  Options opts;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--cli" && i + 1 < argc) {
      opts.cli = argv[++i];
    } else if (arg == "--workdir" && i + 1 < argc) {
      opts.workdir = argv[++i];
    } else if (arg == "--foursquare" && i + 1 < argc) {
      opts.foursquare = argv[++i];
    } else {
      std::fprintf(stderr, "unknown argument: %s\n", arg.c_str());
      return 2;
    }
  }

  struct Entry {
    int id;
    const char* name;
    std::function<Outcome()> fn;
    bool optional;
  };
  const std::vector<Entry> entries{
      {1, "gradient correctness vs finite differences", criterion_gradients, false},
      {2, "hyperplane geometry suite", criterion_geometry, false},
      {3, "evaluate() equals brute-force re-ranking", criterion_oracle_equivalence, false},
      {4, "time-blind reduction equals plain-translation oracle", criterion_baseline_reduction,
       false},
      {5, "synthetic temporal separation", criterion_temporal_separation, false},
      {6, "untrained model inside the binomial band", criterion_untrained_band, false},
      {7, "end-to-end determinism", [&opts] { return criterion_determinism(opts); }, false},
      {8, "public dataset direction check (optional)",
       [&opts] { return criterion_public_dataset(opts); }, true},
  };

  int failures = 0;
  for (const Entry& e : entries) {
    Outcome out;
    try {
      out = e.fn();
    } catch (const std::exception& ex) {
      out.pass = false;
      out.detail = std::string("exception: ") + ex.what();
    }
    const char* tag = out.skipped ? "SKIP" : out.pass ? "PASS" : "FAIL";
    std::printf("%s  criterion %d: %s — %s\n", tag, e.id, e.name, out.detail.c_str());
    std::fflush(stdout);
    if (!out.pass && !out.skipped && !e.optional) ++failures;
  }
  if (failures > 0) {
    std::printf("%d required criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all required criteria passed\n");
  return 0;
}
