// Command-line front end: train / eval / recommend / gen-synthetic / inspect.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
#include "transtarec/archive.hpp"
#include "transtarec/calendar.hpp"
#include "transtarec/corpus.hpp"
#include "transtarec/evaluation.hpp"
#include "transtarec/model.hpp"
#include "transtarec/training.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

using namespace transtarec;

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::map<std::string, DataFormat> kFormatNames{
    {"generic", DataFormat::generic_tsv},
    {"generic_tsv", DataFormat::generic_tsv},
    {"foursquare", DataFormat::foursquare_tsv},
    {"foursquare_tsv", DataFormat::foursquare_tsv},
};
const std::map<std::string, RankMode> kRankModeNames{
    {"inner", RankMode::inner},
    {"neg-l2", RankMode::neg_l2},
    {"neg_l2", RankMode::neg_l2},
};
const std::map<std::string, SyntheticPattern> kPatternNames{
    {"time_dependent", SyntheticPattern::time_dependent},
    {"time_blind", SyntheticPattern::time_blind},
};
const std::map<std::string, TransitionTask> kTaskNames{
    {"next", TransitionTask::next},
    {"timespec", TransitionTask::timespec},
    {"timespec-gap", TransitionTask::timespec_min_gap},
};

struct TrainArgs {
  std::string data;
  std::string out;
  DataFormat format = DataFormat::generic_tsv;
  int dim = 100;
  double margin = 1.0;
  double soft_c = 1.0;
  double epsilon = 0.001;
  double lr = 0.01;
  int epochs = 50;
  int neg = 1;
  int batch = 64;
  std::uint64_t seed = 42;
  bool baseline = false;
  bool no_clamp = false;
  double init_scale = 0.01;
  RankMode rank_mode = RankMode::inner;
  double train_fraction = 0.8;
};

struct EvalArgs {
  std::vector<std::string> models;
  std::string data;
  DataFormat format = DataFormat::generic_tsv;
  TransitionTask task = TransitionTask::next;
  double gap_hours = 5.0;
  std::vector<int> ks = {1, 5, 10, 20, 50};
  std::optional<RankMode> rank_mode;
  bool skip_unknown = false;
  std::string report_path;
  double train_fraction = 0.8;
  int threads = 1;
  bool per_user = false;
};

struct RecommendArgs {
  std::string model;
  std::string user;
  std::string prev_poi;
  std::string prev_time;
  std::string next_time;
  int top = 10;
  std::vector<std::string> watch;
};

struct GenArgs {
  int users = 0;
  int pois = 0;
  SyntheticPattern pattern = SyntheticPattern::time_dependent;
  std::uint64_t seed = 42;
  std::string out;
  int records = 100;
};

struct InspectArgs {
  std::string model;
};

Corpus load_corpus(const std::string& path, DataFormat format) {
  ParseStats stats;
  Corpus corpus = parse_dataset(path, format, &stats);
  if (stats.malformed > 0) {
    std::fprintf(stderr, "note: skipped %zu malformed of %zu lines\n", stats.malformed,
                 stats.lines);
  }
  return corpus;
}

TimeKey parse_time_flag(const std::string& text, const char* flag) {
  const auto parsed = parse_iso8601(text);
  if (!parsed) {
    throw UsageError(std::string(flag) + " expects an ISO-8601 timestamp, got '" + text + "'");
  }
  return decompose_time(parsed->utc_seconds, parsed->tz_offset_minutes);
}

IndexMaps build_maps(const ModelArchive& archive, const Corpus& corpus) {
  const Vocabulary users = archive_users(archive);
  const Vocabulary pois = archive_pois(archive);
  IndexMaps maps;
  maps.users.resize(static_cast<std::size_t>(corpus.users.size()));
  for (int u = 0; u < corpus.users.size(); ++u) {
    maps.users[static_cast<std::size_t>(u)] = users.find(corpus.users.id(u)).value_or(-1);
  }
  maps.pois.resize(static_cast<std::size_t>(corpus.pois.size()));
  for (int p = 0; p < corpus.pois.size(); ++p) {
    maps.pois[static_cast<std::size_t>(p)] = pois.find(corpus.pois.id(p)).value_or(-1);
  }
  return maps;
}

int run_train(const TrainArgs& args) {
  if (!(args.train_fraction > 0.0 && args.train_fraction < 1.0)) {
    throw UsageError("--train-fraction must lie in (0, 1)");
  }
  const Corpus corpus = load_corpus(args.data, args.format);
  const Split split = chronological_split(corpus, args.train_fraction);
  if (split.dropped_users > 0) {
    std::fprintf(stderr, "note: dropped %zu users with fewer than 2 records\n",
                 split.dropped_users);
  }

  HyperParams hyper;
  hyper.dim = args.dim;
  hyper.margin = args.margin;
  hyper.soft_c = args.soft_c;
  hyper.epsilon = args.epsilon;
  hyper.rank_mode = args.rank_mode;
  hyper.baseline_mode = args.baseline;

  TrainConfig config;
  config.learning_rate = args.lr;
  config.epochs = args.epochs;
  config.neg_samples = args.neg;
  config.batch_size = args.batch;
  config.seed = args.seed;
  config.clamp_entities = !args.no_clamp;
  config.init_scale = args.init_scale;

  std::fprintf(stderr, "training on %d users, %d POIs, %zu records\n",
               split.corpus.users.size(), split.corpus.pois.size(),
               split.corpus.n_records());
  const TrainResult result =
      train(split, hyper, config, [&config](const EpochStats& s) {
        std::fprintf(stderr, "epoch %d/%d  hinge %.6f  soft %.6g  total %.6f  (%.2fs)\n",
                     s.epoch + 1, config.epochs, s.mean_hinge, s.mean_soft, s.mean_total,
                     s.seconds);
      });

  ModelArchive archive;
  archive.hyper = result.model.hyper;
  archive.user_ids = split.corpus.users.ids();
  archive.poi_ids = split.corpus.pois.ids();
  archive.params = result.model.params;
  archive.meta.seed = config.seed;
  archive.meta.epochs_run = config.epochs;
  archive.meta.final_loss = result.history.empty() ? 0.0 : result.history.back().mean_total;
  save_archive(archive, args.out);
  std::fprintf(stderr, "saved model to %s\n", args.out.c_str());
  return 0;
}

void write_json_report(const std::string& path,
                       const std::vector<std::pair<std::string, EvalReport>>& reports) {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& [name, rep] : reports) {
    for (std::size_t ki = 0; ki < rep.ks.size(); ++ki) {
      nlohmann::json rec;
      rec["name"] = name;
      rec["task"] = to_string(rep.task);
      if (rep.task == TransitionTask::timespec_min_gap) rec["gap_hours"] = rep.gap_hours;
      rec["rank_mode"] = to_string(rep.rank_mode);
      rec["k"] = rep.ks[ki];
      rec["ratio"] = rep.hit_ratio[ki];
      rec["n_samples"] = rep.n_samples;
      records.push_back(std::move(rec));
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out.is_open()) throw IoError("cannot write " + path);
  out << records.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

int run_eval(const EvalArgs& args) {
  if (args.models.empty() || args.models.size() > 2) {
    throw UsageError("--model must be given once or twice");
  }
  for (std::size_t i = 1; i < args.ks.size(); ++i) {
    if (args.ks[i] <= args.ks[i - 1]) {
      throw UsageError("--k values must be strictly increasing");
    }
  }
  if (!args.ks.empty() && args.ks.front() < 1) throw UsageError("--k values must be >= 1");
  if (!(args.train_fraction > 0.0 && args.train_fraction < 1.0)) {
    throw UsageError("--train-fraction must lie in (0, 1)");
  }

  const Corpus corpus = load_corpus(args.data, args.format);
  const Split split = chronological_split(corpus, args.train_fraction);

  std::vector<std::pair<std::string, EvalReport>> reports;
  for (const std::string& model_path : args.models) {
    const ModelArchive archive = load_archive(model_path);
    const IndexMaps maps = build_maps(archive, split.corpus);

    EvalConfig cfg;
    cfg.ks = args.ks;
    cfg.task = args.task;
    cfg.gap_hours = args.gap_hours;
    cfg.rank_mode = args.rank_mode.value_or(archive.hyper.rank_mode);
    cfg.skip_unknown = args.skip_unknown;
    cfg.n_threads = args.threads;
    cfg.per_user = args.per_user;

    const Model model{archive.hyper, archive.params};
    EvalReport report = evaluate(model, split, cfg, &maps);
    std::cout << format_report(report, model_path);
    if (args.per_user) {
      for (const auto& [uid, stats] : report.per_user) {
        std::cout << "user " << uid << " n=" << stats.n_samples;
        for (std::size_t ki = 0; ki < report.ks.size(); ++ki) {
          std::printf(" top@%d=%.4f", report.ks[ki],
                      static_cast<double>(stats.hits[ki]) /
                          static_cast<double>(stats.n_samples));
        }
        std::cout << "\n";
      }
    }
    std::cout << "\n";
    reports.emplace_back(model_path, std::move(report));
  }

  if (reports.size() == 2) {
    std::cout << format_comparison(compare(reports));
  }
  if (!args.report_path.empty()) {
    write_json_report(args.report_path, reports);
    std::fprintf(stderr, "wrote report to %s\n", args.report_path.c_str());
  }
  return 0;
}

int run_recommend(const RecommendArgs& args) {
  if (args.top < 1) throw UsageError("--top must be >= 1");
  const ModelArchive archive = load_archive(args.model);
  const Vocabulary users = archive_users(archive);
  const Vocabulary pois = archive_pois(archive);

  const auto user = users.find(args.user);
  if (!user) throw VocabMismatchError("unknown user id: " + args.user);
  const auto prev_poi = pois.find(args.prev_poi);
  if (!prev_poi) throw VocabMismatchError("unknown POI id: " + args.prev_poi);

  const TimeKey t_i = parse_time_flag(args.prev_time, "--prev-time");
  const TimeKey t_j = parse_time_flag(args.next_time, "--next-time");

  const Model model{archive.hyper, archive.params};
  std::vector<int> candidates(static_cast<std::size_t>(model.params.n_pois()));
  for (int p = 0; p < model.params.n_pois(); ++p) candidates[static_cast<std::size_t>(p)] = p;
  const auto ranked = rank_candidates(model, *user, t_i, *prev_poi, t_j, candidates);

  const int top = std::min<int>(args.top, static_cast<int>(ranked.size()));
  for (int r = 0; r < top; ++r) {
    std::printf("%d\t%s\t%.17g\n", r + 1, pois.id(ranked[static_cast<std::size_t>(r)].first).c_str(),
                ranked[static_cast<std::size_t>(r)].second);
  }

  if (!args.watch.empty()) {
    std::vector<int> watch_idx;
    for (const auto& id : args.watch) {
      const auto idx = pois.find(id);
      if (!idx) throw VocabMismatchError("unknown POI id: " + id);
      watch_idx.push_back(*idx);
    }
    const CaseQuery query{t_i, *prev_poi, t_j};
    const auto ranks = case_study(model, *user, std::span(&query, 1), watch_idx);
    for (std::size_t i = 0; i < watch_idx.size(); ++i) {
      std::printf("watch\t%s\t%d\n", args.watch[i].c_str(), ranks[0][i]);
    }
  }
  return 0;
}

int run_gen(const GenArgs& args) {
  const Corpus corpus =
      generate_synthetic(args.users, args.pois, args.pattern, args.seed, args.records);
  write_generic_tsv(corpus, args.out);
  std::fprintf(stderr, "wrote %zu records for %d users to %s\n", corpus.n_records(),
               corpus.users.size(), args.out.c_str());
  return 0;
}

int run_inspect(const InspectArgs& args) {
  const ModelArchive a = load_archive(args.model);
  std::printf("format_version %d\n", a.format_version);
  std::printf("dim %d\n", a.hyper.dim);
  std::printf("margin %g\n", a.hyper.margin);
  std::printf("soft_c %g\n", a.hyper.soft_c);
  std::printf("epsilon %g\n", a.hyper.epsilon);
  std::printf("rank_mode %s\n", to_string(a.hyper.rank_mode));
  std::printf("baseline %d\n", a.hyper.baseline_mode ? 1 : 0);
  std::printf("seed %llu\n", static_cast<unsigned long long>(a.meta.seed));
  std::printf("epochs_run %d\n", a.meta.epochs_run);
  std::printf("final_loss %.17g\n", a.meta.final_loss);
  std::printf("users %zu\n", a.user_ids.size());
  std::printf("pois %zu\n", a.poi_ids.size());

  const auto shape = [](const char* name, const Mat& m) {
    std::printf("tensor %s %td %td\n", name, m.rows(), m.cols());
  };
  shape("user_emb", a.params.user_emb);
  shape("poi_emb", a.params.poi_emb);
  shape("month_emb", a.params.month_emb);
  shape("weekday_emb", a.params.weekday_emb);
  shape("hour_emb", a.params.hour_emb);
  shape("g_weight", a.params.g_weight);
  std::printf("tensor g_bias 1 %td\n", a.params.g_bias.size());
  shape("h_weight", a.params.h_weight);
  std::printf("tensor h_bias 1 %td\n", a.params.h_bias.size());

  const auto norm_stats = [](const char* name, const Mat& m) {
    double min = std::numeric_limits<double>::infinity(), max = 0, sum = 0;
    for (int i = 0; i < m.rows(); ++i) {
      const double n = m.row(i).norm();
      min = std::min(min, n);
      max = std::max(max, n);
      sum += n;
    }
    std::printf("%s_norms min %.6g mean %.6g max %.6g\n", name, min,
                sum / static_cast<double>(m.rows()), max);
  };
  norm_stats("user", a.params.user_emb);
  norm_stats("poi", a.params.poi_emb);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-adaptive translation embeddings for next-POI recommendation"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a model on a check-in dataset");
  train_cmd->add_option("--data", train_args.data, "input dataset path")->required();
  train_cmd->add_option("--format", train_args.format, "input format")
      ->transform(CLI::CheckedTransformer(kFormatNames))
      ->default_str("generic");
  train_cmd->add_option("--out", train_args.out, "output model path")->required();
  train_cmd->add_option("--dim", train_args.dim, "embedding dimension d")
      ->default_val(100)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--margin", train_args.margin, "ranking margin")
      ->default_val(1.0)
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--soft-c", train_args.soft_c, "soft-constraint weight C")
      ->default_val(1.0)
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--epsilon", train_args.epsilon, "orthogonality slack")
      ->default_val(0.001)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train_args.lr, "SGD learning rate (conventional default)")
      ->default_val(0.01)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_args.epochs, "training epochs (conventional default)")
      ->default_val(50)
      ->check(CLI::PositiveNumber);
  train_cmd
      ->add_option("--neg", train_args.neg, "negatives per positive (conventional default)")
      ->default_val(1)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train_args.batch, "batch size (conventional default)")
      ->default_val(64)
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--seed", train_args.seed, "RNG seed")->default_val(42);
  train_cmd->add_flag("--baseline", train_args.baseline,
                      "train the time-blind translation ablation");
  train_cmd->add_flag("--no-clamp", train_args.no_clamp,
                      "disable unit-ball clamping of entity rows");
  train_cmd->add_option("--init-scale", train_args.init_scale, "fusion init noise")
      ->default_val(0.01)
      ->check(CLI::NonNegativeNumber);
  train_cmd->add_option("--rank-mode", train_args.rank_mode, "default serving rank mode")
      ->transform(CLI::CheckedTransformer(kRankModeNames))
      ->default_str("inner");
  train_cmd->add_option("--train-fraction", train_args.train_fraction,
                        "chronological train prefix fraction")
      ->default_val(0.8);

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate Top@k on a chronological test split");
  eval_cmd->add_option("--model", eval_args.models, "model path (repeat to compare two)")
      ->required();
  eval_cmd->add_option("--data", eval_args.data, "input dataset path")->required();
  eval_cmd->add_option("--format", eval_args.format, "input format")
      ->transform(CLI::CheckedTransformer(kFormatNames))
      ->default_str("generic");
  eval_cmd->add_option("--task", eval_args.task, "transition task")
      ->transform(CLI::CheckedTransformer(kTaskNames))
      ->default_str("next");
  eval_cmd->add_option("--gap-hours", eval_args.gap_hours, "minimum gap for timespec-gap")
      ->default_val(5.0)
      ->check(CLI::NonNegativeNumber);
  eval_cmd->add_option("--k", eval_args.ks, "cutoffs, comma separated")
      ->delimiter(',')
      ->default_str("1,5,10,20,50");
  eval_cmd->add_option("--rank-mode", eval_args.rank_mode, "override the model's rank mode")
      ->transform(CLI::CheckedTransformer(kRankModeNames));
  eval_cmd->add_flag("--skip-unknown", eval_args.skip_unknown,
                     "skip (and count) transitions with ids unknown to the model");
  eval_cmd->add_option("--report", eval_args.report_path, "write JSON records here");
  eval_cmd->add_option("--train-fraction", eval_args.train_fraction,
                       "chronological train prefix fraction")
      ->default_val(0.8);
  eval_cmd->add_option("--threads", eval_args.threads, "ranking threads")
      ->default_val(1)
      ->check(CLI::PositiveNumber);
  eval_cmd->add_flag("--per-user", eval_args.per_user, "print per-user breakdown");

  RecommendArgs rec_args;
  auto* rec_cmd = app.add_subcommand("recommend", "Rank POIs for one query");
  rec_cmd->add_option("--model", rec_args.model, "model path")->required();
  rec_cmd->add_option("--user", rec_args.user, "user id")->required();
  rec_cmd->add_option("--prev-poi", rec_args.prev_poi, "previous POI id")->required();
  rec_cmd->add_option("--prev-time", rec_args.prev_time, "previous time, ISO-8601")->required();
  rec_cmd->add_option("--next-time", rec_args.next_time, "next time, ISO-8601")->required();
  rec_cmd->add_option("--top", rec_args.top, "print the top N POIs")->default_val(10);
  rec_cmd->add_option("--watch", rec_args.watch, "POI ids whose ranks to report")
      ->delimiter(',');

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "Generate a synthetic check-in corpus");
  gen_cmd->add_option("--users", gen_args.users, "number of users")
      ->required()
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--pois", gen_args.pois, "number of POIs (>= 4)")
      ->required()
      ->check(CLI::Range(4, std::numeric_limits<int>::max()));
  gen_cmd->add_option("--pattern", gen_args.pattern, "generative pattern")
      ->transform(CLI::CheckedTransformer(kPatternNames))
      ->required();
  gen_cmd->add_option("--seed", gen_args.seed, "RNG seed")->required();
  gen_cmd->add_option("--out", gen_args.out, "output TSV path")->required();
  gen_cmd->add_option("--records", gen_args.records, "records per user")
      ->default_val(100)
      ->check(CLI::Range(2, std::numeric_limits<int>::max()));

  InspectArgs inspect_args;
  auto* inspect_cmd = app.add_subcommand("inspect", "Print model archive header and stats");
  inspect_cmd->add_option("--model", inspect_args.model, "model path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (rec_cmd->parsed()) return run_recommend(rec_args);
    if (gen_cmd->parsed()) return run_gen(gen_args);
    if (inspect_cmd->parsed()) return run_inspect(inspect_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
