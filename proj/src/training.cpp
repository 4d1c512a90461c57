#include "transtarec/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

namespace transtarec {

namespace {

constexpr Scalar kDegenerateNormThreshold = 1e-12;

struct GradAccum {
  std::unordered_map<int, Vec> user, poi, month, weekday, hour;
  Mat g_weight, h_weight;
  Vec g_bias, h_bias;
  bool fusion_touched = false;

  explicit GradAccum(int d)
      : g_weight(Mat::Zero(d, 3 * d)),
        h_weight(Mat::Zero(d, 3 * d)),
        g_bias(Vec::Zero(d)),
        h_bias(Vec::Zero(d)) {}

  static void add(std::unordered_map<int, Vec>& rows, int idx, const Vec& g) {
    auto [it, inserted] = rows.try_emplace(idx, g);
    if (!inserted) it->second += g;
  }

  bool all_finite() const {
    const auto rows_finite = [](const std::unordered_map<int, Vec>& rows) {
      for (const auto& [idx, g] : rows) {
        (void)idx;
        if (!g.allFinite()) return false;
      }
      return true;
    };
    return rows_finite(user) && rows_finite(poi) && rows_finite(month) &&
           rows_finite(weekday) && rows_finite(hour) && g_weight.allFinite() &&
           h_weight.allFinite() && g_bias.allFinite() && h_bias.allFinite();
  }
};

// Scatter a gradient on a composed time embedding back to its three rows.
void add_time_rows(GradAccum& acc, const TimeKey& t, const Vec& g) {
  GradAccum::add(acc.month, t.month - 1, g);
  GradAccum::add(acc.weekday, t.weekday, g);
  GradAccum::add(acc.hour, t.hour, g);
}

// Forward pass for one example, optionally accumulating d(loss)/d(params)
// scaled by `scale` into `acc`.
//
// Residual of a candidate p: a(p) = (e_pi - (w.e_pi) w) + v - (e_p - (w.e_p) w),
// f(p) = |a(p)|^2. For f as a function of (e_A, e_B, v, w) with q = e_A - e_B:
//   df/de_A =  2 (a - (w.a) w)        df/dv = 2 a
//   df/de_B = -2 (a - (w.a) w)        df/dw = -2 [ (a.w) q + (w.q) a ]
// The unit normal w = r/|r| backpropagates as dr = (dw - (w.dw) w)/|r|, and
// both fusion layers are plain affine maps of x = [v_ti; v_u; v_tj].
LossBreakdown run_example(const Model& model, const TrainingExample& ex, Scalar scale,
                          GradAccum* acc) {
  const ModelParams& p = model.params;
  const HyperParams& hyper = model.hyper;
  const Triplet& trip = ex.positive;
  LossBreakdown out;

  if (hyper.baseline_mode) {
    // Time-blind translation: f(p) = |e_pi + v_u - e_p|^2, no hyperplane.
    const Vec vu = p.user_emb.row(trip.user).transpose();
    const Vec e_pi = p.poi_emb.row(trip.prev_poi).transpose();
    const Vec a_pos = e_pi + vu - p.poi_emb.row(trip.next_poi).transpose();
    const Scalar f_pos = a_pos.squaredNorm();
    for (const int neg : ex.negatives) {
      const Vec a_neg = e_pi + vu - p.poi_emb.row(neg).transpose();
      const Scalar f_neg = a_neg.squaredNorm();
      const Scalar arg = f_pos + hyper.margin - f_neg;
      if (arg <= 0) continue;
      out.hinge += arg;
      if (acc) {
        const Vec d_shared = (2 * scale) * (a_pos - a_neg);
        GradAccum::add(acc->poi, trip.prev_poi, d_shared);
        GradAccum::add(acc->user, trip.user, d_shared);
        GradAccum::add(acc->poi, trip.next_poi, (-2 * scale) * a_pos);
        GradAccum::add(acc->poi, neg, (2 * scale) * a_neg);
      }
    }
    out.total = out.hinge;
    return out;
  }

  const int d = p.dim();
  const Vec x = fusion_input(p, trip.prev_time, trip.user, trip.next_time);
  const Vec v = p.g_weight * x + p.g_bias;
  const Vec r = p.h_weight * x + p.h_bias;
  const Scalar r_norm = r.norm();
  if (r_norm <= kDegenerateNormThreshold) {
    throw DegenerateNormalError("h-layer output collapsed (norm " + std::to_string(r_norm) +
                                ")");
  }
  const Vec w = r / r_norm;

  const Vec e_pi = p.poi_emb.row(trip.prev_poi).transpose();
  const Vec e_pj = p.poi_emb.row(trip.next_poi).transpose();
  const Vec src = (e_pi - w.dot(e_pi) * w) + v;
  const Vec a_pos = src - (e_pj - w.dot(e_pj) * w);
  const Scalar f_pos = a_pos.squaredNorm();

  Vec dv = Vec::Zero(d);
  Vec dw = Vec::Zero(d);
  bool any_grad = false;

  for (const int neg : ex.negatives) {
    const Vec e_pn = p.poi_emb.row(neg).transpose();
    const Vec a_neg = src - (e_pn - w.dot(e_pn) * w);
    const Scalar f_neg = a_neg.squaredNorm();
    const Scalar arg = f_pos + hyper.margin - f_neg;
    if (arg <= 0) continue;
    out.hinge += arg;
    if (!acc) continue;
    any_grad = true;

    const Vec pos_perp = a_pos - w.dot(a_pos) * w;
    const Vec neg_perp = a_neg - w.dot(a_neg) * w;
    GradAccum::add(acc->poi, trip.prev_poi, (2 * scale) * (pos_perp - neg_perp));
    GradAccum::add(acc->poi, trip.next_poi, (-2 * scale) * pos_perp);
    GradAccum::add(acc->poi, neg, (2 * scale) * neg_perp);
    dv += 2 * (a_pos - a_neg);

    const Vec q_pos = e_pi - e_pj;
    const Vec q_neg = e_pi - e_pn;
    dw += -2 * (a_pos.dot(w) * q_pos + w.dot(q_pos) * a_pos);
    dw += 2 * (a_neg.dot(w) * q_neg + w.dot(q_neg) * a_neg);
  }

  // Soft in-hyperplane constraint [ (w.v)^2 / |v|^2 - eps^2 ]_+ on the
  // translation; skipped entirely for near-zero translations.
  if (v.norm() > kDegenerateNormThreshold) {
    const Scalar nv = v.squaredNorm();
    const Scalar pd = w.dot(v);
    const Scalar cval = pd * pd / nv - hyper.epsilon * hyper.epsilon;
    if (cval > 0) {
      out.soft_constraint = cval;
      if (acc) {
        any_grad = true;
        const Scalar k = 2 * pd / nv;
        dv += hyper.soft_c * k * (w - (pd / nv) * v);
        dw += hyper.soft_c * k * v;
      }
    }
  }

  out.total = out.hinge + hyper.soft_c * out.soft_constraint;

  if (acc && any_grad) {
    const Vec dr = (dw - w.dot(dw) * w) / r_norm;
    acc->g_weight.noalias() += (scale * dv) * x.transpose();
    acc->g_bias += scale * dv;
    acc->h_weight.noalias() += (scale * dr) * x.transpose();
    acc->h_bias += scale * dr;
    acc->fusion_touched = true;

    const Vec dx = p.g_weight.transpose() * (scale * dv) +
                   p.h_weight.transpose() * (scale * dr);
    add_time_rows(*acc, trip.prev_time, dx.segment(0, d));
    GradAccum::add(acc->user, trip.user, dx.segment(d, d));
    add_time_rows(*acc, trip.next_time, dx.segment(2 * d, d));
  }
  return out;
}

void apply_rows(Mat& table, const std::unordered_map<int, Vec>& grads, Scalar lr) {
  for (const auto& [idx, g] : grads) {
    table.row(idx) -= lr * g.transpose();
  }
}

void clamp_row(Mat& table, int idx) {
  const Scalar norm = table.row(idx).norm();
  if (norm > 1.0) table.row(idx) /= norm;
}

void clamp_all_rows(Mat& table) {
  for (int i = 0; i < table.rows(); ++i) clamp_row(table, i);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0)) throw InvalidArgumentError("learning_rate must be > 0");
  if (epochs < 1) throw InvalidArgumentError("epochs must be >= 1");
  if (neg_samples < 1) throw InvalidArgumentError("neg_samples must be >= 1");
  if (batch_size < 1) throw InvalidArgumentError("batch_size must be >= 1");
  if (!(init_scale >= 0)) throw InvalidArgumentError("init_scale must be >= 0");
}

ModelParams init_params(int n_users, int n_pois, const HyperParams& hyper,
                        const TrainConfig& config) {
  hyper.validate();
  config.validate();
  if (n_users < 1 || n_pois < 1) {
    throw InvalidArgumentError("vocabulary sizes must be >= 1");
  }

  const int d = hyper.dim;
  const Scalar bound = 6.0 / std::sqrt(static_cast<Scalar>(d));
  Rng rng(config.seed);

  const auto fill_uniform = [&rng](Mat& m, Scalar lo, Scalar hi) {
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(lo, hi);
  };

  ModelParams p;
  p.user_emb.resize(n_users, d);
  p.poi_emb.resize(n_pois, d);
  p.month_emb.resize(kMonths, d);
  p.weekday_emb.resize(kWeekdays, d);
  p.hour_emb.resize(kHours, d);
  fill_uniform(p.user_emb, -bound, bound);
  fill_uniform(p.poi_emb, -bound, bound);
  fill_uniform(p.month_emb, -bound, bound);
  fill_uniform(p.weekday_emb, -bound, bound);
  fill_uniform(p.hour_emb, -bound, bound);

  // Warm start at the time-blind reduction: g([v_ti; v_u; v_tj]) == v_u.
  p.g_weight = Mat::Zero(d, 3 * d);
  for (int i = 0; i < d; ++i) p.g_weight(i, d + i) = 1.0;
  if (config.init_scale > 0) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < 3 * d; ++j)
        p.g_weight(i, j) += rng.uniform(-config.init_scale, config.init_scale);
  }
  p.g_bias = Vec::Zero(d);

  p.h_weight = Mat::Zero(d, 3 * d);
  if (config.init_scale > 0) {
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < 3 * d; ++j)
        p.h_weight(i, j) = rng.uniform(-config.init_scale, config.init_scale);
  }
  p.h_bias = Vec::Constant(d, 0.1);  // keeps the normal away from zero at step 0
  return p;
}

NegativeSampler::NegativeSampler(const Split& split, int n_pois)
    : n_pois_(n_pois), seen_(split.corpus.sequences.size()) {
  for (int u = 0; u < split.corpus.users.size(); ++u) {
    for (const Event& ev : split.train(u)) {
      seen_[static_cast<std::size_t>(u)][ev.time.packed()].insert(ev.poi);
    }
  }
}

bool NegativeSampler::excluded(const Triplet& positive, int poi) const {
  if (poi == positive.next_poi) return true;
  const auto& by_key = seen_[static_cast<std::size_t>(positive.user)];
  const auto it = by_key.find(positive.next_time.packed());
  return it != by_key.end() && it->second.count(poi) > 0;
}

int NegativeSampler::eligible_count(const Triplet& positive) const {
  const auto& by_key = seen_[static_cast<std::size_t>(positive.user)];
  const auto it = by_key.find(positive.next_time.packed());
  int excluded_n = 1;  // the positive itself
  if (it != by_key.end()) {
    excluded_n = static_cast<int>(it->second.size());
    if (it->second.count(positive.next_poi) == 0) ++excluded_n;
  }
  return n_pois_ - excluded_n;
}

std::vector<int> NegativeSampler::sample(Rng& rng, const Triplet& positive, int n) const {
  const int eligible = eligible_count(positive);
  if (eligible < n) {
    throw ExhaustedCandidatesError("need " + std::to_string(n) + " negatives but only " +
                                   std::to_string(eligible) + " POIs are eligible");
  }

  std::vector<int> picked;
  picked.reserve(static_cast<std::size_t>(n));

  if (n * 2 < eligible) {
    // Rejection sampling; the eligible set is large so this terminates fast.
    std::unordered_set<int> taken;
    int attempts = 0;
    const int max_attempts = 30 * n + 100;
    while (static_cast<int>(picked.size()) < n && attempts < max_attempts) {
      ++attempts;
      const int cand = rng.below_int(n_pois_);
      if (excluded(positive, cand) || taken.count(cand)) continue;
      taken.insert(cand);
      picked.push_back(cand);
    }
    if (static_cast<int>(picked.size()) == n) return picked;
    picked.clear();
  }

  // Enumerate the eligible set and draw a uniform n-subset.
  std::vector<int> pool;
  pool.reserve(static_cast<std::size_t>(eligible));
  for (int poi = 0; poi < n_pois_; ++poi) {
    if (!excluded(positive, poi)) pool.push_back(poi);
  }
  for (int i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(i) +
                   rng.below(pool.size() - static_cast<std::size_t>(i));
    std::swap(pool[static_cast<std::size_t>(i)], pool[j]);
    picked.push_back(pool[static_cast<std::size_t>(i)]);
  }
  return picked;
}

LossBreakdown loss(const Model& model, const TrainingExample& example) {
  return run_example(model, example, 1.0, nullptr);
}

LossBreakdown grad_step(Model& model, std::span<const TrainingExample> batch,
                        const TrainConfig& config) {
  if (batch.empty()) throw InvalidArgumentError("empty batch");
  const int d = model.params.dim();
  const Scalar scale = Scalar{1} / static_cast<Scalar>(batch.size());

  GradAccum acc(d);
  LossBreakdown mean;
  for (const TrainingExample& ex : batch) {
    const LossBreakdown lb = run_example(model, ex, scale, &acc);
    mean.hinge += scale * lb.hinge;
    mean.soft_constraint += scale * lb.soft_constraint;
  }
  mean.total = mean.hinge + model.hyper.soft_c * mean.soft_constraint;

  if (!std::isfinite(mean.total) || !acc.all_finite()) {
    throw NonFiniteGradientError("non-finite gradient or loss; lower the learning rate");
  }

  ModelParams& p = model.params;
  const Scalar lr = config.learning_rate;
  apply_rows(p.user_emb, acc.user, lr);
  apply_rows(p.poi_emb, acc.poi, lr);
  apply_rows(p.month_emb, acc.month, lr);
  apply_rows(p.weekday_emb, acc.weekday, lr);
  apply_rows(p.hour_emb, acc.hour, lr);
  if (acc.fusion_touched) {
    p.g_weight -= lr * acc.g_weight;
    p.g_bias -= lr * acc.g_bias;
    p.h_weight -= lr * acc.h_weight;
    p.h_bias -= lr * acc.h_bias;
  }

  if (config.clamp_entities) {
    for (const auto& [idx, g] : acc.user) {
      (void)g;
      clamp_row(p.user_emb, idx);
    }
    for (const auto& [idx, g] : acc.poi) {
      (void)g;
      clamp_row(p.poi_emb, idx);
    }
  }
  return mean;
}

std::vector<Triplet> training_transitions(const Split& split) {
  std::vector<Triplet> out;
  for (int u = 0; u < split.corpus.users.size(); ++u) {
    const auto train = split.train(u);
    for (std::size_t i = 0; i + 1 < train.size(); ++i) {
      Triplet t;
      t.user = u;
      t.prev_poi = train[i].poi;
      t.prev_time = train[i].time;
      t.next_poi = train[i + 1].poi;
      t.next_time = train[i + 1].time;
      out.push_back(t);
    }
  }
  return out;
}

TrainResult train(const Split& split, const HyperParams& hyper, const TrainConfig& config,
                  const ProgressSink& progress) {
  hyper.validate();
  config.validate();

  const std::vector<Triplet> transitions = training_transitions(split);
  if (transitions.empty()) {
    throw EmptyTrainingSetError("no training transitions (all users too short)");
  }

  TrainResult result;
  result.model.hyper = hyper;
  result.model.params =
      init_params(split.corpus.users.size(), split.corpus.pois.size(), hyper, config);
  if (config.clamp_entities) {
    clamp_all_rows(result.model.params.user_emb);
    clamp_all_rows(result.model.params.poi_emb);
  }

  const NegativeSampler sampler(split, split.corpus.pois.size());
  Rng rng(mix_seed(config.seed, 0x747261696eull));  // stream separate from init

  std::vector<std::size_t> order(transitions.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  const auto n = transitions.size();
  std::vector<TrainingExample> batch;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(order);

    Scalar sum_hinge = 0, sum_soft = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(config.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) {
        TrainingExample ex;
        ex.positive = transitions[order[i]];
        ex.negatives = sampler.sample(rng, ex.positive, config.neg_samples);
        batch.push_back(std::move(ex));
      }
      try {
        const LossBreakdown lb = grad_step(result.model, batch, config);
        const auto bs = static_cast<Scalar>(batch.size());
        sum_hinge += lb.hinge * bs;
        sum_soft += lb.soft_constraint * bs;
      } catch (const NonFiniteGradientError& e) {
        throw NonFiniteGradientError("epoch " + std::to_string(epoch) + ", step " +
                                     std::to_string(start / config.batch_size) + ": " +
                                     e.what());
      }
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.mean_hinge = sum_hinge / static_cast<Scalar>(n);
    stats.mean_soft = sum_soft / static_cast<Scalar>(n);
    stats.mean_total = stats.mean_hinge + hyper.soft_c * stats.mean_soft;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);
    if (progress) progress(stats);
  }
  return result;
}

}  // namespace transtarec
