// Finite-difference gradient checking shared by the unit and acceptance
// suites. Analytic gradients are extracted from a single lr=1 grad_step on a
// copy (clamping off), so the check exercises the real update path.
#pragma once

#include "oracles.hpp"
#include "transtarec/training.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace grad_check {

using transtarec::Model;
using transtarec::ModelParams;
using transtarec::QueryContext;
using transtarec::RankMode;
using transtarec::Rng;
using transtarec::Scalar;
using transtarec::TrainConfig;
using transtarec::TrainingExample;

inline ModelParams extract_gradients(const Model& model,
                                     std::span<const TrainingExample> batch) {
  Model stepped = model;
  TrainConfig config;
  config.learning_rate = 1.0;
  config.clamp_entities = false;
  transtarec::grad_step(stepped, batch, config);

  ModelParams grads = model.params;
  ModelParams before = model.params;
  auto views_after = oracle::tensor_views(stepped.params);
  auto views_before = oracle::tensor_views(before);
  auto views_out = oracle::tensor_views(grads);
  for (std::size_t t = 0; t < views_out.size(); ++t) {
    for (std::ptrdiff_t i = 0; i < views_out[t].size; ++i) {
      views_out[t].data[i] = views_before[t].data[i] - views_after[t].data[i];
    }
  }
  return grads;
}

inline Scalar batch_mean_loss(const Model& model, std::span<const TrainingExample> batch) {
  Scalar total = 0;
  for (const TrainingExample& ex : batch) total += transtarec::loss(model, ex).total;
  return total / static_cast<Scalar>(batch.size());
}

// Max relative deviation between analytic gradients and central differences
// (step h) over every coordinate of all nine tensors.
inline Scalar max_fd_error(Model& model, std::span<const TrainingExample> batch,
                           ModelParams& grads, Scalar h = 1e-5) {
  Scalar worst = 0;
  auto views = oracle::tensor_views(model.params);
  auto gviews = oracle::tensor_views(grads);
  for (std::size_t t = 0; t < views.size(); ++t) {
    for (std::ptrdiff_t i = 0; i < views[t].size; ++i) {
      const Scalar saved = views[t].data[i];
      views[t].data[i] = saved + h;
      const Scalar up = batch_mean_loss(model, batch);
      views[t].data[i] = saved - h;
      const Scalar down = batch_mean_loss(model, batch);
      views[t].data[i] = saved;
      const Scalar numeric = (up - down) / (2 * h);
      const Scalar analytic = gviews[t].data[i];
      const Scalar mag = std::max(std::abs(numeric), std::abs(analytic));
      if (mag < 1e-10) continue;  // both zero: coordinate untouched by the batch
      worst = std::max(worst, std::abs(numeric - analytic) / mag);
    }
  }
  return worst;
}

inline TrainingExample make_example(Rng& rng, int n_users, int n_pois, int n_negs) {
  TrainingExample ex;
  ex.positive = oracle::random_triplet(rng, n_users, n_pois);
  while (static_cast<int>(ex.negatives.size()) < n_negs) {
    const int neg = rng.below_int(n_pois);
    if (neg != ex.positive.next_poi) ex.negatives.push_back(neg);
  }
  return ex;
}

// True when a hinge or constraint argument sits close enough to its kink
// that a +-h perturbation could cross it.
inline bool near_kink(const Model& model, const TrainingExample& ex) {
  const QueryContext ctx = transtarec::make_query_context(
      model, ex.positive.user, ex.positive.prev_time, ex.positive.prev_poi,
      ex.positive.next_time);
  const Scalar f_pos =
      transtarec::candidate_score(model, ctx, ex.positive.next_poi, RankMode::neg_l2);
  for (const int neg : ex.negatives) {
    const Scalar f_neg = transtarec::candidate_score(model, ctx, neg, RankMode::neg_l2);
    if (std::abs(f_pos + model.hyper.margin - f_neg) < 1e-3) return true;
  }
  if (!model.hyper.baseline_mode) {
    const Scalar nv = ctx.translation.squaredNorm();
    if (nv > 1e-12) {
      const Scalar pd = ctx.normal.dot(ctx.translation);
      const Scalar eps2 = model.hyper.epsilon * model.hyper.epsilon;
      if (std::abs(pd * pd / nv - eps2) < 1e-4) return true;
    }
  }
  return false;
}

}  // namespace grad_check
