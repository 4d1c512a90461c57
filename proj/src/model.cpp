#include "transtarec/model.hpp"

#include "transtarec/geometry.hpp"

#include <algorithm>
#include <string>

namespace transtarec {

namespace {

constexpr Scalar kDegenerateNormThreshold = 1e-12;

void check_index(int idx, int bound, const char* what) {
  if (idx < 0 || idx >= bound) {
    throw InvalidArgumentError(std::string(what) + " index " + std::to_string(idx) +
                               " out of range [0, " + std::to_string(bound) + ")");
  }
}

void check_time(const TimeKey& t) {
  if (!t.valid()) {
    throw InvalidArgumentError("TimeKey out of range: month=" + std::to_string(t.month) +
                               " weekday=" + std::to_string(t.weekday) +
                               " hour=" + std::to_string(t.hour));
  }
}

}  // namespace

void HyperParams::validate() const {
  if (dim < 1) throw InvalidArgumentError("dim must be >= 1");
  if (!(margin >= 0)) throw InvalidArgumentError("margin must be >= 0");
  if (!(soft_c >= 0)) throw InvalidArgumentError("soft_c must be >= 0");
  if (!(epsilon > 0)) throw InvalidArgumentError("epsilon must be > 0");
}

bool ModelParams::all_finite() const {
  return user_emb.allFinite() && poi_emb.allFinite() && month_emb.allFinite() &&
         weekday_emb.allFinite() && hour_emb.allFinite() && g_weight.allFinite() &&
         g_bias.allFinite() && h_weight.allFinite() && h_bias.allFinite();
}

Vec time_embedding(const ModelParams& params, const TimeKey& t) {
  check_time(t);
  return params.month_emb.row(t.month - 1).transpose() +
         params.weekday_emb.row(t.weekday).transpose() +
         params.hour_emb.row(t.hour).transpose();
}

Vec fusion_input(const ModelParams& params, const TimeKey& t_i, int user, const TimeKey& t_j) {
  check_index(user, params.n_users(), "user");
  const int d = params.dim();
  Vec x(3 * d);
  x.segment(0, d) = time_embedding(params, t_i);
  x.segment(d, d) = params.user_emb.row(user).transpose();
  x.segment(2 * d, d) = time_embedding(params, t_j);
  return x;
}

Vec fuse_translation(const Model& model, const TimeKey& t_i, int user, const TimeKey& t_j) {
  if (model.hyper.baseline_mode) {
    check_index(user, model.params.n_users(), "user");
    return model.params.user_emb.row(user).transpose();
  }
  const Vec x = fusion_input(model.params, t_i, user, t_j);
  return model.params.g_weight * x + model.params.g_bias;
}

Vec fuse_normal_raw(const ModelParams& params, const TimeKey& t_i, int user, const TimeKey& t_j) {
  const Vec x = fusion_input(params, t_i, user, t_j);
  return params.h_weight * x + params.h_bias;
}

Vec fuse_normal(const Model& model, const TimeKey& t_i, int user, const TimeKey& t_j) {
  Vec raw = fuse_normal_raw(model.params, t_i, user, t_j);
  const Scalar norm = raw.norm();
  if (norm <= kDegenerateNormThreshold) {
    throw DegenerateNormalError("h-layer output collapsed (norm " + std::to_string(norm) + ")");
  }
  raw /= norm;
  return raw;
}

QueryContext make_query_context(const Model& model, int user, const TimeKey& t_i, int prev_poi,
                                const TimeKey& t_j) {
  check_index(prev_poi, model.params.n_pois(), "poi");
  QueryContext ctx;
  ctx.baseline = model.hyper.baseline_mode;
  ctx.translation = fuse_translation(model, t_i, user, t_j);
  if (ctx.baseline) {
    ctx.source = model.params.poi_emb.row(prev_poi).transpose() + ctx.translation;
  } else {
    ctx.normal = fuse_normal(model, t_i, user, t_j);
    ctx.source =
        project_unchecked(model.params.poi_emb.row(prev_poi).transpose(), ctx.normal) +
        ctx.translation;
  }
  return ctx;
}

Scalar candidate_score(const Model& model, const QueryContext& ctx, int poi, RankMode mode) {
  check_index(poi, model.params.n_pois(), "poi");
  if (ctx.baseline) {
    if (mode == RankMode::inner) {
      return ctx.source.dot(model.params.poi_emb.row(poi).transpose());
    }
    return (ctx.source - model.params.poi_emb.row(poi).transpose()).squaredNorm();
  }
  const Vec perp =
      project_unchecked(model.params.poi_emb.row(poi).transpose(), ctx.normal);
  if (mode == RankMode::inner) return ctx.source.dot(perp);
  return (ctx.source - perp).squaredNorm();
}

bool ranks_ahead(Scalar score_a, int idx_a, Scalar score_b, int idx_b, RankMode mode) {
  if (score_a != score_b) {
    return mode == RankMode::inner ? score_a > score_b : score_a < score_b;
  }
  return idx_a < idx_b;
}

Scalar score_triplet(const Model& model, const Triplet& triplet) {
  const QueryContext ctx = make_query_context(model, triplet.user, triplet.prev_time,
                                              triplet.prev_poi, triplet.next_time);
  return candidate_score(model, ctx, triplet.next_poi, RankMode::neg_l2);
}

std::vector<std::pair<int, Scalar>> rank_candidates(const Model& model, int user,
                                                    const TimeKey& t_i, int prev_poi,
                                                    const TimeKey& t_j,
                                                    std::span<const int> candidates,
                                                    RankMode mode) {
  if (candidates.empty()) throw EmptyCandidatesError("empty candidate set");
  const QueryContext ctx = make_query_context(model, user, t_i, prev_poi, t_j);
  std::vector<std::pair<int, Scalar>> scored;
  scored.reserve(candidates.size());
  for (const int poi : candidates) {
    scored.emplace_back(poi, candidate_score(model, ctx, poi, mode));
  }
  std::sort(scored.begin(), scored.end(),
            [mode](const std::pair<int, Scalar>& a, const std::pair<int, Scalar>& b) {
              return ranks_ahead(a.second, a.first, b.second, b.first, mode);
            });
  return scored;
}

std::vector<std::pair<int, Scalar>> rank_candidates(const Model& model, int user,
                                                    const TimeKey& t_i, int prev_poi,
                                                    const TimeKey& t_j,
                                                    std::span<const int> candidates) {
  return rank_candidates(model, user, t_i, prev_poi, t_j, candidates, model.hyper.rank_mode);
}

int rank_of(const Model& model, const QueryContext& ctx, int poi, RankMode mode) {
  const Scalar target = candidate_score(model, ctx, poi, mode);
  int ahead = 0;
  for (int p = 0; p < model.params.n_pois(); ++p) {
    if (p == poi) continue;
    const Scalar s = candidate_score(model, ctx, p, mode);
    if (ranks_ahead(s, p, target, poi, mode)) ++ahead;
  }
  return ahead + 1;
}

const char* to_string(RankMode mode) {
  return mode == RankMode::inner ? "inner" : "neg_l2";
}

}  // namespace transtarec
