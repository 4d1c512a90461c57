// Forward computation of the time-adaptive translation model: embedding
// lookup, time composition, the g/h fusion layers, hyperplane projection,
// triplet scoring and candidate ranking. Everything here is a pure function
// of (model, inputs); a frozen Model can be shared across threads.
#pragma once

#include "transtarec/types.hpp"

#include <span>
#include <utility>
#include <vector>

namespace transtarec {

enum class RankMode { inner, neg_l2 };

struct HyperParams {
  int dim = 100;
  Scalar margin = 1.0;
  Scalar soft_c = 1.0;
  Scalar epsilon = 0.001;
  RankMode rank_mode = RankMode::inner;
  bool baseline_mode = false;  // time-blind ablation: score |v_pi + v_u - v_pj|^2

  void validate() const;  // throws InvalidArgumentError
};

// The nine learnable tensors.
struct ModelParams {
  Mat user_emb;     // |U| x d
  Mat poi_emb;      // |P| x d
  Mat month_emb;    // 12 x d
  Mat weekday_emb;  // 7 x d
  Mat hour_emb;     // 24 x d
  Mat g_weight;     // d x 3d, translation fusion
  Vec g_bias;       // d
  Mat h_weight;     // d x 3d, normal fusion
  Vec h_bias;       // d

  int dim() const { return static_cast<int>(g_bias.size()); }
  int n_users() const { return static_cast<int>(user_emb.rows()); }
  int n_pois() const { return static_cast<int>(poi_emb.rows()); }
  bool all_finite() const;
};

struct Model {
  HyperParams hyper;
  ModelParams params;
};

// One observed transition {(p_i, t_i), u, (p_j, t_j)}.
struct Triplet {
  int user = -1;
  int prev_poi = -1;
  TimeKey prev_time;
  int next_poi = -1;
  TimeKey next_time;
};

// Sum of the month, weekday and hour embedding rows for t.
Vec time_embedding(const ModelParams& params, const TimeKey& t);

// Concatenation [v_ti ; v_u ; v_tj] feeding both fusion layers.
Vec fusion_input(const ModelParams& params, const TimeKey& t_i, int user, const TimeKey& t_j);

// Time-adaptive translation vector g(...) = w_g [v_ti; v_u; v_tj] + b_g.
// In baseline mode this is the bare user translation v_u.
Vec fuse_translation(const Model& model, const TimeKey& t_i, int user, const TimeKey& t_j);

// Unnormalized output of the h fusion layer.
Vec fuse_normal_raw(const ModelParams& params, const TimeKey& t_i, int user, const TimeKey& t_j);

// Unit hyperplane normal. Throws DegenerateNormal when the raw output has
// norm <= 1e-12.
Vec fuse_normal(const Model& model, const TimeKey& t_i, int user, const TimeKey& t_j);

// Per-query state shared by scoring and ranking so both take the exact same
// floating-point path per candidate.
struct QueryContext {
  bool baseline = false;
  Vec normal;       // unit w (empty in baseline mode)
  Vec translation;  // v_ut, or v_u in baseline mode
  Vec source;       // v_pi_perp + v_ut (baseline: v_pi + v_u)
};

QueryContext make_query_context(const Model& model, int user, const TimeKey& t_i, int prev_poi,
                                const TimeKey& t_j);

// Ranking score of one candidate under the given mode. inner: transported
// source dotted with the candidate's projection (higher is better);
// neg_l2: squared residual of the translation (lower is better).
Scalar candidate_score(const Model& model, const QueryContext& ctx, int poi, RankMode mode);

// True when (score_a, index_a) ranks strictly ahead of (score_b, index_b).
bool ranks_ahead(Scalar score_a, int idx_a, Scalar score_b, int idx_b, RankMode mode);

// Squared-residual plausibility of a triplet (low = plausible).
Scalar score_triplet(const Model& model, const Triplet& triplet);

// Candidates ordered best-first under model.hyper.rank_mode unless
// overridden; ties broken by ascending POI index.
std::vector<std::pair<int, Scalar>> rank_candidates(const Model& model, int user,
                                                    const TimeKey& t_i, int prev_poi,
                                                    const TimeKey& t_j,
                                                    std::span<const int> candidates);
std::vector<std::pair<int, Scalar>> rank_candidates(const Model& model, int user,
                                                    const TimeKey& t_i, int prev_poi,
                                                    const TimeKey& t_j,
                                                    std::span<const int> candidates,
                                                    RankMode mode);

// 1-based rank of `poi` within the full vocabulary for this query, under the
// same ordering rank_candidates uses.
int rank_of(const Model& model, const QueryContext& ctx, int poi, RankMode mode);

const char* to_string(RankMode mode);

}  // namespace transtarec
