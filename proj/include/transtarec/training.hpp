// Margin-based ranking training with negative sampling, the soft
// in-hyperplane constraint on the translation vector, and exact SGD
// gradients through fusion, normalization and projection.
#pragma once

#include "transtarec/corpus.hpp"
#include "transtarec/model.hpp"
#include "transtarec/rng.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace transtarec {

struct TrainConfig {
  Scalar learning_rate = 0.01;
  int epochs = 50;
  int neg_samples = 1;
  int batch_size = 64;
  std::uint64_t seed = 42;
  bool clamp_entities = true;  // rescale updated user/POI rows onto the unit ball
  Scalar init_scale = 0.01;    // noise on w_g around its block-identity warm start

  void validate() const;
};

struct TrainingExample {
  Triplet positive;
  std::vector<int> negatives;  // corrupted next-POI indices
};

struct LossBreakdown {
  Scalar hinge = 0;            // sum of [f_pos + margin - f_neg]_+ over negatives
  Scalar soft_constraint = 0;  // [ |w.v|^2 / |v|^2 - eps^2 ]_+
  Scalar total = 0;            // hinge + soft_c * soft_constraint
};

struct EpochStats {
  int epoch = 0;  // 0-based
  Scalar mean_hinge = 0;
  Scalar mean_soft = 0;
  Scalar mean_total = 0;
  double seconds = 0;
};
using ProgressSink = std::function<void(const EpochStats&)>;

// Embedding tables uniform in [-6/sqrt(d), 6/sqrt(d)]; w_g starts at the
// block [0 | I | 0] (translation == v_u) plus +-init_scale noise, w_h at
// +-init_scale noise with a constant non-zero bias so the normal never
// starts degenerate. Bit-identical for identical arguments.
ModelParams init_params(int n_users, int n_pois, const HyperParams& hyper,
                        const TrainConfig& config);

// Uniform negatives from P \ {positive next POI} \ {POIs the user visited at
// the positive's next TimeKey in the training region}.
class NegativeSampler {
 public:
  NegativeSampler(const Split& split, int n_pois);

  // Throws ExhaustedCandidates when fewer than n eligible POIs exist.
  std::vector<int> sample(Rng& rng, const Triplet& positive, int n) const;

  bool excluded(const Triplet& positive, int poi) const;
  int eligible_count(const Triplet& positive) const;

 private:
  int n_pois_;
  // per user: packed TimeKey -> POIs seen at that key in training data
  std::vector<std::unordered_map<int, std::unordered_set<int>>> seen_;
};

LossBreakdown loss(const Model& model, const TrainingExample& example);

// One SGD step on the batch-mean loss. Only tensors touched by the batch
// change; with clamp_entities the touched entity rows are rescaled to norm 1
// afterwards when they exceed it. Throws NonFiniteGradient on NaN/Inf.
LossBreakdown grad_step(Model& model, std::span<const TrainingExample> batch,
                        const TrainConfig& config);

// Consecutive-pair training triplets from the split's training regions.
std::vector<Triplet> training_transitions(const Split& split);

struct TrainResult {
  Model model;
  std::vector<EpochStats> history;
};

// Full training run: init, then `epochs` passes over shuffled examples with
// fresh negatives each epoch. Deterministic for a fixed (split, hyper,
// config). Emits one progress event per epoch.
TrainResult train(const Split& split, const HyperParams& hyper, const TrainConfig& config,
                  const ProgressSink& progress = {});

}  // namespace transtarec
