#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poploop/domain.hpp"

namespace poploop {

enum class PolicyKind { popularity, naive_ctr, ipw_ctr, position_aware };

const char* to_string(PolicyKind kind);
PolicyKind parse_policy_kind(const std::string& s);

// Per-(segment,item) click-through table. Pairs with impressions keep the
// exact ratio clicks_weighted / impressions (clipped to [0,1] for inverse-
// propensity weighting); unseen pairs fall back to the Laplace-smoothed
// global prior (clicks+1) / (impressions+2).
struct CtrTable {
  int32_t n_segments = 0;
  int32_t n_items = 0;
  std::vector<double> clicks_weighted;  // row-major (segment, item)
  std::vector<int64_t> impressions;
  std::vector<double> estimate;
  double global_prior = 0.0;

  double at(int32_t segment, int32_t item) const {
    return estimate[static_cast<size_t>(segment) * static_cast<size_t>(n_items) +
                    static_cast<size_t>(item)];
  }
};

struct PositionHyper {
  double l2_position = 1e-3;
  double learning_rate = 0.1;
  int32_t max_epochs = 500;
  int32_t patience = 10;
  int32_t default_position = 1;
};

// Logit-table model: score(u, i, k) = sigmoid(a[u,i] + gamma[k]). Serving
// evaluates every candidate at default_position, so the position weight adds
// a constant and the ranking reflects a alone.
struct PositionAwareModel {
  int32_t n_segments = 0;
  int32_t n_items = 0;
  int32_t max_position = 0;
  std::vector<double> logits;            // a, row-major (segment, item)
  std::vector<double> position_weights;  // gamma, index 0 = position 1
  PositionHyper hyper;
  int32_t epochs_run = 0;
  double best_val_loss = 0.0;

  double logit_at(int32_t segment, int32_t item) const {
    return logits[static_cast<size_t>(segment) * static_cast<size_t>(n_items) +
                  static_cast<size_t>(item)];
  }
};

struct RankerPolicy {
  PolicyKind kind = PolicyKind::popularity;
  std::vector<double> popularity_scores;  // popularity: clicks per item id
  CtrTable ctr;                           // naive_ctr / ipw_ctr
  PositionAwareModel model;               // position_aware

  double score(int32_t segment, int32_t item) const;
};

// All trainers retrain from scratch on the given logs.
RankerPolicy train_popularity(std::span<const InteractionLog> logs, int32_t n_items);
RankerPolicy train_naive_ctr(std::span<const InteractionLog> logs, int32_t n_segments,
                             int32_t n_items);
RankerPolicy train_ipw_ctr(std::span<const InteractionLog> logs,
                           const PositionBiasCurve& curve, int32_t n_segments,
                           int32_t n_items);

// Full-batch gradient descent on binary cross-entropy over one example per
// shown slot, with an L2 penalty on the position weights (applied as a
// proximal shrinkage step so extreme strengths stay stable). Early-stops on
// the validation split (sessions hashed to 10%) after `patience` epochs
// without improvement and restores the best parameters.
RankerPolicy train_position_aware(std::span<const InteractionLog> logs,
                                  int32_t n_segments, int32_t n_items,
                                  int32_t max_position, const PositionHyper& hyper,
                                  uint64_t seed);

// Single-log conveniences.
RankerPolicy train_popularity(const InteractionLog& log, int32_t n_items);
RankerPolicy train_naive_ctr(const InteractionLog& log, int32_t n_segments,
                             int32_t n_items);
RankerPolicy train_ipw_ctr(const InteractionLog& log, const PositionBiasCurve& curve,
                           int32_t n_segments, int32_t n_items);
RankerPolicy train_position_aware(const InteractionLog& log, int32_t n_segments,
                                  int32_t n_items, int32_t max_position,
                                  const PositionHyper& hyper, uint64_t seed);

// Top slate_length candidates by descending score, ties by ascending item id.
RankedSlate serve(const RankerPolicy& policy, int32_t segment,
                  std::span<const int32_t> candidate_items, int32_t slate_length);

}  // namespace poploop
