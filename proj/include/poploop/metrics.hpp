#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "poploop/domain.hpp"
#include "poploop/parallel.hpp"
#include "poploop/skewfit.hpp"

namespace poploop {

// One evaluation unit: the slate the policy under test would serve to this
// session's segment, plus what the logged user actually interacted with.
struct EvalSession {
  int32_t segment = 0;
  std::vector<int32_t> evaluated;         // policy slate, best first
  std::vector<int32_t> attributed;        // clicked items from the log
  std::vector<int32_t> logged_positions;  // 1-based, parallel to attributed
};

// All aggregates return nullopt when no session qualifies (undefined metric,
// deliberately distinct from zero).

// Mean over sessions with attributed items of |attributed ∩ top-k| / |attributed|.
std::optional<double> recall_at_k(std::span<const EvalSession> sessions, int32_t k,
                                  Exec exec = Exec::serial);

// NDCG@k where an attributed item's gain is 1/bias(logged position) and
// non-attributed items gain 0; discount log2(position + 1). Sessions without
// attributed items are excluded.
std::optional<double> ips_ndcg_at_k(std::span<const EvalSession> sessions, int32_t k,
                                    const PositionBiasCurve& curve,
                                    Exec exec = Exec::serial);

// Mean popularity count of the top-k evaluated items, averaged over all
// sessions. popularity maps item id -> count from the preceding iteration's
// log; ids beyond the table count as 0.
std::optional<double> arp_at_k(std::span<const EvalSession> sessions, int32_t k,
                               std::span<const int64_t> popularity,
                               Exec exec = Exec::serial);

// Effective catalog share: smallest m such that the m most-clicked items hold
// at least fraction x of all clicks, divided by n_items. With interpolate,
// the last item is counted fractionally.
std::optional<double> ecs_at_x(const PopularityHistogram& hist, double x,
                               bool interpolate = false);

// NDCG@k of one slate against true relevance probabilities as graded gains;
// the ideal ranking draws from the whole relevance row. nullopt when the row
// has no mass.
std::optional<double> ndcg_true_relevance(std::span<const int32_t> slate,
                                          std::span<const double> relevance_row,
                                          int32_t k);

}  // namespace poploop
