#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "poploop/domain.hpp"
#include "poploop/metrics.hpp"
#include "poploop/rankers.hpp"

// Plain serial re-implementations of the hot kernels, coded independently of
// the OpenMP versions in the library. The numeric contract is schedule-free
// by construction — per-session random streams, fixed-width chunk-ordered
// reductions — so tests compare these against the parallel kernels bit for
// bit, and the kernel benchmark uses them as its baseline.

namespace poploop::serial_ref {

// Counterpart of random_slate_log.
InteractionLog collect_log(const World& world, const PositionBiasCurve& curve,
                           InteractionMode mode, int32_t slate_length,
                           int32_t n_sessions, std::span<const double> traffic,
                           uint64_t seed, int32_t iteration = 0);

// Counterparts of the train_*_ctr table builders.
CtrTable naive_ctr_table(const InteractionLog& log, int32_t n_segments,
                         int32_t n_items);
CtrTable ipw_ctr_table(const InteractionLog& log, const PositionBiasCurve& curve,
                       int32_t n_segments, int32_t n_items);

// Counterpart of recall_at_k.
std::optional<double> recall_at_k(std::span<const EvalSession> sessions, int32_t k);

// The summation order every aggregate in the library is defined against:
// fixed-width chunks summed left to right, chunk totals folded in order.
double chunk_ordered_sum(std::span<const double> values);

}  // namespace poploop::serial_ref
