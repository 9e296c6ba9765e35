#pragma once

#include <optional>
#include <span>
#include <vector>

#include "poploop/domain.hpp"
#include "poploop/rng.hpp"

namespace poploop {

// Selection probabilities over the slate items. nullopt means every item on
// the slate has zero relevance, i.e. no interaction is possible; callers log
// a zero-click session for that case instead of dropping it.
std::optional<std::vector<double>> choice_probabilities_unbiased(
    const RankedSlate& slate, std::span<const double> relevance_row);

// As above but each item's relevance is multiplied by the examination
// probability of its display position before normalizing.
std::optional<std::vector<double>> choice_probabilities_biased(
    const RankedSlate& slate, std::span<const double> relevance_row,
    const PositionBiasCurve& curve);

size_t sample_choice(std::span<const double> probabilities, Rng& rng);

// Per-slot examination model: each slot is examined with the position's bias
// probability, and an examined slot is clicked iff an independent relevance
// draw fires. Exactly two draws are consumed per slot, in slot order,
// regardless of outcomes, so RNG consumption is schedule-independent.
//
// The returned record has segment/examined/clicked filled in; session_id,
// iteration and slate_index are left for the owning log to assign.
ImpressionRecord simulate_examination_session(const RankedSlate& slate,
                                              int32_t segment,
                                              std::span<const double> relevance_row,
                                              const PositionBiasCurve& curve, Rng& rng);

// Single-choice model: samples exactly one clicked slot from the unbiased
// (curve == nullptr) or biased choice distribution. In biased mode the
// examined flags are realized bias draws kept for logging consistency, with
// the chosen slot forced examined; in unbiased mode every slot counts as
// examined. All-zero relevance yields a zero-click record.
ImpressionRecord simulate_choice_session(const RankedSlate& slate, int32_t segment,
                                         std::span<const double> relevance_row,
                                         const PositionBiasCurve* curve, Rng& rng);

}  // namespace poploop
