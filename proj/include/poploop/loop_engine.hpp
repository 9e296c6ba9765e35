#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "poploop/domain.hpp"
#include "poploop/parallel.hpp"
#include "poploop/rankers.hpp"
#include "poploop/skewfit.hpp"

namespace poploop {

// Training data window for iteration t: the immediately preceding iteration's
// log (default, keeps drift per-iteration) or every log collected so far.
enum class TrainWindow { previous, all };

struct LoopConfig {
  int32_t n_iterations = 3;  // served iterations after the bootstrap
  int32_t sessions_per_iteration = 10000;
  int32_t slate_length = 6;
  InteractionMode mode = InteractionMode::choice_biased;
  PositionBiasCurve curve = PositionBiasCurve::power_law(1.0, 6);
  PolicyKind policy_kind = PolicyKind::naive_ctr;
  PositionHyper hyper;           // used by position_aware only
  std::vector<double> traffic;   // per-segment weights; empty = uniform
  TrainWindow window = TrainWindow::previous;
  uint64_t seed = 0;

  // Throws ConfigError naming the violated invariant.
  void validate(const World& world) const;
  std::vector<double> effective_traffic(const World& world) const;
};

struct IterationSummary {
  int32_t iteration = 0;
  int64_t clicks = 0;
  PopularityFit fit;
  double skew_vs_bootstrap = 0.0;
};

struct LoopResult {
  std::vector<InteractionLog> logs;    // index = iteration, 0 = bootstrap
  std::vector<RankerPolicy> policies;  // policies[t-1] served iteration t
  std::vector<IterationSummary> summaries;
  bool aborted = false;
  std::string abort_reason;
};

// Random slates (uniform without replacement) with the given interaction
// mode; the bias curve only matters in biased/examination modes. Empty
// traffic means uniform over segments. Session streams derive from
// (seed, iteration, session_id), so results do not depend on the execution
// schedule.
InteractionLog random_slate_log(const World& world, const PositionBiasCurve& curve,
                                InteractionMode mode, int32_t slate_length,
                                int32_t n_sessions, std::span<const double> traffic,
                                uint64_t seed, int32_t iteration = 0,
                                Exec exec = Exec::serial);

// Iteration 0: traffic unaffected by any model. Uses unbiased choice for the
// choice modes and examination interactions for examination-mode loops
// (position-randomized exposure is what the examination estimators consume).
InteractionLog bootstrap_log(const LoopConfig& config, const World& world,
                             Exec exec = Exec::serial);

// One served iteration: segment drawn from the traffic mixture, the policy's
// top slate for that segment, interaction per config.mode.
InteractionLog run_iteration(const World& world, const RankerPolicy& policy,
                             const LoopConfig& config, int32_t iteration_index,
                             Exec exec = Exec::serial);

// Bootstrap, then train-serve-collect for each iteration, fitting the
// popularity histogram as it goes. Training failure aborts with partial
// results preserved and the reason flagged.
LoopResult run_feedback_loop(const World& world, const LoopConfig& config,
                             Exec exec = Exec::serial);

}  // namespace poploop
