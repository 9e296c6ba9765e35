#include "poploop/loop_engine.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "poploop/errors.hpp"
#include "poploop/interaction.hpp"
#include "poploop/rng.hpp"

namespace poploop {

namespace {

std::string describe(int64_t v) { return std::to_string(v); }

}  // namespace

void LoopConfig::validate(const World& world) const {
  if (n_iterations < 1)
    throw ConfigError("loop config: n_iterations must be >= 1");
  if (sessions_per_iteration < 1)
    throw ConfigError("loop config: sessions_per_iteration must be >= 1");
  if (slate_length < 1)
    throw ConfigError("loop config: slate_length must be >= 1");
  if (slate_length > world.catalog.n_items)
    throw ConfigError("loop config: slate_length (" + describe(slate_length) +
                      ") exceeds catalog size (" +
                      describe(world.catalog.n_items) + ")");
  if (slate_length > curve.max_position())
    throw ConfigError("loop config: slate_length (" + describe(slate_length) +
                      ") exceeds the bias curve's max_position (" +
                      describe(curve.max_position()) + ")");
  if (!traffic.empty()) {
    if (static_cast<int32_t>(traffic.size()) != world.relevance.n_segments)
      throw ConfigError("loop config: traffic mixture has " +
                        describe(static_cast<int64_t>(traffic.size())) +
                        " weights but the world has " +
                        describe(world.relevance.n_segments) + " segments");
    double sum = 0.0;
    for (double w : traffic) {
      if (w < 0.0) throw ConfigError("loop config: traffic weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9)
      throw ConfigError("loop config: traffic mixture weights must sum to 1");
  }
}

std::vector<double> LoopConfig::effective_traffic(const World& world) const {
  if (!traffic.empty()) return traffic;
  return std::vector<double>(
      static_cast<size_t>(world.relevance.n_segments),
      1.0 / static_cast<double>(world.relevance.n_segments));
}

InteractionLog random_slate_log(const World& world, const PositionBiasCurve& curve,
                                InteractionMode mode, int32_t slate_length,
                                int32_t n_sessions, std::span<const double> traffic,
                                uint64_t seed, int32_t iteration, Exec exec) {
  std::vector<double> uniform;
  if (traffic.empty()) {
    uniform.assign(static_cast<size_t>(world.relevance.n_segments),
                   1.0 / static_cast<double>(world.relevance.n_segments));
    traffic = uniform;
  }
  InteractionLog log;
  log.meta.iteration = iteration;
  log.meta.ranker_id = "random";
  log.meta.seed = seed;
  log.meta.mode = mode;
  log.slates.resize(static_cast<size_t>(n_sessions));
  log.records.resize(static_cast<size_t>(n_sessions));

  parallel_for(static_cast<size_t>(n_sessions), exec, [&](size_t s) {
    Rng rng(derive_stream(seed, static_cast<uint64_t>(iteration), s));
    const auto segment = static_cast<int32_t>(rng.categorical(traffic));
    RankedSlate slate{rng.sample_without_replacement(world.catalog.n_items,
                                                     slate_length)};
    auto row = world.relevance.row(segment);
    ImpressionRecord rec;
    switch (mode) {
      case InteractionMode::examination:
        rec = simulate_examination_session(slate, segment, row, curve, rng);
        break;
      case InteractionMode::choice_biased:
        rec = simulate_choice_session(slate, segment, row, &curve, rng);
        break;
      case InteractionMode::choice_unbiased:
        rec = simulate_choice_session(slate, segment, row, nullptr, rng);
        break;
    }
    rec.session_id = static_cast<int64_t>(s);
    rec.iteration = iteration;
    rec.slate_index = static_cast<uint32_t>(s);
    log.slates[s] = std::move(slate);
    log.records[s] = std::move(rec);
  });
  return log;
}

InteractionLog bootstrap_log(const LoopConfig& config, const World& world,
                             Exec exec) {
  const auto mode = config.mode == InteractionMode::examination
                        ? InteractionMode::examination
                        : InteractionMode::choice_unbiased;
  auto traffic = config.effective_traffic(world);
  auto log = random_slate_log(world, config.curve, mode, config.slate_length,
                              config.sessions_per_iteration, traffic, config.seed,
                              0, exec);
  log.meta.ranker_id = "bootstrap";
  return log;
}

InteractionLog run_iteration(const World& world, const RankerPolicy& policy,
                             const LoopConfig& config, int32_t iteration_index,
                             Exec exec) {
  if (iteration_index < 1)
    throw ConfigError("run_iteration: iteration_index must be >= 1");
  auto traffic = config.effective_traffic(world);

  // One served slate per segment: serving is deterministic, so this is the
  // whole slate universe of the iteration.
  std::vector<int32_t> catalog(static_cast<size_t>(world.catalog.n_items));
  std::iota(catalog.begin(), catalog.end(), 0);
  InteractionLog log;
  log.meta.iteration = iteration_index;
  log.meta.ranker_id = to_string(policy.kind);
  log.meta.seed = config.seed;
  log.meta.mode = config.mode;
  for (int32_t u = 0; u < world.relevance.n_segments; ++u)
    log.slates.push_back(serve(policy, u, catalog, config.slate_length));

  log.records.resize(static_cast<size_t>(config.sessions_per_iteration));
  parallel_for(static_cast<size_t>(config.sessions_per_iteration), exec, [&](size_t s) {
    Rng rng(derive_stream(config.seed, static_cast<uint64_t>(iteration_index), s));
    const auto segment = static_cast<int32_t>(rng.categorical(traffic));
    const RankedSlate& slate = log.slates[static_cast<size_t>(segment)];
    auto row = world.relevance.row(segment);
    ImpressionRecord rec;
    switch (config.mode) {
      case InteractionMode::examination:
        rec = simulate_examination_session(slate, segment, row, config.curve, rng);
        break;
      case InteractionMode::choice_biased:
        rec = simulate_choice_session(slate, segment, row, &config.curve, rng);
        break;
      case InteractionMode::choice_unbiased:
        rec = simulate_choice_session(slate, segment, row, nullptr, rng);
        break;
    }
    rec.session_id = static_cast<int64_t>(s);
    rec.iteration = iteration_index;
    rec.slate_index = static_cast<uint32_t>(segment);
    log.records[s] = std::move(rec);
  });
  return log;
}

namespace {

RankerPolicy train_for_loop(std::span<const InteractionLog> window,
                            const World& world, const LoopConfig& config,
                            int32_t iteration) {
  switch (config.policy_kind) {
    case PolicyKind::popularity:
      return train_popularity(window, world.catalog.n_items);
    case PolicyKind::naive_ctr:
      return train_naive_ctr(window, world.relevance.n_segments,
                             world.catalog.n_items);
    case PolicyKind::ipw_ctr:
      return train_ipw_ctr(window, config.curve, world.relevance.n_segments,
                           world.catalog.n_items);
    case PolicyKind::position_aware:
      return train_position_aware(window, world.relevance.n_segments,
                                  world.catalog.n_items, config.slate_length,
                                  config.hyper,
                                  derive_stream(config.seed, 3,
                                                static_cast<uint64_t>(iteration)));
  }
  throw ConfigError("loop config: unknown policy kind");
}

IterationSummary summarize(const InteractionLog& log, int32_t n_items,
                           double lambda0) {
  IterationSummary s;
  s.iteration = log.meta.iteration;
  s.clicks = log.click_count();
  s.fit = fit_exponential_mle(build_histogram(log, n_items));
  s.skew_vs_bootstrap = lambda0 > 0.0 ? skew_change(lambda0, s.fit.lambda_hat) : 0.0;
  return s;
}

}  // namespace

LoopResult run_feedback_loop(const World& world, const LoopConfig& config,
                             Exec exec) {
  config.validate(world);
  LoopResult result;
  result.logs.push_back(bootstrap_log(config, world, exec));
  if (result.logs[0].click_count() == 0) {
    result.aborted = true;
    result.abort_reason = "bootstrap produced no clicks; cannot fit or train";
    return result;
  }
  result.summaries.push_back(summarize(result.logs[0], world.catalog.n_items, 0.0));
  const double lambda0 = result.summaries[0].fit.lambda_hat;
  result.summaries[0].skew_vs_bootstrap = 0.0;

  for (int32_t t = 1; t <= config.n_iterations; ++t) {
    std::span<const InteractionLog> window =
        config.window == TrainWindow::all
            ? std::span<const InteractionLog>(result.logs.data(),
                                              static_cast<size_t>(t))
            : std::span<const InteractionLog>(result.logs.data() + (t - 1), 1);
    RankerPolicy policy;
    try {
      policy = train_for_loop(window, world, config, t);
    } catch (const TrainingError& e) {
      result.aborted = true;
      result.abort_reason =
          "training failed before iteration " + std::to_string(t) + ": " + e.what();
      return result;
    }
    auto log = run_iteration(world, policy, config, t, exec);
    if (log.click_count() == 0) {
      result.aborted = true;
      result.abort_reason =
          "iteration " + std::to_string(t) + " produced no clicks";
      result.policies.push_back(std::move(policy));
      result.logs.push_back(std::move(log));
      return result;
    }
    result.policies.push_back(std::move(policy));
    result.logs.push_back(std::move(log));
    result.summaries.push_back(
        summarize(result.logs.back(), world.catalog.n_items, lambda0));
  }
  return result;
}

}  // namespace poploop
