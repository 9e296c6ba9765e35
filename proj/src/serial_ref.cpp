#include "poploop/serial_ref.hpp"

#include <algorithm>
#include <vector>

#include "poploop/interaction.hpp"
#include "poploop/parallel.hpp"
#include "poploop/rng.hpp"

namespace poploop::serial_ref {

InteractionLog collect_log(const World& world, const PositionBiasCurve& curve,
                           InteractionMode mode, int32_t slate_length,
                           int32_t n_sessions, std::span<const double> traffic,
                           uint64_t seed, int32_t iteration) {
  std::vector<double> weights(traffic.begin(), traffic.end());
  if (weights.empty())
    weights.assign(static_cast<size_t>(world.relevance.n_segments),
                   1.0 / static_cast<double>(world.relevance.n_segments));

  InteractionLog log;
  log.meta.iteration = iteration;
  log.meta.ranker_id = "random";
  log.meta.seed = seed;
  log.meta.mode = mode;
  for (int64_t s = 0; s < n_sessions; ++s) {
    Rng rng(derive_stream(seed, static_cast<uint64_t>(iteration),
                          static_cast<uint64_t>(s)));
    const auto segment = static_cast<int32_t>(rng.categorical(weights));
    RankedSlate slate{rng.sample_without_replacement(world.catalog.n_items,
                                                     slate_length)};
    const auto row = world.relevance.row(segment);
    ImpressionRecord rec =
        mode == InteractionMode::examination
            ? simulate_examination_session(slate, segment, row, curve, rng)
            : simulate_choice_session(
                  slate, segment, row,
                  mode == InteractionMode::choice_biased ? &curve : nullptr, rng);
    rec.session_id = s;
    rec.iteration = iteration;
    rec.slate_index = static_cast<uint32_t>(log.slates.size());
    log.slates.push_back(std::move(slate));
    log.records.push_back(std::move(rec));
  }
  return log;
}

namespace {

CtrTable ctr_table(const InteractionLog& log, int32_t n_segments, int32_t n_items,
                   const PositionBiasCurve* curve) {
  CtrTable t;
  t.n_segments = n_segments;
  t.n_items = n_items;
  const size_t cells = static_cast<size_t>(n_segments) * static_cast<size_t>(n_items);
  t.clicks_weighted.assign(cells, 0.0);
  t.impressions.assign(cells, 0);
  double total_weight = 0.0;
  int64_t total_shown = 0;
  for (const auto& rec : log.records) {
    const auto& items = log.slate_of(rec);
    for (size_t j = 0; j < items.size(); ++j) {
      const size_t cell =
          static_cast<size_t>(rec.segment) * static_cast<size_t>(n_items) +
          static_cast<size_t>(items[j]);
      t.impressions[cell] += 1;
      total_shown += 1;
      if (!rec.clicked[j]) continue;
      const double w =
          curve ? 1.0 / curve->bias_at(static_cast<int32_t>(j) + 1) : 1.0;
      t.clicks_weighted[cell] += w;
      total_weight += w;
    }
  }
  t.global_prior =
      std::clamp((total_weight + 1.0) / (static_cast<double>(total_shown) + 2.0),
                 0.0, 1.0);
  t.estimate.resize(cells);
  for (size_t c = 0; c < cells; ++c)
    t.estimate[c] =
        t.impressions[c] > 0
            ? std::clamp(t.clicks_weighted[c] / static_cast<double>(t.impressions[c]),
                         0.0, 1.0)
            : t.global_prior;
  return t;
}

}  // namespace

CtrTable naive_ctr_table(const InteractionLog& log, int32_t n_segments,
                         int32_t n_items) {
  return ctr_table(log, n_segments, n_items, nullptr);
}

CtrTable ipw_ctr_table(const InteractionLog& log, const PositionBiasCurve& curve,
                       int32_t n_segments, int32_t n_items) {
  return ctr_table(log, n_segments, n_items, &curve);
}

std::optional<double> recall_at_k(std::span<const EvalSession> sessions, int32_t k) {
  // Chunks are laid over session indices (skipped sessions still occupy
  // their slot), matching the contract of the parallel aggregate.
  double total = 0.0;
  int64_t counted = 0;
  for (size_t begin = 0; begin < sessions.size(); begin += kReduceChunk) {
    const size_t end = std::min(sessions.size(), begin + kReduceChunk);
    double part = 0.0;
    for (size_t i = begin; i < end; ++i) {
      const auto& s = sessions[i];
      if (s.attributed.empty()) continue;
      int hits = 0;
      for (int32_t want : s.attributed) {
        const size_t top = std::min<size_t>(static_cast<size_t>(k), s.evaluated.size());
        for (size_t j = 0; j < top; ++j)
          if (s.evaluated[j] == want) {
            ++hits;
            break;
          }
      }
      part += static_cast<double>(hits) / static_cast<double>(s.attributed.size());
      ++counted;
    }
    total += part;
  }
  if (counted == 0) return std::nullopt;
  return total / static_cast<double>(counted);
}

double chunk_ordered_sum(std::span<const double> values) {
  double total = 0.0;
  for (size_t begin = 0; begin < values.size(); begin += kReduceChunk) {
    const size_t end = std::min(values.size(), begin + kReduceChunk);
    double part = 0.0;
    for (size_t i = begin; i < end; ++i) part += values[i];
    total += part;
  }
  return total;
}

}  // namespace poploop::serial_ref
