#include "poploop/interaction.hpp"

#include <cstddef>

namespace poploop {

namespace {

std::optional<std::vector<double>> normalize_scores(std::vector<double> scores) {
  double total = 0.0;
  for (double s : scores) total += s;
  if (!(total > 0.0)) return std::nullopt;
  for (double& s : scores) s /= total;
  return scores;
}

}  // namespace

std::optional<std::vector<double>> choice_probabilities_unbiased(
    const RankedSlate& slate, std::span<const double> relevance_row) {
  std::vector<double> scores(slate.items.size());
  for (size_t j = 0; j < slate.items.size(); ++j)
    scores[j] = relevance_row[static_cast<size_t>(slate.items[j])];
  return normalize_scores(std::move(scores));
}

std::optional<std::vector<double>> choice_probabilities_biased(
    const RankedSlate& slate, std::span<const double> relevance_row,
    const PositionBiasCurve& curve) {
  std::vector<double> scores(slate.items.size());
  for (size_t j = 0; j < slate.items.size(); ++j)
    scores[j] = curve.bias_at(static_cast<int32_t>(j) + 1) *
                relevance_row[static_cast<size_t>(slate.items[j])];
  return normalize_scores(std::move(scores));
}

size_t sample_choice(std::span<const double> probabilities, Rng& rng) {
  return rng.categorical(probabilities);
}

ImpressionRecord simulate_examination_session(const RankedSlate& slate,
                                              int32_t segment,
                                              std::span<const double> relevance_row,
                                              const PositionBiasCurve& curve,
                                              Rng& rng) {
  const size_t len = slate.items.size();
  ImpressionRecord rec;
  rec.segment = segment;
  rec.examined.assign(len, false);
  rec.clicked.assign(len, false);
  for (size_t j = 0; j < len; ++j) {
    bool examined = rng.bernoulli(curve.bias_at(static_cast<int32_t>(j) + 1));
    bool relevant =
        rng.bernoulli(relevance_row[static_cast<size_t>(slate.items[j])]);
    rec.examined[j] = examined;
    rec.clicked[j] = examined && relevant;
  }
  return rec;
}

ImpressionRecord simulate_choice_session(const RankedSlate& slate, int32_t segment,
                                         std::span<const double> relevance_row,
                                         const PositionBiasCurve* curve, Rng& rng) {
  const size_t len = slate.items.size();
  ImpressionRecord rec;
  rec.segment = segment;
  rec.examined.assign(len, curve == nullptr);
  rec.clicked.assign(len, false);

  auto probs = curve ? choice_probabilities_biased(slate, relevance_row, *curve)
                     : choice_probabilities_unbiased(slate, relevance_row);

  std::optional<size_t> chosen;
  if (probs) chosen = sample_choice(*probs, rng);
  if (curve) {
    // Realized examination draws are logged even when nothing can be chosen,
    // so biased-mode logs always carry position-consistent exposure flags.
    for (size_t j = 0; j < len; ++j)
      rec.examined[j] = rng.bernoulli(curve->bias_at(static_cast<int32_t>(j) + 1));
  }
  if (chosen) {
    rec.examined[*chosen] = true;
    rec.clicked[*chosen] = true;
  }
  return rec;
}

}  // namespace poploop
