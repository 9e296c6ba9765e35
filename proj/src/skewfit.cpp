#include "poploop/skewfit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace poploop {

PopularityHistogram make_histogram(std::vector<int64_t> counts_by_item) {
  PopularityHistogram h;
  h.total = std::accumulate(counts_by_item.begin(), counts_by_item.end(), int64_t{0});
  const size_t n = counts_by_item.size();
  std::vector<int32_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int32_t a, int32_t b) {
    return counts_by_item[static_cast<size_t>(a)] >
           counts_by_item[static_cast<size_t>(b)];
  });
  h.ranks.assign(n, 0);
  for (size_t r = 0; r < n; ++r)
    h.ranks[static_cast<size_t>(order[r])] = static_cast<int32_t>(r) + 1;
  h.counts = std::move(counts_by_item);
  return h;
}

PopularityHistogram build_histogram(const InteractionLog& log, int32_t n_items) {
  std::vector<int64_t> counts(static_cast<size_t>(n_items), 0);
  for (const auto& rec : log.records) {
    const auto& items = log.slate_of(rec);
    for (size_t j = 0; j < rec.clicked.size(); ++j)
      if (rec.clicked[j]) ++counts[static_cast<size_t>(items[j])];
  }
  return make_histogram(std::move(counts));
}

PopularityFit fit_exponential_mle(const PopularityHistogram& hist) {
  if (hist.total < 1)
    throw std::domain_error("fit_exponential_mle: histogram has no interactions");
  int64_t rank_sum = 0;  // exact, so duplicating every click is a no-op
  for (size_t i = 0; i < hist.counts.size(); ++i)
    rank_sum += hist.counts[i] * static_cast<int64_t>(hist.ranks[i]);
  PopularityFit fit;
  fit.n_observations = hist.total;
  fit.mean_rank = static_cast<double>(rank_sum) / static_cast<double>(hist.total);
  fit.lambda_hat = 1.0 / fit.mean_rank;
  return fit;
}

double skew_change(double lambda_before, double lambda_after) {
  if (!(lambda_before > 0.0))
    throw std::domain_error("skew_change: reference rate must be positive");
  return (lambda_after - lambda_before) / lambda_before;
}

std::vector<double> weighted_density(double lambda, std::span<const double> weights) {
  if (weights.empty()) throw std::domain_error("weighted_density: empty weight table");
  std::vector<double> density(weights.size());
  double total = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0)
      throw std::domain_error("weighted_density: negative weight");
    density[i] = weights[i] * lambda * std::exp(-lambda * static_cast<double>(i + 1));
    total += density[i];
  }
  if (!(total > 0.0))
    throw std::domain_error("weighted_density: all weights are zero");
  for (double& d : density) d /= total;
  return density;
}

std::vector<std::optional<double>> effective_exposure_weights(
    const InteractionLog& log, const PositionBiasCurve& curve, int32_t n_items) {
  PopularityHistogram hist = build_histogram(log, n_items);
  std::vector<double> bias_sum(static_cast<size_t>(n_items), 0.0);
  std::vector<int64_t> impressions(static_cast<size_t>(n_items), 0);
  for (const auto& rec : log.records) {
    const auto& items = log.slate_of(rec);
    for (size_t j = 0; j < items.size(); ++j) {
      size_t rank0 = static_cast<size_t>(
          hist.ranks[static_cast<size_t>(items[j])] - 1);
      bias_sum[rank0] += curve.bias_at(static_cast<int32_t>(j) + 1);
      ++impressions[rank0];
    }
  }
  std::vector<std::optional<double>> weights(static_cast<size_t>(n_items));
  for (size_t r = 0; r < weights.size(); ++r)
    if (impressions[r] > 0)
      weights[r] = bias_sum[r] / static_cast<double>(impressions[r]);
  return weights;
}

}  // namespace poploop
