#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "poploop/domain.hpp"

namespace poploop {

// Clicks per item plus 1-based popularity ranks (descending count, ties by
// ascending item id; zero-click items take the largest ranks). total == 0 is
// the empty-histogram condition callers must check before fitting.
struct PopularityHistogram {
  std::vector<int64_t> counts;  // indexed by item id
  std::vector<int32_t> ranks;   // indexed by item id
  int64_t total = 0;

  int32_t n_items() const { return static_cast<int32_t>(counts.size()); }
  double share(int32_t item) const {
    return static_cast<double>(counts[static_cast<size_t>(item)]) /
           static_cast<double>(total);
  }
};

struct PopularityFit {
  double lambda_hat = 0.0;
  double mean_rank = 0.0;
  int64_t n_observations = 0;
};

PopularityHistogram make_histogram(std::vector<int64_t> counts_by_item);
PopularityHistogram build_histogram(const InteractionLog& log, int32_t n_items);

// Each click contributes its item's popularity rank as one observation; the
// rate estimate is the exponential MLE 1/mean(rank). Throws std::domain_error
// on an empty histogram.
PopularityFit fit_exponential_mle(const PopularityHistogram& hist);

// Relative change (after - before) / before; positive = more skew.
double skew_change(double lambda_before, double lambda_after);

// Evaluates weight[x] * lambda * exp(-lambda * x) on the 1-based rank grid
// x = 1..weights.size() and normalizes to sum 1.
std::vector<double> weighted_density(double lambda, std::span<const double> weights);

// Average examination bias received by the item holding each popularity rank,
// over all impressions in the log. Ranks never impressed are absent.
std::vector<std::optional<double>> effective_exposure_weights(
    const InteractionLog& log, const PositionBiasCurve& curve, int32_t n_items);

}  // namespace poploop
