#include "poploop/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "poploop/errors.hpp"

namespace poploop {

namespace {

// Click counts grouped by (segment, item, position): the EM updates and the
// likelihood only depend on the data through these totals.
struct GroupedClicks {
  int32_t n_positions = 0;
  std::vector<int32_t> cell;         // segment * n_items + item, per group
  std::vector<int32_t> pos0;         // 0-based position, per group
  std::vector<double> impressions;   // per group
  std::vector<double> clicks;        // per group
  std::vector<int32_t> observed_cells;
  std::vector<double> cell_impressions;      // aligned with observed_cells
  std::vector<double> position_impressions;  // index pos0
  double global_ctr = 0.0;
};

GroupedClicks group_log(const InteractionLog& log, int32_t min_positions) {
  if (log.records.empty())
    throw EstimationError("cannot estimate propensities from an empty log");

  int32_t n_segments = 0, n_items = 0, n_positions = 0;
  for (const auto& rec : log.records) {
    n_segments = std::max(n_segments, rec.segment + 1);
    const auto& items = log.slate_of(rec);
    n_positions = std::max(n_positions, static_cast<int32_t>(items.size()));
    for (int32_t item : items) n_items = std::max(n_items, item + 1);
  }
  if (min_positions > n_positions) {
    std::string missing;
    for (int32_t k = n_positions + 1; k <= min_positions; ++k) {
      if (!missing.empty()) missing += ", ";
      missing += std::to_string(k);
    }
    throw EstimationError("positions never observed: " + missing);
  }

  const size_t cells = static_cast<size_t>(n_segments) * static_cast<size_t>(n_items);
  const size_t table = cells * static_cast<size_t>(n_positions);
  std::vector<int64_t> n_dense(table, 0), c_dense(table, 0);
  int64_t total_n = 0, total_c = 0;
  for (const auto& rec : log.records) {
    const auto& items = log.slate_of(rec);
    const size_t base = static_cast<size_t>(rec.segment) * static_cast<size_t>(n_items);
    for (size_t j = 0; j < items.size(); ++j) {
      const size_t idx =
          (base + static_cast<size_t>(items[j])) * static_cast<size_t>(n_positions) + j;
      ++n_dense[idx];
      c_dense[idx] += rec.clicked[j] ? 1 : 0;
      ++total_n;
      total_c += rec.clicked[j] ? 1 : 0;
    }
  }

  GroupedClicks g;
  g.n_positions = n_positions;
  g.position_impressions.assign(static_cast<size_t>(n_positions), 0.0);
  g.global_ctr = static_cast<double>(total_c) / static_cast<double>(total_n);
  std::vector<double> cell_total(cells, 0.0);
  for (size_t cell = 0; cell < cells; ++cell) {
    for (int32_t k = 0; k < n_positions; ++k) {
      const size_t idx = cell * static_cast<size_t>(n_positions) + static_cast<size_t>(k);
      if (n_dense[idx] == 0) continue;
      g.cell.push_back(static_cast<int32_t>(cell));
      g.pos0.push_back(k);
      g.impressions.push_back(static_cast<double>(n_dense[idx]));
      g.clicks.push_back(static_cast<double>(c_dense[idx]));
      g.position_impressions[static_cast<size_t>(k)] += static_cast<double>(n_dense[idx]);
      cell_total[cell] += static_cast<double>(n_dense[idx]);
    }
  }
  for (size_t cell = 0; cell < cells; ++cell)
    if (cell_total[cell] > 0.0) {
      g.observed_cells.push_back(static_cast<int32_t>(cell));
      g.cell_impressions.push_back(cell_total[cell]);
    }
  for (int32_t k = 0; k < n_positions; ++k)
    if (g.position_impressions[static_cast<size_t>(k)] == 0.0)
      throw EstimationError("positions never observed: " + std::to_string(k + 1));
  return g;
}

struct SoftCounts {
  std::vector<double> theta_num;  // per position
  std::vector<double> rho_num;    // dense per cell
};

// Data log-likelihood plus the log prior behind the smoothed relevance
// update, so the trace the EM monotonicity guarantee applies to is the one
// we actually report.
// Accumulated in long double: consecutive trace values can differ by less
// than the documented 1e-9 monotonicity slack near convergence, so the
// summation error has to stay well below that.
double penalized_log_likelihood(const GroupedClicks& g, const std::vector<double>& theta,
                                const std::vector<double>& rho, Exec exec) {
  long double ll = chunked_reduce<long double>(
      g.cell.size(), exec,
      [&](size_t begin, size_t end, long double& part) {
        for (size_t i = begin; i < end; ++i) {
          const double p = theta[static_cast<size_t>(g.pos0[i])] *
                           rho[static_cast<size_t>(g.cell[i])];
          const double c = g.clicks[i];
          const double miss = g.impressions[i] - c;
          if (c > 0.0) part += c * std::log(p);
          if (miss > 0.0) part += miss * std::log1p(-p);
        }
      },
      [](long double& into, const long double& part) { into += part; });
  for (int32_t cell : g.observed_cells) {
    const double r = rho[static_cast<size_t>(cell)];
    ll += std::log(r) + std::log1p(-r);
  }
  return static_cast<double>(ll);
}

}  // namespace

PropensityFit estimate_propensity_em(const InteractionLog& log, const EmOptions& options,
                                     Exec exec) {
  if (options.max_iter < 1) throw EstimationError("max_iter must be at least 1");
  if (!(options.tol > 0.0)) throw EstimationError("tol must be positive");

  const GroupedClicks g = group_log(log, options.min_positions);
  const size_t n_positions = static_cast<size_t>(g.n_positions);
  size_t cells = 0;
  for (int32_t cell : g.observed_cells)
    cells = std::max(cells, static_cast<size_t>(cell) + 1);

  std::vector<double> theta;
  if (options.theta_init.empty()) {
    theta.resize(n_positions);
    for (size_t k = 0; k < n_positions; ++k) theta[k] = 1.0 / static_cast<double>(k + 1);
  } else {
    if (options.theta_init.size() != n_positions)
      throw EstimationError("theta_init must cover exactly the observed positions");
    for (double v : options.theta_init)
      if (!(v > 0.0) || v > 1.0)
        throw EstimationError("theta_init entries must lie in (0, 1]");
    theta = options.theta_init;
  }
  const double rho0 = std::clamp(g.global_ctr, 1e-6, 1.0 - 1e-6);
  std::vector<double> rho(cells, rho0);

  PropensityFit fit;
  for (int iter = 1; iter <= options.max_iter; ++iter) {
    SoftCounts acc = chunked_reduce<SoftCounts>(
        g.cell.size(), exec,
        [&](size_t begin, size_t end, SoftCounts& part) {
          part.theta_num.assign(n_positions, 0.0);
          part.rho_num.assign(cells, 0.0);
          for (size_t i = begin; i < end; ++i) {
            const size_t k = static_cast<size_t>(g.pos0[i]);
            const size_t cell = static_cast<size_t>(g.cell[i]);
            const double th = theta[k], r = rho[cell];
            const double miss = g.impressions[i] - g.clicks[i];
            // Posterior examination/relevance for an unclicked impression.
            const double denom = 1.0 - th * r;
            const double p_exam = th * (1.0 - r) / denom;
            const double p_rel = r * (1.0 - th) / denom;
            part.theta_num[k] += g.clicks[i] + miss * p_exam;
            part.rho_num[cell] += g.clicks[i] + miss * p_rel;
          }
        },
        [&](SoftCounts& into, const SoftCounts& part) {
          if (into.theta_num.empty()) {
            into = part;
            return;
          }
          for (size_t k = 0; k < n_positions; ++k) into.theta_num[k] += part.theta_num[k];
          for (size_t c = 0; c < cells; ++c) into.rho_num[c] += part.rho_num[c];
        });

    double max_rel_change = 0.0;
    for (size_t k = 0; k < n_positions; ++k) {
      const double next = acc.theta_num[k] / g.position_impressions[k];
      max_rel_change =
          std::max(max_rel_change, std::abs(next - theta[k]) / std::max(theta[k], 1e-12));
      theta[k] = next;
    }
    for (size_t i = 0; i < g.observed_cells.size(); ++i) {
      const size_t cell = static_cast<size_t>(g.observed_cells[i]);
      const double next = (acc.rho_num[cell] + 1.0) / (g.cell_impressions[i] + 2.0);
      max_rel_change =
          std::max(max_rel_change, std::abs(next - rho[cell]) / std::max(rho[cell], 1e-12));
      rho[cell] = next;
    }

    fit.log_likelihood_trace.push_back(penalized_log_likelihood(g, theta, rho, exec));
    fit.em_iterations_used = iter;
    if (max_rel_change < options.tol) {
      fit.converged = true;
      break;
    }
  }

  std::vector<double> ratio(n_positions);
  for (size_t k = 0; k < n_positions; ++k) ratio[k] = theta[k] / theta[0];
  fit.beta_hat = n_positions >= 2 ? fit_power_law(ratio) : 0.0;
  fit.curve_table.resize(n_positions);
  for (size_t k = 0; k < n_positions; ++k)
    fit.curve_table[k] = std::min(ratio[k], 1.0);
  return fit;
}

PropensityFit estimate_propensity_em(const InteractionLog& log, int max_iter, double tol,
                                     Exec exec) {
  EmOptions options;
  options.max_iter = max_iter;
  options.tol = tol;
  return estimate_propensity_em(log, options, exec);
}

double fit_power_law(std::span<const double> curve_table) {
  if (curve_table.size() < 2)
    throw std::domain_error("power-law fit needs at least two positions");
  for (double v : curve_table)
    if (!(v > 0.0)) throw std::domain_error("curve entries must be positive");
  const double n = static_cast<double>(curve_table.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (size_t k = 0; k < curve_table.size(); ++k) {
    const double x = std::log(static_cast<double>(k + 1));
    const double y = -std::log(curve_table[k]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace poploop
