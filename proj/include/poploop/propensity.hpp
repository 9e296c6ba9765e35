#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "poploop/domain.hpp"
#include "poploop/parallel.hpp"

namespace poploop {

// Position-bias curve estimated from click logs alone, without access to the
// true relevance table. Model: P(click | segment u, item i shown at position k)
// = theta_k * rho_ui with latent examination; theta is the quantity of
// interest, rho a nuisance.
struct PropensityFit {
  std::vector<double> curve_table;          // index k-1, normalized so entry 0 == 1
  double beta_hat = 0.0;                    // power-law severity of curve_table
  int em_iterations_used = 0;
  bool converged = false;
  std::vector<double> log_likelihood_trace;  // one entry per EM iteration
};

struct EmOptions {
  int max_iter = 200;
  double tol = 1e-6;  // max relative parameter change between iterations
  // Initial per-position examination guess; empty means 1/k. Scaling this
  // uniformly must not change the final normalized curve.
  std::vector<double> theta_init;
  // Require the log to cover at least this many positions (0 = whatever the
  // longest slate covers). Useful when a config promises a slate length.
  int32_t min_positions = 0;
};

PropensityFit estimate_propensity_em(const InteractionLog& log,
                                     const EmOptions& options = {},
                                     Exec exec = Exec::serial);
PropensityFit estimate_propensity_em(const InteractionLog& log, int max_iter,
                                     double tol, Exec exec = Exec::serial);

// Least-squares slope of -log(table[k]) against log(k), 1-based k.
double fit_power_law(std::span<const double> curve_table);

}  // namespace poploop
