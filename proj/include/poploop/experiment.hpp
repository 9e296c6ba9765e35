#pragma once

#include <optional>
#include <string>

#include "poploop/config.hpp"
#include "poploop/parallel.hpp"
#include "poploop/propensity.hpp"

namespace poploop {

// Runs every variant of the experiment and writes the run directory:
// <out>/<variant>/iteration_<t>.jsonl, metrics.csv, manifest.json, and
// per-variant propensity.json when estimation is enabled. Returns 0, or 1
// when a variant aborted (partial outputs are written and flagged in the
// manifest). Configuration problems throw ConfigError before anything is
// written.
int run_simulate(const ExperimentConfig& config, Exec exec,
                 const std::string& variant_filter = "");

// Recomputes metrics.csv for an existing run directory from its manifest and
// logs. Byte-identical to what run_simulate wrote when the logs are
// untouched.
void run_evaluate(const std::string& run_dir, Exec exec);

// Renders report.csv: final-iteration ranking metrics per variant with
// deltas vs the baseline variant (relative), plus per-iteration lambda and
// skew rows (absolute deltas). Returns the output path.
std::string run_report(const std::string& run_dir, const std::string& baseline_variant,
                       const std::string& out_path = "");

struct SkewFitResult {
  double lambda_hat = 0.0;
  double mean_rank = 0.0;
  int64_t n_observations = 0;
};

// Fits the exponential popularity model to a JSONL log's click histogram;
// writes a small JSON file when out_path is nonempty.
SkewFitResult run_fit_skew(const std::string& log_path,
                           const std::string& out_path = "");

// EM propensity estimation over a JSONL log; writes PropensityFit JSON when
// out_path is nonempty.
PropensityFit run_estimate_propensity(const std::string& log_path,
                                      const std::string& out_path, int max_iter,
                                      double tol, Exec exec);

}  // namespace poploop
