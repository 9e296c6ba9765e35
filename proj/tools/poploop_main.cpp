#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "poploop/errors.hpp"
#include "poploop/experiment.hpp"
#include "poploop/log_io.hpp"
#include "poploop/parallel.hpp"

using namespace poploop;

int main(int argc, char** argv) {
  CLI::App app{"position-bias feedback loop simulator and analysis toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, variant;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  std::string log_path, run_dir;
  int max_iter = 200;
  double tol = 1e-6;

  auto* sim = app.add_subcommand("simulate", "run the configured feedback loop");
  sim->add_option("--config", config_path, "experiment config (JSON)")->required();
  sim->add_option("--out", out, "output directory (overrides config)");
  sim->add_option("--seed", seed, "run seed (overrides config)")
      ->each([&](const std::string&) { seed_set = true; });
  sim->add_option("--threads", threads, "worker threads (never changes results)");
  sim->add_option("--variant", variant, "run only this variant");

  auto* est = app.add_subcommand("estimate-propensity",
                                 "fit the position-bias curve to a click log");
  est->add_option("log", log_path, "impression log (JSONL)")->required();
  est->add_option("--out", out, "write the fit as JSON here");
  est->add_option("--max-iter", max_iter, "EM iteration cap");
  est->add_option("--tol", tol, "EM convergence tolerance");
  est->add_option("--threads", threads, "worker threads (never changes results)");

  auto* skew = app.add_subcommand("fit-skew",
                                  "fit the exponential popularity model to a log");
  skew->add_option("log", log_path, "impression log (JSONL)")->required();
  skew->add_option("--out", out, "write the fit as JSON here");

  auto* eval = app.add_subcommand("evaluate", "recompute metrics.csv for a run");
  eval->add_option("run_dir", run_dir, "run directory with manifest.json")
      ->required();
  eval->add_option("--threads", threads, "worker threads (never changes results)");

  auto* rep = app.add_subcommand("report", "render per-variant deltas vs a baseline");
  rep->add_option("run_dir", run_dir, "run directory with metrics.csv")->required();
  rep->add_option("--variant", variant, "baseline variant (default: first)");
  rep->add_option("--out", out, "report path (default: <run_dir>/report.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) set_threads(threads);
  const Exec exec = Exec::parallel;

  try {
    if (sim->parsed()) {
      std::string text;
      try {
        text = read_text_file(config_path);
      } catch (const IoError& e) {
        throw ConfigError(e.what());
      }
      auto cfg = ExperimentConfig::from_json_text(text, config_path);
      if (!out.empty()) cfg.output_dir = out;
      if (seed_set) cfg.seed = seed;
      return run_simulate(cfg, exec, variant);
    }
    if (est->parsed()) {
      auto fit = run_estimate_propensity(log_path, out, max_iter, tol, exec);
      std::printf("beta_hat %.6f (%s after %d iterations)\n", fit.beta_hat,
                  fit.converged ? "converged" : "not converged",
                  fit.em_iterations_used);
      return 0;
    }
    if (skew->parsed()) {
      auto fit = run_fit_skew(log_path, out);
      std::printf("lambda_hat %.6f (mean rank %.3f over %lld clicks)\n",
                  fit.lambda_hat, fit.mean_rank,
                  static_cast<long long>(fit.n_observations));
      return 0;
    }
    if (eval->parsed()) {
      run_evaluate(run_dir, exec);
      std::printf("metrics.csv rewritten in %s\n", run_dir.c_str());
      return 0;
    }
    if (rep->parsed()) {
      std::printf("%s\n", run_report(run_dir, variant, out).c_str());
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
