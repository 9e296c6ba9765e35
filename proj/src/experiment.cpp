#include "poploop/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include <json.hpp>

#include "poploop/errors.hpp"
#include "poploop/log_io.hpp"
#include "poploop/loop_engine.hpp"
#include "poploop/metrics.hpp"
#include "poploop/skewfit.hpp"

namespace poploop {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string format_x(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", x);
  return buf;
}

std::vector<EvalSession> eval_sessions_from(const InteractionLog& log) {
  std::vector<EvalSession> sessions(log.records.size());
  for (size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    const auto& items = log.slate_of(rec);
    auto& s = sessions[i];
    s.segment = rec.segment;
    s.evaluated.assign(items.begin(), items.end());
    for (size_t j = 0; j < items.size(); ++j)
      if (rec.clicked[j]) {
        s.attributed.push_back(items[j]);
        s.logged_positions.push_back(static_cast<int32_t>(j) + 1);
      }
  }
  return sessions;
}

// Session mean of the true-relevance slate quality. Values are memoized per
// slate index (served logs share one slate per segment); the chunk-ordered
// mean runs over records, so the result does not depend on slate sharing.
std::optional<double> mean_true_ndcg(const InteractionLog& log, const World& world,
                                     int32_t k, Exec exec) {
  std::vector<std::optional<double>> memo(log.slates.size());
  std::vector<bool> ready(log.slates.size(), false);
  for (const auto& rec : log.records) {
    const size_t si = rec.slate_index;
    if (ready[si]) continue;
    memo[si] = ndcg_true_relevance(log.slate_of(rec),
                                   world.relevance.row(rec.segment), k);
    ready[si] = true;
  }
  struct Partial {
    double sum = 0.0;
    int64_t n = 0;
  };
  auto total = chunked_reduce<Partial>(
      log.records.size(), exec,
      [&](size_t begin, size_t end, Partial& part) {
        for (size_t i = begin; i < end; ++i) {
          const auto& v = memo[log.records[i].slate_index];
          if (v) {
            part.sum += *v;
            ++part.n;
          }
        }
      },
      [](Partial& into, const Partial& part) {
        into.sum += part.sum;
        into.n += part.n;
      });
  if (total.n == 0) return std::nullopt;
  return total.sum / static_cast<double>(total.n);
}

// Nonincreasing least-squares projection (pool adjacent violators). The raw
// EM table is a noisy estimate and may wiggle upward; the curve type requires
// monotone decay.
std::vector<double> isotonic_nonincreasing(std::vector<double> v) {
  std::vector<double> level, weight;
  for (double x : v) {
    level.push_back(x);
    weight.push_back(1.0);
    while (level.size() > 1 && level[level.size() - 2] < level.back()) {
      const double w = weight[weight.size() - 2] + weight.back();
      const double merged = (level[level.size() - 2] * weight[weight.size() - 2] +
                             level.back() * weight.back()) /
                            w;
      level.pop_back();
      weight.pop_back();
      level.back() = merged;
      weight.back() = w;
    }
  }
  std::vector<double> out;
  for (size_t b = 0; b < level.size(); ++b)
    out.insert(out.end(), static_cast<size_t>(weight[b]), level[b]);
  return out;
}

PositionBiasCurve metric_curve(const ExperimentConfig& cfg,
                               const std::vector<InteractionLog>& logs, Exec exec) {
  if (!cfg.estimate_propensity || logs.empty())
    return PositionBiasCurve::power_law(cfg.beta, std::max(cfg.slate_length, 1));
  auto fit = estimate_propensity_em(logs[0], EmOptions{}, exec);
  return PositionBiasCurve::tabulated(isotonic_nonincreasing(fit.curve_table));
}

void append_metric_rows(std::vector<MetricRow>& rows, const ExperimentConfig& cfg,
                        const std::string& variant, const World& world,
                        const std::vector<InteractionLog>& logs,
                        const PositionBiasCurve& ndcg_curve, Exec exec) {
  auto push = [&](const char* metric, std::string parameter, int32_t iteration,
                  double value) {
    rows.push_back({metric, std::move(parameter), variant, iteration, value});
  };

  double lambda0 = 0.0;
  for (size_t t = 0; t < logs.size(); ++t) {
    const auto& log = logs[t];
    const auto it = static_cast<int32_t>(t);
    const auto hist = build_histogram(log, world.catalog.n_items);
    push("clicks", "", it, static_cast<double>(hist.total));
    if (hist.total > 0) {
      const auto fit = fit_exponential_mle(hist);
      push("lambda", "", it, fit.lambda_hat);
      if (t == 0) lambda0 = fit.lambda_hat;
      if (t > 0 && lambda0 > 0.0)
        push("skew_change", "", it, skew_change(lambda0, fit.lambda_hat));
      for (double x : cfg.metrics.x)
        if (auto v = ecs_at_x(hist, x)) push("ecs", format_x(x), it, *v);
    }
    if (t == 0) continue;

    const auto sessions = eval_sessions_from(log);
    const auto popularity = build_histogram(logs[t - 1], world.catalog.n_items).counts;
    for (int32_t k : cfg.metrics.k) {
      if (auto v = recall_at_k(sessions, k, exec))
        push("recall", std::to_string(k), it, *v);
      if (auto v = ips_ndcg_at_k(sessions, k, ndcg_curve, exec))
        push("ips_ndcg", std::to_string(k), it, *v);
      if (auto v = arp_at_k(sessions, k, popularity, exec))
        push("arp", std::to_string(k), it, *v);
      if (auto v = mean_true_ndcg(log, world, k, exec))
        push("ndcg_true", std::to_string(k), it, *v);
    }
  }
}

struct VariantOutcome {
  std::string name;
  bool aborted = false;
  std::string abort_reason;
  std::vector<std::string> files;
  std::vector<IterationSummary> summaries;
};

ordered_json manifest_json(const ExperimentConfig& cfg,
                           const std::vector<VariantOutcome>& outcomes,
                           double total_seconds) {
  ordered_json doc;
  doc["schema_version"] = 1;
  doc["tool_version"] = kToolVersion;
  doc["config"] = ordered_json::parse(cfg.to_json_text());
  doc["variants"] = ordered_json::array();
  for (const auto& o : outcomes) {
    ordered_json v;
    v["name"] = o.name;
    v["aborted"] = o.aborted;
    v["abort_reason"] = o.abort_reason;
    v["files"] = o.files;
    v["iterations"] = ordered_json::array();
    for (const auto& s : o.summaries)
      v["iterations"].push_back({{"iteration", s.iteration},
                                 {"clicks", s.clicks},
                                 {"lambda", s.fit.lambda_hat},
                                 {"skew_vs_bootstrap", s.skew_vs_bootstrap}});
    doc["variants"].push_back(std::move(v));
  }
  doc["files"] = {"metrics.csv"};
  doc["timings"] = {{"total_seconds", total_seconds}};
  return doc;
}

std::vector<VariantConfig> select_variants(const ExperimentConfig& cfg,
                                           const std::string& filter) {
  if (filter.empty()) return cfg.variants;
  for (const auto& v : cfg.variants)
    if (v.name == filter) return {v};
  throw ConfigError("unknown variant '" + filter + "'");
}

}  // namespace

int run_simulate(const ExperimentConfig& cfg, Exec exec,
                 const std::string& variant_filter) {
  const auto started = std::chrono::steady_clock::now();
  cfg.validate();
  const auto variants = select_variants(cfg, variant_filter);
  const World world = cfg.make_world();
  for (const auto& v : variants) cfg.loop_for(v).validate(world);

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + cfg.output_dir +
                  "': " + ec.message());

  std::vector<MetricRow> rows;
  std::vector<VariantOutcome> outcomes;
  bool any_aborted = false;
  for (const auto& v : variants) {
    VariantOutcome outcome;
    outcome.name = v.name;
    const fs::path vdir = fs::path(cfg.output_dir) / v.name;
    fs::create_directories(vdir, ec);
    if (ec)
      throw IoError("cannot create variant directory '" + vdir.string() +
                    "': " + ec.message());

    auto result = run_feedback_loop(world, cfg.loop_for(v), exec);
    outcome.aborted = result.aborted;
    outcome.abort_reason = result.abort_reason;
    outcome.summaries = result.summaries;
    any_aborted = any_aborted || result.aborted;

    for (size_t t = 0; t < result.logs.size(); ++t) {
      const std::string rel = v.name + "/iteration_" + std::to_string(t) + ".jsonl";
      write_log_jsonl(result.logs[t], (fs::path(cfg.output_dir) / rel).string());
      outcome.files.push_back(rel);
    }
    try {
      if (cfg.estimate_propensity && !result.logs.empty()) {
        const std::string rel = v.name + "/propensity.json";
        write_propensity_json(estimate_propensity_em(result.logs[0], EmOptions{}, exec),
                              (fs::path(cfg.output_dir) / rel).string());
        outcome.files.push_back(rel);
      }
      append_metric_rows(rows, cfg, v.name, world, result.logs,
                         metric_curve(cfg, result.logs, exec), exec);
    } catch (const EstimationError& e) {
      outcome.aborted = true;
      outcome.abort_reason = std::string("propensity estimation failed: ") + e.what();
      any_aborted = true;
    }
    if (outcome.aborted)
      std::printf("variant %s: aborted: %s\n", v.name.c_str(),
                  outcome.abort_reason.c_str());
    else if (!outcome.summaries.empty())
      std::printf("variant %s: lambda %.6f -> %.6f over %d iterations\n",
                  v.name.c_str(), outcome.summaries.front().fit.lambda_hat,
                  outcome.summaries.back().fit.lambda_hat,
                  static_cast<int>(outcome.summaries.size()) - 1);
    outcomes.push_back(std::move(outcome));
  }

  write_metrics_csv(rows, (fs::path(cfg.output_dir) / "metrics.csv").string());
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started)
          .count();
  write_json_atomic(manifest_json(cfg, outcomes, seconds).dump(2) + "\n",
                    (fs::path(cfg.output_dir) / "manifest.json").string());
  return any_aborted ? 1 : 0;
}

namespace {

json load_manifest(const std::string& run_dir) {
  const std::string path = (fs::path(run_dir) / "manifest.json").string();
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw IoError(path + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("schema_version") ||
      !doc["schema_version"].is_number_integer() || doc["schema_version"] != 1)
    throw IoError(path + ": unsupported manifest schema");
  return doc;
}

}  // namespace

void run_evaluate(const std::string& run_dir, Exec exec) {
  const json manifest = load_manifest(run_dir);
  const auto cfg = ExperimentConfig::from_json_text(
      manifest.at("config").dump(), run_dir + "/manifest.json#config");
  const World world = cfg.make_world();

  std::vector<MetricRow> rows;
  for (const auto& v : manifest.at("variants")) {
    const std::string name = v.at("name").get<std::string>();
    std::vector<InteractionLog> logs;
    for (const auto& f : v.at("files")) {
      const std::string rel = f.get<std::string>();
      if (rel.find("iteration_") == std::string::npos) continue;
      logs.push_back(read_log_jsonl((fs::path(run_dir) / rel).string()));
    }
    append_metric_rows(rows, cfg, name, world, logs, metric_curve(cfg, logs, exec),
                       exec);
  }
  write_metrics_csv(rows, (fs::path(run_dir) / "metrics.csv").string());
}

namespace {

std::vector<MetricRow> read_metrics_csv(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<MetricRow> rows;
  size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header

    std::vector<std::string> fields;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i)
      if (i == line.size() || line[i] == ',') {
        fields.push_back(line.substr(start, i - start));
        start = i + 1;
      }
    if (fields.size() != 5)
      throw IoError(path + ": line " + std::to_string(line_no) +
                    ": expected 5 columns");
    MetricRow r;
    r.metric = fields[0];
    r.parameter = fields[1];
    r.variant = fields[2];
    r.iteration = static_cast<int32_t>(std::strtol(fields[3].c_str(), nullptr, 10));
    r.value = std::strtod(fields[4].c_str(), nullptr);
    rows.push_back(std::move(r));
  }
  return rows;
}

bool is_ranking_metric(const std::string& metric) {
  return metric == "recall" || metric == "ips_ndcg" || metric == "arp" ||
         metric == "ndcg_true" || metric == "ecs";
}

}  // namespace

std::string run_report(const std::string& run_dir, const std::string& baseline_variant,
                       const std::string& out_path) {
  const auto rows = read_metrics_csv((fs::path(run_dir) / "metrics.csv").string());

  std::vector<std::string> variants;
  for (const auto& r : rows)
    if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
      variants.push_back(r.variant);
  if (variants.empty()) throw ConfigError("metrics.csv has no rows to report on");
  const std::string baseline =
      baseline_variant.empty() ? variants.front() : baseline_variant;
  if (std::find(variants.begin(), variants.end(), baseline) == variants.end())
    throw ConfigError("baseline variant '" + baseline +
                      "' not present in metrics.csv");
  // Baseline first so its rows anchor each block.
  std::stable_partition(variants.begin(), variants.end(),
                        [&](const std::string& v) { return v == baseline; });

  // Final-iteration value per (metric, parameter, variant) for ranking
  // metrics; per-iteration series for the loop diagnostics.
  struct Key {
    std::string metric, parameter, variant;
    bool operator<(const Key& o) const {
      return std::tie(metric, parameter, variant) <
             std::tie(o.metric, o.parameter, o.variant);
    }
  };
  std::map<Key, std::pair<int32_t, double>> final_values;
  std::vector<std::pair<std::string, std::string>> ranking_order;  // metric, param
  std::vector<MetricRow> series;
  for (const auto& r : rows) {
    if (is_ranking_metric(r.metric)) {
      Key key{r.metric, r.parameter, r.variant};
      auto it = final_values.find(key);
      if (it == final_values.end() || r.iteration >= it->second.first)
        final_values[key] = {r.iteration, r.value};
      const auto label = std::make_pair(r.metric, r.parameter);
      if (std::find(ranking_order.begin(), ranking_order.end(), label) ==
          ranking_order.end())
        ranking_order.push_back(label);
    } else {
      series.push_back(r);
    }
  }

  std::vector<ReportRow> report;
  for (const auto& [metric, parameter] : ranking_order) {
    const auto base = final_values.find(Key{metric, parameter, baseline});
    for (const auto& variant : variants) {
      const auto it = final_values.find(Key{metric, parameter, variant});
      if (it == final_values.end()) continue;
      double delta = 0.0;
      if (base != final_values.end()) {
        const double b = base->second.second;
        delta = b != 0.0 ? (it->second.second - b) / std::abs(b)
                         : it->second.second - b;
      }
      report.push_back({metric, parameter, variant, it->second.second, delta});
    }
  }
  // Loop diagnostics keep their iteration in the parameter column; deltas
  // are absolute differences vs the baseline's same-iteration value.
  std::map<std::pair<std::string, int32_t>, double> base_series;
  for (const auto& r : series)
    if (r.variant == baseline) base_series[{r.metric, r.iteration}] = r.value;
  for (const auto& variant : variants)
    for (const auto& r : series) {
      if (r.variant != variant) continue;
      const auto it = base_series.find({r.metric, r.iteration});
      const double delta = it == base_series.end() ? 0.0 : r.value - it->second;
      report.push_back(
          {r.metric, std::to_string(r.iteration), r.variant, r.value, delta});
    }

  const std::string path =
      out_path.empty() ? (fs::path(run_dir) / "report.csv").string() : out_path;
  write_report_csv(report, path);
  return path;
}

SkewFitResult run_fit_skew(const std::string& log_path, const std::string& out_path) {
  const auto log = read_log_jsonl(log_path);
  int32_t n_items = 0;
  for (const auto& slate : log.slates)
    for (int32_t item : slate.items) n_items = std::max(n_items, item + 1);
  if (n_items == 0) throw IoError(log_path + ": log contains no impressions");

  const auto hist = build_histogram(log, n_items);
  if (hist.total < 1)
    throw EstimationError(log_path + ": no clicks; popularity fit is undefined");
  const auto fit = fit_exponential_mle(hist);
  if (!out_path.empty()) {
    ordered_json doc;
    doc["schema_version"] = 1;
    doc["lambda_hat"] = fit.lambda_hat;
    doc["mean_rank"] = fit.mean_rank;
    doc["n_observations"] = fit.n_observations;
    write_json_atomic(doc.dump(2) + "\n", out_path);
  }
  return {fit.lambda_hat, fit.mean_rank, fit.n_observations};
}

PropensityFit run_estimate_propensity(const std::string& log_path,
                                      const std::string& out_path, int max_iter,
                                      double tol, Exec exec) {
  const auto log = read_log_jsonl(log_path);
  EmOptions options;
  options.max_iter = max_iter;
  options.tol = tol;
  auto fit = estimate_propensity_em(log, options, exec);
  if (!out_path.empty()) write_propensity_json(fit, out_path);
  return fit;
}

}  // namespace poploop
