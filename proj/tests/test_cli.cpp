#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "poploop/config.hpp"
#include "poploop/log_io.hpp"

using namespace poploop;
namespace fs = std::filesystem;

// Drives the installed binary end to end through std::system; POPLOOP_CLI_PATH
// is injected by the build.

namespace {

fs::path scratch_root() {
  fs::path dir = fs::temp_directory_path() / "poploop_cli";
  fs::create_directories(dir);
  return dir;
}

fs::path fresh_dir(const std::string& name) {
  fs::path dir = scratch_root() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return path.string();
}

struct CmdResult {
  int code = -1;
  std::string out;
  std::string err;
};

CmdResult run_cli(const std::string& args) {
  static int counter = 0;
  fs::path out_path = scratch_root() / ("stdout_" + std::to_string(counter));
  fs::path err_path = scratch_root() / ("stderr_" + std::to_string(counter));
  ++counter;
  std::string cmd = std::string(POPLOOP_CLI_PATH) + " " + args + " >" +
                    out_path.string() + " 2>" + err_path.string();
  int rc = std::system(cmd.c_str());
  CmdResult r;
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = read_text_file(out_path.string());
  r.err = read_text_file(err_path.string());
  return r;
}

bool contains(const std::string& s, const std::string& sub) {
  return s.find(sub) != std::string::npos;
}

const char* kConfig = R"({
  "world": {"n_items": 12, "n_segments": 3},
  "loop": {"n_iterations": 2, "sessions_per_iteration": 400, "slate_length": 4},
  "variants": [{"name": "naive", "policy": "naive_ctr"},
               {"name": "aware", "policy": "position_aware", "max_epochs": 60}],
  "metrics": {"k": [3], "x": [0.5]},
  "seed": 5
})";

struct BaseRun {
  std::string cfg;
  std::string dir;
  CmdResult result;
};

// One shared simulate run; later cases treat it as read-only except where noted.
const BaseRun& base_run() {
  static BaseRun base = [] {
    BaseRun b;
    b.cfg = write_file(scratch_root() / "cfg.json", kConfig);
    b.dir = fresh_dir("base").string();
    b.result = run_cli("simulate --config " + b.cfg + " --out " + b.dir);
    return b;
  }();
  return base;
}

std::string base_metrics() {
  return read_text_file((fs::path(base_run().dir) / "metrics.csv").string());
}

}  // namespace

TEST_CASE("cli simulate writes a run directory with logs, metrics and manifest") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  CHECK(contains(b.result.out, "variant naive"));
  CHECK(contains(b.result.out, "lambda"));

  fs::path dir(b.dir);
  for (const char* variant : {"naive", "aware"})
    for (int t = 0; t <= 2; ++t)
      CHECK(fs::exists(dir / variant / ("iteration_" + std::to_string(t) + ".jsonl")));
  CHECK(fs::exists(dir / "metrics.csv"));
  REQUIRE(fs::exists(dir / "manifest.json"));

  auto doc = nlohmann::json::parse(read_text_file((dir / "manifest.json").string()));
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["tool_version"] == kToolVersion);
  REQUIRE(doc["variants"].size() == 2);
  CHECK(doc["variants"][0]["name"] == "naive");
  CHECK(doc["variants"][0]["aborted"] == false);
  CHECK(doc["variants"][0]["iterations"].size() == 3);
  bool lists_log = false;
  for (const auto& f : doc["variants"][0]["files"])
    if (f.get<std::string>() == "naive/iteration_0.jsonl") lists_log = true;
  CHECK(lists_log);

  // The embedded config is a valid, fully resolved experiment file.
  auto echoed =
      ExperimentConfig::from_json_text(doc["config"].dump(), "manifest");
  CHECK(echoed.n_items == 12);
  CHECK(echoed.seed == 5);
  CHECK(echoed.output_dir == b.dir);
}

TEST_CASE("cli simulate output is byte-identical across thread counts") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  std::string dir1 = fresh_dir("t1").string();
  std::string dir2 = fresh_dir("t2").string();
  CHECK(run_cli("simulate --config " + b.cfg + " --out " + dir1 + " --threads 1").code == 0);
  CHECK(run_cli("simulate --config " + b.cfg + " --out " + dir2 + " --threads 2").code == 0);

  std::string m1 = read_text_file(dir1 + "/metrics.csv");
  std::string m2 = read_text_file(dir2 + "/metrics.csv");
  CHECK(m1 == m2);
  CHECK(m1 == base_metrics());
  CHECK(read_text_file(dir1 + "/naive/iteration_1.jsonl") ==
        read_text_file(dir2 + "/naive/iteration_1.jsonl"));
}

TEST_CASE("cli evaluate reproduces metrics.csv byte for byte") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  std::string before = base_metrics();
  auto r = run_cli("evaluate " + b.dir + " --threads 2");
  CHECK(r.code == 0);
  CHECK(base_metrics() == before);
}

TEST_CASE("cli seed override changes results and matching seed reproduces them") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  std::string other = fresh_dir("seed6").string();
  std::string same = fresh_dir("seed5").string();
  CHECK(run_cli("simulate --config " + b.cfg + " --out " + other + " --seed 6").code == 0);
  CHECK(run_cli("simulate --config " + b.cfg + " --out " + same + " --seed 5").code == 0);
  CHECK(read_text_file(other + "/metrics.csv") != base_metrics());
  CHECK(read_text_file(same + "/metrics.csv") == base_metrics());
}

TEST_CASE("cli variant filter runs a single arm") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  std::string dir = fresh_dir("only_naive").string();
  auto r = run_cli("simulate --config " + b.cfg + " --out " + dir + " --variant naive");
  CHECK(r.code == 0);
  CHECK(fs::exists(fs::path(dir) / "naive" / "iteration_0.jsonl"));
  CHECK_FALSE(fs::exists(fs::path(dir) / "aware"));
  std::string metrics = read_text_file(dir + "/metrics.csv");
  CHECK(contains(metrics, ",naive,"));
  CHECK_FALSE(contains(metrics, ",aware,"));
  auto doc = nlohmann::json::parse(read_text_file(dir + "/manifest.json"));
  CHECK(doc["variants"].size() == 1);
}

namespace {

// Returns the delta column of the first report row starting with `prefix`.
std::string report_delta(const std::string& report, const std::string& prefix) {
  size_t pos = report.find("\n" + prefix);
  if (pos == std::string::npos) return "<row not found>";
  size_t end = report.find('\n', pos + 1);
  std::string row = report.substr(pos + 1, end - pos - 1);
  return row.substr(row.rfind(',') + 1);
}

}  // namespace

TEST_CASE("cli report emits baseline-relative deltas") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  auto r = run_cli("report " + b.dir);
  REQUIRE(r.code == 0);
  std::string path = (fs::path(b.dir) / "report.csv").string();
  CHECK(contains(r.out, "report.csv"));
  std::string report = read_text_file(path);
  CHECK(contains(report, "metric,parameter,variant,value,delta_vs_baseline\n"));
  CHECK(report_delta(report, "recall,3,naive,") == "0");
  CHECK(report_delta(report, "recall,3,aware,") != "<row not found>");

  std::string alt = (fs::path(b.dir) / "report_aware.csv").string();
  auto r2 = run_cli("report " + b.dir + " --variant aware --out " + alt);
  REQUIRE(r2.code == 0);
  CHECK(report_delta(read_text_file(alt), "recall,3,aware,") == "0");

  CHECK(run_cli("report " + b.dir + " --variant nope").code == 2);
}

TEST_CASE("cli fit-skew and estimate-propensity summarize a log") {
  const BaseRun& b = base_run();
  REQUIRE(b.result.code == 0);
  std::string log = (fs::path(b.dir) / "naive" / "iteration_1.jsonl").string();

  std::string skew_json = (scratch_root() / "skew.json").string();
  auto r = run_cli("fit-skew " + log + " --out " + skew_json);
  CHECK(r.code == 0);
  CHECK(contains(r.out, "lambda_hat"));
  auto skew = nlohmann::json::parse(read_text_file(skew_json));
  CHECK(skew["lambda_hat"].is_number());
  CHECK(skew["mean_rank"].get<double>() >= 1.0);
  CHECK(skew["n_observations"].get<int64_t>() > 0);

  std::string prop_json = (scratch_root() / "prop.json").string();
  auto r2 = run_cli("estimate-propensity " + log + " --out " + prop_json +
                    " --max-iter 50");
  CHECK(r2.code == 0);
  CHECK(contains(r2.out, "beta_hat"));
  auto prop = nlohmann::json::parse(read_text_file(prop_json));
  CHECK(prop["curve_table"].size() == 4);
  CHECK(prop["curve_table"][0].get<double>() == 1.0);
}

TEST_CASE("cli exit codes distinguish config errors from runtime failures") {
  const BaseRun& b = base_run();
  fs::path dir = fresh_dir("errors");

  auto missing = run_cli("simulate --config " + (dir / "nope.json").string());
  CHECK(missing.code == 2);
  CHECK(contains(missing.err, "config error"));

  auto broken = run_cli("simulate --config " +
                        write_file(dir / "broken.json", "{ nope"));
  CHECK(broken.code == 2);
  CHECK(contains(broken.err, "line 1"));

  auto invalid = run_cli(
      "simulate --config " +
      write_file(dir / "invalid.json",
                 "{\"world\": {\"n_items\": 10}, \"loop\": {\"slate_length\": 99}}"));
  CHECK(invalid.code == 2);
  CHECK(contains(invalid.err, "slate_length"));

  auto unknown = run_cli("simulate --config " +
                         write_file(dir / "unknown.json", "{\"slates\": 4}"));
  CHECK(unknown.code == 2);
  CHECK(contains(unknown.err, "unknown key 'slates'"));

  CHECK(run_cli("").code == 2);                                   // no subcommand
  CHECK(run_cli("simulate --config " + b.cfg + " --bogus").code == 2);

  auto bad_log = run_cli(
      "estimate-propensity " +
      write_file(dir / "bad.jsonl",
                 "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[1],"
                 "\"examined\":[true],\"clicked\":[false]}\n{oops\n"));
  CHECK(bad_log.code == 1);
  CHECK(contains(bad_log.err, "line 2"));

  CHECK(run_cli("fit-skew " + (dir / "nope.jsonl").string()).code == 1);
  CHECK(run_cli("evaluate " + (dir / "no_run").string()).code == 1);
  CHECK(run_cli("report " + (dir / "no_run").string()).code == 1);
}
