#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "poploop/config.hpp"
#include "poploop/errors.hpp"
#include "poploop/log_io.hpp"
#include "poploop/loop_engine.hpp"

using namespace poploop;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
  fs::path dir = fs::temp_directory_path() / "poploop_io";
  fs::create_directories(dir);
  return dir;
}

std::string write_temp(const std::string& name, const std::string& text) {
  std::string path = (test_dir() / name).string();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return path;
}

void expect_read_error(const std::string& text, const std::string& needle) {
  std::string path = write_temp("bad.jsonl", text);
  try {
    read_log_jsonl(path);
    FAIL_CHECK("expected IoError containing: " << needle);
  } catch (const IoError& e) {
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                  "message was: " << e.what());
  }
}

void expect_config_error(const std::string& text, const std::string& needle) {
  try {
    ExperimentConfig::from_json_text(text, "cfg");
    FAIL_CHECK("expected ConfigError containing: " << needle);
  } catch (const ConfigError& e) {
    CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos,
                  "message was: " << e.what());
  }
}

const char* kRecordLine =
    "{\"session_id\":12,\"iteration\":3,\"segment\":1,\"items\":[4,7,2],"
    "\"examined\":[true,true,false],\"clicked\":[false,true,false]}";

}  // namespace

TEST_CASE("jsonl writer emits one record per line in a fixed field order") {
  InteractionLog log;
  log.slates.push_back({{4, 7, 2}});
  ImpressionRecord rec;
  rec.session_id = 12;
  rec.segment = 1;
  rec.iteration = 3;
  rec.slate_index = 0;
  rec.examined = {true, true, false};
  rec.clicked = {false, true, false};
  log.records.push_back(rec);

  std::string path = (test_dir() / "one.jsonl").string();
  write_log_jsonl(log, path);
  CHECK(read_text_file(path) == std::string(kRecordLine) + "\n");
}

TEST_CASE("jsonl round trip preserves records, slates and the iteration tag") {
  World world = generate_world(20, 3, RelevanceSpec::exponential_tail(0.3), 5);
  auto curve = PositionBiasCurve::power_law(1.0, 4);
  for (InteractionMode mode : {InteractionMode::choice_biased, InteractionMode::examination}) {
    InteractionLog log =
        random_slate_log(world, curve, mode, 4, 300, {}, 7, /*iteration=*/2);
    std::string path = (test_dir() / "trip.jsonl").string();
    write_log_jsonl(log, path);
    InteractionLog back = read_log_jsonl(path);

    REQUIRE(back.records.size() == log.records.size());
    CHECK(back.meta.iteration == 2);
    for (size_t i = 0; i < log.records.size(); ++i) {
      const auto& a = log.records[i];
      const auto& b = back.records[i];
      CHECK(b.session_id == a.session_id);
      CHECK(b.segment == a.segment);
      CHECK(b.iteration == a.iteration);
      CHECK(b.examined == a.examined);
      CHECK(b.clicked == a.clicked);
      CHECK(back.slate_of(b) == log.slate_of(a));
    }
  }
}

TEST_CASE("jsonl reader skips blank lines but keeps their numbering") {
  std::string path = write_temp(
      "blanks.jsonl", std::string(kRecordLine) + "\n\n" + kRecordLine + "\n");
  InteractionLog log = read_log_jsonl(path);
  CHECK(log.records.size() == 2);

  expect_read_error("\n\n{oops\n", "line 3");
}

TEST_CASE("jsonl reader reports the offending line and reason") {
  std::string good = kRecordLine;

  expect_read_error(good + "\n{broken\n", "line 2");
  expect_read_error("[1,2]\n", "expected a JSON object");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[1],"
      "\"examined\":[true]}\n",
      "missing field 'clicked'");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[1],"
      "\"examined\":[true],\"clicked\":[false],\"extra\":1}\n",
      "unexpected extra fields");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":\"a\",\"items\":[1],"
      "\"examined\":[true],\"clicked\":[false]}\n",
      "line 1");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":-1,\"items\":[1],"
      "\"examined\":[true],\"clicked\":[false]}\n",
      "segment must be >= 0");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[],"
      "\"examined\":[],\"clicked\":[]}\n",
      "items must be non-empty");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[-2],"
      "\"examined\":[true],\"clicked\":[false]}\n",
      "item ids must be >= 0");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[1,2],"
      "\"examined\":[true],\"clicked\":[false,false]}\n",
      "length must match items");
  expect_read_error(
      "{\"session_id\":1,\"iteration\":0,\"segment\":0,\"items\":[1],"
      "\"examined\":[false],\"clicked\":[true]}\n",
      "clicked implies examined");

  CHECK_THROWS_AS(read_log_jsonl((test_dir() / "nope.jsonl").string()), IoError);
}

TEST_CASE("metrics csv renders values with full double precision") {
  std::vector<MetricRow> rows = {{"clicks", "", "naive", 0, 12345.0},
                                 {"lambda", "", "naive", 1, 0.1}};
  std::string path = (test_dir() / "metrics.csv").string();
  write_metrics_csv(rows, path);
  CHECK(read_text_file(path) ==
        "metric,parameter,variant,iteration,value\n"
        "clicks,,naive,0,12345\n"
        "lambda,,naive,1,0.10000000000000001\n");
}

TEST_CASE("report csv layout") {
  std::vector<ReportRow> rows = {{"recall", "k=6", "debias", 0.5, -0.125}};
  std::string path = (test_dir() / "report.csv").string();
  write_report_csv(rows, path);
  CHECK(read_text_file(path) ==
        "metric,parameter,variant,value,delta_vs_baseline\n"
        "recall,k=6,debias,0.5,-0.125\n");
}

TEST_CASE("atomic json write leaves content in place and no temp file") {
  std::string path = (test_dir() / "doc.json").string();
  write_json_atomic("{\"a\":1}\n", path);
  CHECK(read_text_file(path) == "{\"a\":1}\n");
  CHECK_FALSE(fs::exists(path + ".tmp"));
}

TEST_CASE("propensity json round trips through a json parser") {
  PropensityFit fit;
  fit.curve_table = {1.0, 0.5, 0.25};
  fit.beta_hat = 1.0;
  fit.em_iterations_used = 7;
  fit.converged = true;
  fit.log_likelihood_trace = {-10.0, -9.5};

  std::string path = (test_dir() / "prop.json").string();
  write_propensity_json(fit, path);
  auto doc = nlohmann::json::parse(read_text_file(path));
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["curve_table"].get<std::vector<double>>() == fit.curve_table);
  CHECK(doc["beta_hat"].get<double>() == 1.0);
  CHECK(doc["em_iterations_used"] == 7);
  CHECK(doc["converged"] == true);
  CHECK(doc["log_likelihood_trace"].get<std::vector<double>>() ==
        fit.log_likelihood_trace);
}

TEST_CASE("empty config text yields the documented defaults") {
  auto cfg = ExperimentConfig::from_json_text("{}", "cfg");
  CHECK(cfg.n_items == 500);
  CHECK(cfg.n_segments == 10);
  CHECK(cfg.relevance.family == RelevanceSpec::Family::exponential_tail);
  CHECK(cfg.relevance.value == doctest::Approx(0.3));
  CHECK(cfg.n_iterations == 3);
  CHECK(cfg.sessions_per_iteration == 10000);
  CHECK(cfg.slate_length == 6);
  CHECK(cfg.mode == InteractionMode::choice_biased);
  CHECK(cfg.beta == 1.0);
  CHECK(cfg.window == TrainWindow::previous);
  CHECK(cfg.traffic.empty());
  REQUIRE(cfg.variants.size() == 1);
  CHECK(cfg.variants[0].name == "naive_ctr");
  CHECK(cfg.variants[0].policy == PolicyKind::naive_ctr);
  CHECK(cfg.metrics.k == std::vector<int32_t>{6});
  CHECK(cfg.metrics.x == std::vector<double>{0.1});
  CHECK_FALSE(cfg.estimate_propensity);
  CHECK(cfg.output_dir == "run");
  CHECK(cfg.seed == 1);
}

namespace {

const char* kFullConfig = R"({
  "world": {"n_items": 40, "n_segments": 4,
            "relevance": {"family": "constant", "value": 0.2}},
  "loop": {"n_iterations": 2, "sessions_per_iteration": 500, "slate_length": 5,
           "mode": "examination", "beta": 0.7, "window": "all",
           "traffic": [0.4, 0.3, 0.2, 0.1]},
  "variants": [{"name": "tables", "policy": "ipw_ctr"},
               {"name": "aware", "policy": "position_aware", "l2_position": 0.01,
                "learning_rate": 0.2, "max_epochs": 30, "patience": 5,
                "default_position": 3}],
  "metrics": {"k": [1, 5], "x": [0.2, 1.0]},
  "estimate_propensity": true,
  "output_dir": "out",
  "seed": 77
})";

}  // namespace

TEST_CASE("config parses every section and echoes itself stably") {
  auto cfg = ExperimentConfig::from_json_text(kFullConfig, "cfg");
  CHECK(cfg.n_items == 40);
  CHECK(cfg.relevance.family == RelevanceSpec::Family::constant);
  CHECK(cfg.mode == InteractionMode::examination);
  CHECK(cfg.window == TrainWindow::all);
  CHECK(cfg.traffic.size() == 4);
  REQUIRE(cfg.variants.size() == 2);
  CHECK(cfg.variants[1].policy == PolicyKind::position_aware);
  CHECK(cfg.variants[1].hyper.l2_position == doctest::Approx(0.01));
  CHECK(cfg.variants[1].hyper.default_position == 3);
  CHECK(cfg.estimate_propensity);
  CHECK(cfg.seed == 77);

  // The resolved echo must parse back to a config that echoes identically.
  std::string echo = cfg.to_json_text();
  auto cfg2 = ExperimentConfig::from_json_text(echo, "echo");
  CHECK(cfg2.to_json_text() == echo);
}

TEST_CASE("config wires the loop and world constructors") {
  auto cfg = ExperimentConfig::from_json_text(kFullConfig, "cfg");
  LoopConfig lc = cfg.loop_for(cfg.variants[1]);
  CHECK(lc.n_iterations == 2);
  CHECK(lc.sessions_per_iteration == 500);
  CHECK(lc.slate_length == 5);
  CHECK(lc.mode == InteractionMode::examination);
  CHECK(lc.curve.bias_at(1) == doctest::Approx(1.0));
  CHECK(lc.curve.bias_at(2) == doctest::Approx(std::pow(2.0, -0.7)));
  CHECK(lc.policy_kind == PolicyKind::position_aware);
  CHECK(lc.hyper.max_epochs == 30);
  CHECK(lc.window == TrainWindow::all);
  CHECK(lc.traffic == cfg.traffic);
  CHECK(lc.seed == 77);

  World a = cfg.make_world();
  World b = cfg.make_world();
  CHECK(a.catalog.n_items == 40);
  CHECK(a.relevance.n_segments == 4);
  CHECK(a.relevance.p == b.relevance.p);
}

TEST_CASE("config parser rejects unknown keys naming their path") {
  expect_config_error("{\"bogus\": 1}", "cfg: unknown key 'bogus'");
  expect_config_error("{\"loop\": {\"slate_len\": 5}}",
                      "cfg.loop: unknown key 'slate_len'");
  expect_config_error("{\"world\": {\"relevance\": {\"shape\": 1}}}",
                      "cfg.world.relevance: unknown key 'shape'");
  expect_config_error("{\"variants\": [{\"name\": \"a\", \"policy\": \"naive_ctr\","
                      " \"foo\": 1}]}",
                      "cfg.variants[0]: unknown key 'foo'");
}

TEST_CASE("config parser reports line numbers for malformed json") {
  expect_config_error("{\n  \"world\": ,\n}", "cfg: line 2");
}

TEST_CASE("config parser enforces field types and enum values") {
  expect_config_error("{\"world\": {\"n_items\": \"many\"}}",
                      "cfg.world.n_items: expected an integer");
  expect_config_error("{\"seed\": -4}", "nonnegative");
  expect_config_error("{\"loop\": {\"mode\": \"psychic\"}}",
                      "unknown interaction mode");
  expect_config_error("{\"loop\": {\"window\": \"sliding\"}}",
                      "unknown training window");
  expect_config_error("{\"world\": {\"relevance\": {\"family\": \"zipf\"}}}",
                      "unknown relevance family");
  expect_config_error("{\"variants\": [{\"name\": \"a\", \"policy\": \"magic\"}]}",
                      "unknown policy kind");
  expect_config_error("{\"variants\": \"nope\"}", "expected an array");
}

TEST_CASE("variant hyperparameters only apply to the position-aware policy") {
  expect_config_error(
      "{\"variants\": [{\"name\": \"a\", \"policy\": \"naive_ctr\","
      " \"l2_position\": 0.1}]}",
      "only applies to position_aware");
  expect_config_error("{\"variants\": [{\"policy\": \"naive_ctr\"}]}",
                      "variant name is required");
  expect_config_error("{\"variants\": [{\"name\": \"a\"}]}",
                      "variant policy is required");
}

TEST_CASE("config validation catches bad values") {
  expect_config_error("{\"loop\": {\"beta\": -1}}", "must be finite and >= 0");
  expect_config_error("{\"variants\": []}", "variants must not be empty");
  expect_config_error(
      "{\"variants\": [{\"name\": \"a\", \"policy\": \"naive_ctr\"},"
      " {\"name\": \"a\", \"policy\": \"popularity\"}]}",
      "duplicate variant name");
  expect_config_error("{\"variants\": [{\"name\": \"a b\", \"policy\": \"naive_ctr\"}]}",
                      "may only use letters");
  expect_config_error("{\"metrics\": {\"k\": []}}", "metrics.k must not be empty");
  expect_config_error("{\"metrics\": {\"k\": [0]}}", "must be >= 1");
  expect_config_error("{\"metrics\": {\"x\": [1.5]}}", "(0, 1]");
  expect_config_error("{\"output_dir\": \"\"}", "output_dir must not be empty");
}
