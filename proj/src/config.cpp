#include "poploop/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>
#include <string>

#include <json.hpp>

#include "poploop/errors.hpp"

namespace poploop {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

size_t line_of_byte(const std::string& text, size_t byte) {
  size_t line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

// Typed, strict field access: wrong JSON types are errors, and done() rejects
// keys the schema does not know about.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void read_i32(const char* key, int32_t& into) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer())
        throw ConfigError(field(key) + ": expected an integer");
      into = v->get<int32_t>();
    }
  }

  void read_u64(const char* key, uint64_t& into) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && v->get<int64_t>() < 0 &&
                                      !v->is_number_unsigned()))
        throw ConfigError(field(key) + ": expected a nonnegative integer");
      into = v->get<uint64_t>();
    }
  }

  void read_f64(const char* key, double& into) {
    if (const json* v = find(key)) {
      if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
      into = v->get<double>();
    }
  }

  void read_bool(const char* key, bool& into) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(field(key) + ": expected a boolean");
      into = v->get<bool>();
    }
  }

  void read_str(const char* key, std::string& into) {
    if (const json* v = find(key)) {
      if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
      into = v->get<std::string>();
    }
  }

  void read_f64_array(const char* key, std::vector<double>& into) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key) + ": expected an array");
      into.clear();
      for (const auto& e : *v) {
        if (!e.is_number())
          throw ConfigError(field(key) + ": expected an array of numbers");
        into.push_back(e.get<double>());
      }
    }
  }

  void read_i32_array(const char* key, std::vector<int32_t>& into) {
    if (const json* v = find(key)) {
      if (!v->is_array()) throw ConfigError(field(key) + ": expected an array");
      into.clear();
      for (const auto& e : *v) {
        if (!e.is_number_integer())
          throw ConfigError(field(key) + ": expected an array of integers");
        into.push_back(e.get<int32_t>());
      }
    }
  }

  std::string field(const char* key) const { return where_ + "." + key; }

  void done() const {
    for (const auto& item : j_.items())
      if (seen_.find(item.key()) == seen_.end())
        throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
  }

  const json& raw() const { return j_; }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

RelevanceSpec read_relevance(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  std::string family = "exponential_tail";
  double value = 0.3;
  r.read_str("family", family);
  r.read_f64("value", value);
  r.done();
  if (family == "constant") return RelevanceSpec::constant(value);
  if (family == "exponential_tail") return RelevanceSpec::exponential_tail(value);
  throw ConfigError(where + ".family: unknown relevance family '" + family + "'");
}

VariantConfig read_variant(const json& j, const std::string& where) {
  ObjectReader r(j, where);
  VariantConfig v;
  r.read_str("name", v.name);
  std::string policy;
  r.read_str("policy", policy);
  if (v.name.empty()) throw ConfigError(where + ": variant name is required");
  if (policy.empty()) throw ConfigError(where + ": variant policy is required");
  v.policy = parse_policy_kind(policy);

  const bool tunable = v.policy == PolicyKind::position_aware;
  for (const char* key :
       {"l2_position", "learning_rate", "max_epochs", "patience", "default_position"})
    if (!tunable && r.raw().contains(key))
      throw ConfigError(where + "." + key + ": only applies to position_aware");
  r.read_f64("l2_position", v.hyper.l2_position);
  r.read_f64("learning_rate", v.hyper.learning_rate);
  r.read_i32("max_epochs", v.hyper.max_epochs);
  r.read_i32("patience", v.hyper.patience);
  r.read_i32("default_position", v.hyper.default_position);
  r.done();
  return v;
}

}  // namespace

const char* to_string(TrainWindow window) {
  return window == TrainWindow::all ? "all" : "previous";
}

TrainWindow parse_train_window(const std::string& s) {
  if (s == "previous") return TrainWindow::previous;
  if (s == "all") return TrainWindow::all;
  throw ConfigError("unknown training window '" + s + "'");
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::string& source_name) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(source_name + ": line " +
                      std::to_string(line_of_byte(text, e.byte)) +
                      ": " + e.what());
  }

  ExperimentConfig cfg;
  ObjectReader top(doc, source_name);

  if (const json* world = top.find("world")) {
    ObjectReader r(*world, source_name + ".world");
    r.read_i32("n_items", cfg.n_items);
    r.read_i32("n_segments", cfg.n_segments);
    if (const json* rel = r.find("relevance"))
      cfg.relevance = read_relevance(*rel, source_name + ".world.relevance");
    r.done();
  }

  if (const json* loop = top.find("loop")) {
    ObjectReader r(*loop, source_name + ".loop");
    r.read_i32("n_iterations", cfg.n_iterations);
    r.read_i32("sessions_per_iteration", cfg.sessions_per_iteration);
    r.read_i32("slate_length", cfg.slate_length);
    std::string mode = to_string(cfg.mode);
    r.read_str("mode", mode);
    cfg.mode = parse_interaction_mode(mode);
    r.read_f64("beta", cfg.beta);
    std::string window = to_string(cfg.window);
    r.read_str("window", window);
    cfg.window = parse_train_window(window);
    r.read_f64_array("traffic", cfg.traffic);
    r.done();
  }

  if (const json* variants = top.find("variants")) {
    if (!variants->is_array())
      throw ConfigError(source_name + ".variants: expected an array");
    cfg.variants.clear();
    size_t i = 0;
    for (const auto& v : *variants)
      cfg.variants.push_back(
          read_variant(v, source_name + ".variants[" + std::to_string(i++) + "]"));
  }

  if (const json* metrics = top.find("metrics")) {
    ObjectReader r(*metrics, source_name + ".metrics");
    r.read_i32_array("k", cfg.metrics.k);
    r.read_f64_array("x", cfg.metrics.x);
    r.done();
  }

  top.read_bool("estimate_propensity", cfg.estimate_propensity);
  top.read_str("output_dir", cfg.output_dir);
  top.read_u64("seed", cfg.seed);
  top.done();

  cfg.validate();
  return cfg;
}

std::string ExperimentConfig::to_json_text() const {
  ordered_json doc;
  doc["world"] = {{"n_items", n_items},
                  {"n_segments", n_segments},
                  {"relevance",
                   {{"family", relevance.family == RelevanceSpec::Family::constant
                                   ? "constant"
                                   : "exponential_tail"},
                    {"value", relevance.value}}}};
  doc["loop"] = {{"n_iterations", n_iterations},
                 {"sessions_per_iteration", sessions_per_iteration},
                 {"slate_length", slate_length},
                 {"mode", to_string(mode)},
                 {"beta", beta},
                 {"window", to_string(window)}};
  if (!traffic.empty()) doc["loop"]["traffic"] = traffic;
  doc["variants"] = ordered_json::array();
  for (const auto& v : variants) {
    ordered_json entry = {{"name", v.name}, {"policy", to_string(v.policy)}};
    if (v.policy == PolicyKind::position_aware) {
      entry["l2_position"] = v.hyper.l2_position;
      entry["learning_rate"] = v.hyper.learning_rate;
      entry["max_epochs"] = v.hyper.max_epochs;
      entry["patience"] = v.hyper.patience;
      entry["default_position"] = v.hyper.default_position;
    }
    doc["variants"].push_back(entry);
  }
  doc["metrics"] = {{"k", metrics.k}, {"x", metrics.x}};
  doc["estimate_propensity"] = estimate_propensity;
  doc["output_dir"] = output_dir;
  doc["seed"] = seed;
  return doc.dump(2) + "\n";
}

World ExperimentConfig::make_world() const {
  return generate_world(n_items, n_segments, relevance, seed);
}

LoopConfig ExperimentConfig::loop_for(const VariantConfig& variant) const {
  LoopConfig lc;
  lc.n_iterations = n_iterations;
  lc.sessions_per_iteration = sessions_per_iteration;
  lc.slate_length = slate_length;
  lc.mode = mode;
  lc.curve = PositionBiasCurve::power_law(beta, std::max(slate_length, 1));
  lc.policy_kind = variant.policy;
  lc.hyper = variant.hyper;
  lc.traffic = traffic;
  lc.window = window;
  lc.seed = seed;
  return lc;
}

void ExperimentConfig::validate() const {
  if (n_items < 1) throw ConfigError("world.n_items must be >= 1");
  if (n_segments < 1) throw ConfigError("world.n_segments must be >= 1");
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ConfigError("loop.beta must be finite and >= 0");
  if (variants.empty()) throw ConfigError("variants must not be empty");
  std::set<std::string> names;
  for (const auto& v : variants) {
    for (char c : v.name)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
        throw ConfigError("variant name '" + v.name +
                          "' may only use letters, digits, '_' and '-'");
    if (!names.insert(v.name).second)
      throw ConfigError("duplicate variant name '" + v.name + "'");
  }
  if (metrics.k.empty()) throw ConfigError("metrics.k must not be empty");
  for (int32_t k : metrics.k)
    if (k < 1) throw ConfigError("metrics.k entries must be >= 1");
  if (metrics.x.empty()) throw ConfigError("metrics.x must not be empty");
  for (double x : metrics.x)
    if (!(x > 0.0) || x > 1.0)
      throw ConfigError("metrics.x entries must lie in (0, 1]");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
}

}  // namespace poploop
