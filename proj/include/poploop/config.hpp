#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poploop/domain.hpp"
#include "poploop/loop_engine.hpp"
#include "poploop/rankers.hpp"

namespace poploop {

struct VariantConfig {
  std::string name;
  PolicyKind policy = PolicyKind::naive_ctr;
  PositionHyper hyper;  // consulted for position_aware only
};

struct MetricParams {
  std::vector<int32_t> k = {6};
  std::vector<double> x = {0.1};
};

// The whole experiment file. Every field has a default, so "{}" is a valid
// minimal config; unknown keys anywhere are rejected.
struct ExperimentConfig {
  int32_t n_items = 500;
  int32_t n_segments = 10;
  RelevanceSpec relevance = RelevanceSpec::exponential_tail(0.3);

  int32_t n_iterations = 3;
  int32_t sessions_per_iteration = 10000;
  int32_t slate_length = 6;
  InteractionMode mode = InteractionMode::choice_biased;
  double beta = 1.0;
  TrainWindow window = TrainWindow::previous;
  std::vector<double> traffic;  // empty = uniform

  std::vector<VariantConfig> variants = {{"naive_ctr", PolicyKind::naive_ctr, {}}};
  MetricParams metrics;
  bool estimate_propensity = false;
  std::string output_dir = "run";
  uint64_t seed = 1;

  // source_name appears in error messages.
  static ExperimentConfig from_json_text(const std::string& text,
                                         const std::string& source_name);
  // Fully resolved echo: parses back to an identical config.
  std::string to_json_text() const;

  World make_world() const;
  LoopConfig loop_for(const VariantConfig& variant) const;
  // World-independent invariants; loop_for(v).validate(world) covers the rest.
  void validate() const;
};

const char* to_string(TrainWindow window);
TrainWindow parse_train_window(const std::string& s);

}  // namespace poploop
