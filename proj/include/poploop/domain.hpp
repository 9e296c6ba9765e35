#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace poploop {

struct Catalog {
  int32_t n_items = 0;  // item ids are dense: 0..n_items-1
};

// True relevance probabilities p[segment][item], row-major.
struct RelevanceModel {
  int32_t n_segments = 0;
  int32_t n_items = 0;
  std::vector<double> p;

  std::span<const double> row(int32_t segment) const {
    return {p.data() + static_cast<size_t>(segment) * static_cast<size_t>(n_items),
            static_cast<size_t>(n_items)};
  }
  double at(int32_t segment, int32_t item) const {
    return p[static_cast<size_t>(segment) * static_cast<size_t>(n_items) +
             static_cast<size_t>(item)];
  }
};

enum class CurveKind { power_law, tabulated };

// Examination probability per 1-based display position. For the power-law
// form the value at position 1 is exactly 1, which pins the proportionality
// constant and keeps inverse-propensity weights well defined.
class PositionBiasCurve {
 public:
  static PositionBiasCurve power_law(double beta, int32_t max_position);
  static PositionBiasCurve tabulated(std::vector<double> table);

  double bias_at(int32_t position) const;  // throws std::domain_error out of range

  CurveKind kind() const { return kind_; }
  double beta() const { return beta_; }
  int32_t max_position() const { return max_position_; }
  const std::vector<double>& table() const { return table_; }

 private:
  PositionBiasCurve() = default;
  CurveKind kind_ = CurveKind::power_law;
  double beta_ = 0.0;
  int32_t max_position_ = 0;
  std::vector<double> table_;  // tabulated only, index 0 = position 1
};

struct RankedSlate {
  std::vector<int32_t> items;  // distinct ids; display position is 1-based index
};

enum class InteractionMode { choice_unbiased, choice_biased, examination };

const char* to_string(InteractionMode mode);
InteractionMode parse_interaction_mode(const std::string& s);

// One logged session. The slate lives in the owning log's slate pool
// (served slates are shared across many sessions).
struct ImpressionRecord {
  int64_t session_id = 0;
  int32_t segment = 0;
  int32_t iteration = 0;
  uint32_t slate_index = 0;
  std::vector<bool> examined;  // per slot
  std::vector<bool> clicked;   // per slot; clicked[j] implies examined[j]
};

struct LogMeta {
  int32_t iteration = 0;
  std::string ranker_id;
  uint64_t seed = 0;
  InteractionMode mode = InteractionMode::choice_unbiased;
};

struct InteractionLog {
  LogMeta meta;
  std::vector<RankedSlate> slates;
  std::vector<ImpressionRecord> records;

  const std::vector<int32_t>& slate_of(const ImpressionRecord& r) const {
    return slates[r.slate_index].items;
  }
  int32_t max_slate_length() const;
  int64_t click_count() const;
};

// Relevance generator families for synthetic worlds.
struct RelevanceSpec {
  enum class Family { constant, exponential_tail };
  Family family = Family::constant;
  double value = 0.5;  // constant: c in (0,1]; exponential_tail: scale > 0

  static RelevanceSpec constant(double c) { return {Family::constant, c}; }
  static RelevanceSpec exponential_tail(double scale) {
    return {Family::exponential_tail, scale};
  }
};

struct World {
  Catalog catalog;
  RelevanceModel relevance;
};

// Deterministic in all arguments including seed. exponential_tail draws a
// per-item base relevance from Exp(scale) clipped to [0,1], then applies a
// per-(segment,item) multiplicative jitter in [0.8, 1.2], re-clipped.
World generate_world(int32_t n_items, int32_t n_segments, const RelevanceSpec& spec,
                     uint64_t seed);

}  // namespace poploop
