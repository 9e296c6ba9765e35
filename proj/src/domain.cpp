#include "poploop/domain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "poploop/errors.hpp"
#include "poploop/rng.hpp"

namespace poploop {

PositionBiasCurve PositionBiasCurve::power_law(double beta, int32_t max_position) {
  if (!(beta >= 0.0) || !std::isfinite(beta))
    throw ConfigError("position bias curve: beta must be a nonnegative finite number");
  if (max_position < 1)
    throw ConfigError("position bias curve: max_position must be >= 1");
  PositionBiasCurve c;
  c.kind_ = CurveKind::power_law;
  c.beta_ = beta;
  c.max_position_ = max_position;
  return c;
}

PositionBiasCurve PositionBiasCurve::tabulated(std::vector<double> table) {
  if (table.empty()) throw ConfigError("position bias curve: table must be non-empty");
  for (size_t i = 0; i < table.size(); ++i) {
    if (!(table[i] > 0.0) || table[i] > 1.0)
      throw ConfigError("position bias curve: table values must lie in (0,1]");
    if (i > 0 && table[i] > table[i - 1])
      throw ConfigError("position bias curve: table values must be nonincreasing");
  }
  PositionBiasCurve c;
  c.kind_ = CurveKind::tabulated;
  c.max_position_ = static_cast<int32_t>(table.size());
  c.table_ = std::move(table);
  return c;
}

double PositionBiasCurve::bias_at(int32_t position) const {
  if (position < 1 || position > max_position_)
    throw std::domain_error("bias_at: position " + std::to_string(position) +
                            " outside [1, " + std::to_string(max_position_) + "]");
  if (kind_ == CurveKind::tabulated) return table_[static_cast<size_t>(position - 1)];
  return std::pow(static_cast<double>(position), -beta_);
}

const char* to_string(InteractionMode mode) {
  switch (mode) {
    case InteractionMode::choice_unbiased: return "choice_unbiased";
    case InteractionMode::choice_biased: return "choice_biased";
    case InteractionMode::examination: return "examination";
  }
  return "?";
}

InteractionMode parse_interaction_mode(const std::string& s) {
  if (s == "choice_unbiased") return InteractionMode::choice_unbiased;
  if (s == "choice_biased") return InteractionMode::choice_biased;
  if (s == "examination") return InteractionMode::examination;
  throw ConfigError("unknown interaction mode '" + s +
                    "' (expected choice_unbiased, choice_biased or examination)");
}

int32_t InteractionLog::max_slate_length() const {
  size_t m = 0;
  for (const auto& s : slates) m = std::max(m, s.items.size());
  return static_cast<int32_t>(m);
}

int64_t InteractionLog::click_count() const {
  int64_t n = 0;
  for (const auto& r : records)
    for (bool c : r.clicked) n += c ? 1 : 0;
  return n;
}

World generate_world(int32_t n_items, int32_t n_segments, const RelevanceSpec& spec,
                     uint64_t seed) {
  if (n_items < 2) throw ConfigError("generate_world: n_items must be >= 2");
  if (n_segments < 1) throw ConfigError("generate_world: n_segments must be >= 1");

  World w;
  w.catalog.n_items = n_items;
  w.relevance.n_segments = n_segments;
  w.relevance.n_items = n_items;
  w.relevance.p.assign(static_cast<size_t>(n_segments) * static_cast<size_t>(n_items),
                       0.0);

  auto clip01 = [](double x) { return std::clamp(x, 0.0, 1.0); };

  switch (spec.family) {
    case RelevanceSpec::Family::constant: {
      if (!(spec.value > 0.0) || spec.value > 1.0)
        throw ConfigError("generate_world: constant relevance must lie in (0,1]");
      std::fill(w.relevance.p.begin(), w.relevance.p.end(), spec.value);
      break;
    }
    case RelevanceSpec::Family::exponential_tail: {
      if (!(spec.value > 0.0) || !std::isfinite(spec.value))
        throw ConfigError("generate_world: exponential_tail scale must be positive");
      // Base per-item relevance, then independent per-(segment,item) jitter.
      // Draw order is fixed so the matrix is a pure function of the seed.
      Rng base_rng(derive_stream(seed, 0x8a5e));
      std::vector<double> base(static_cast<size_t>(n_items));
      for (auto& b : base) b = clip01(base_rng.exponential(spec.value));
      Rng jitter_rng(derive_stream(seed, 0x71e7));
      for (int32_t u = 0; u < n_segments; ++u)
        for (int32_t i = 0; i < n_items; ++i) {
          double j = jitter_rng.uniform(0.8, 1.2);
          w.relevance.p[static_cast<size_t>(u) * n_items + i] =
              clip01(base[static_cast<size_t>(i)] * j);
        }
      break;
    }
  }

  // Guard the "some interaction is possible" invariant for every segment.
  for (int32_t u = 0; u < n_segments; ++u) {
    auto row = w.relevance.row(u);
    if (std::all_of(row.begin(), row.end(), [](double v) { return v <= 0.0; }))
      throw ConfigError("generate_world: segment " + std::to_string(u) +
                        " has all-zero relevance");
  }
  return w;
}

}  // namespace poploop
