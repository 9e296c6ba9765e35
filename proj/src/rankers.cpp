#include "poploop/rankers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "poploop/errors.hpp"
#include "poploop/rng.hpp"

namespace poploop {

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// log(1 + e^z) without overflow for large |z|.
double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Shared accumulation for the click-through estimators. bias_of(position)
// returns 1 for the naive estimator and the examination probability for the
// inverse-propensity one, so the two differ only in the click weight.
template <class BiasOf>
CtrTable accumulate_ctr(std::span<const InteractionLog> logs, int32_t n_segments,
                        int32_t n_items, BiasOf&& bias_of) {
  CtrTable t;
  t.n_segments = n_segments;
  t.n_items = n_items;
  const size_t cells = static_cast<size_t>(n_segments) * static_cast<size_t>(n_items);
  t.clicks_weighted.assign(cells, 0.0);
  t.impressions.assign(cells, 0);
  double total_clicks_weighted = 0.0;
  int64_t total_impressions = 0;

  for (const auto& log : logs) {
    for (const auto& rec : log.records) {
      const auto& items = log.slate_of(rec);
      for (size_t j = 0; j < items.size(); ++j) {
        const size_t cell = static_cast<size_t>(rec.segment) * n_items +
                            static_cast<size_t>(items[j]);
        ++t.impressions[cell];
        ++total_impressions;
        if (rec.clicked[j]) {
          const double w = 1.0 / bias_of(static_cast<int32_t>(j) + 1);
          t.clicks_weighted[cell] += w;
          total_clicks_weighted += w;
        }
      }
    }
  }

  t.global_prior = std::clamp(
      (total_clicks_weighted + 1.0) / (static_cast<double>(total_impressions) + 2.0),
      0.0, 1.0);
  t.estimate.assign(cells, t.global_prior);
  for (size_t c = 0; c < cells; ++c)
    if (t.impressions[c] > 0)
      t.estimate[c] = std::clamp(
          t.clicks_weighted[c] / static_cast<double>(t.impressions[c]), 0.0, 1.0);
  return t;
}

void require_nonempty(std::span<const InteractionLog> logs, const char* who) {
  for (const auto& log : logs)
    if (!log.records.empty()) return;
  throw ConfigError(std::string(who) + ": no interaction records to train on");
}

}  // namespace

const char* to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::popularity: return "popularity";
    case PolicyKind::naive_ctr: return "naive_ctr";
    case PolicyKind::ipw_ctr: return "ipw_ctr";
    case PolicyKind::position_aware: return "position_aware";
  }
  return "?";
}

PolicyKind parse_policy_kind(const std::string& s) {
  if (s == "popularity") return PolicyKind::popularity;
  if (s == "naive_ctr") return PolicyKind::naive_ctr;
  if (s == "ipw_ctr") return PolicyKind::ipw_ctr;
  if (s == "position_aware") return PolicyKind::position_aware;
  throw ConfigError("unknown policy kind '" + s + "'");
}

double RankerPolicy::score(int32_t segment, int32_t item) const {
  switch (kind) {
    case PolicyKind::popularity:
      return popularity_scores[static_cast<size_t>(item)];
    case PolicyKind::naive_ctr:
    case PolicyKind::ipw_ctr:
      return ctr.at(segment, item);
    case PolicyKind::position_aware:
      return sigmoid(model.logit_at(segment, item) +
                     model.position_weights[static_cast<size_t>(
                         model.hyper.default_position - 1)]);
  }
  return 0.0;
}

RankerPolicy train_popularity(std::span<const InteractionLog> logs, int32_t n_items) {
  require_nonempty(logs, "train_popularity");
  RankerPolicy p;
  p.kind = PolicyKind::popularity;
  p.popularity_scores.assign(static_cast<size_t>(n_items), 0.0);
  for (const auto& log : logs)
    for (const auto& rec : log.records) {
      const auto& items = log.slate_of(rec);
      for (size_t j = 0; j < items.size(); ++j)
        if (rec.clicked[j])
          p.popularity_scores[static_cast<size_t>(items[j])] += 1.0;
    }
  return p;
}

RankerPolicy train_naive_ctr(std::span<const InteractionLog> logs, int32_t n_segments,
                             int32_t n_items) {
  require_nonempty(logs, "train_naive_ctr");
  RankerPolicy p;
  p.kind = PolicyKind::naive_ctr;
  p.ctr = accumulate_ctr(logs, n_segments, n_items, [](int32_t) { return 1.0; });
  return p;
}

RankerPolicy train_ipw_ctr(std::span<const InteractionLog> logs,
                           const PositionBiasCurve& curve, int32_t n_segments,
                           int32_t n_items) {
  require_nonempty(logs, "train_ipw_ctr");
  RankerPolicy p;
  p.kind = PolicyKind::ipw_ctr;
  p.ctr = accumulate_ctr(logs, n_segments, n_items,
                         [&curve](int32_t pos) { return curve.bias_at(pos); });
  return p;
}

RankerPolicy train_position_aware(std::span<const InteractionLog> logs,
                                  int32_t n_segments, int32_t n_items,
                                  int32_t max_position, const PositionHyper& hyper,
                                  uint64_t seed) {
  require_nonempty(logs, "train_position_aware");
  if (!(hyper.learning_rate > 0.0) || !std::isfinite(hyper.learning_rate))
    throw ConfigError("position-aware training: learning_rate must be positive");
  if (!(hyper.l2_position >= 0.0) || !std::isfinite(hyper.l2_position))
    throw ConfigError("position-aware training: l2_position must be nonnegative");
  if (hyper.max_epochs < 1 || hyper.patience < 1)
    throw ConfigError("position-aware training: max_epochs and patience must be >= 1");
  if (hyper.default_position < 1 || hyper.default_position > max_position)
    throw ConfigError("position-aware training: default_position outside the curve");

  // One training example per shown slot, aggregated by (segment, item,
  // position) since the model's score is constant within such a group.
  struct Group {
    size_t cell;       // segment * n_items + item
    int32_t pos0;      // position - 1
    double n;          // examples
    double c;          // clicks
  };
  const size_t cells = static_cast<size_t>(n_segments) * static_cast<size_t>(n_items);
  const size_t slots = cells * static_cast<size_t>(max_position);
  std::vector<double> n_train(slots, 0.0), c_train(slots, 0.0);
  std::vector<double> n_val(slots, 0.0), c_val(slots, 0.0);
  const uint64_t split_salt = mix64(seed ^ 0x5eed5a17ULL);

  for (const auto& log : logs)
    for (const auto& rec : log.records) {
      const bool is_val =
          mix64(static_cast<uint64_t>(rec.session_id) ^ split_salt) % 10 == 0;
      auto& ns = is_val ? n_val : n_train;
      auto& cs = is_val ? c_val : c_train;
      const auto& items = log.slate_of(rec);
      for (size_t j = 0; j < items.size(); ++j) {
        const size_t slot = (static_cast<size_t>(rec.segment) * n_items +
                             static_cast<size_t>(items[j])) *
                                static_cast<size_t>(max_position) +
                            j;
        ns[slot] += 1.0;
        cs[slot] += rec.clicked[j] ? 1.0 : 0.0;
      }
    }

  auto collect = [&](const std::vector<double>& ns, const std::vector<double>& cs) {
    std::vector<Group> groups;
    for (size_t s = 0; s < slots; ++s)
      if (ns[s] > 0.0)
        groups.push_back({s / static_cast<size_t>(max_position),
                          static_cast<int32_t>(s % static_cast<size_t>(max_position)),
                          ns[s], cs[s]});
    return groups;
  };
  const std::vector<Group> train_groups = collect(n_train, c_train);
  const std::vector<Group> val_groups = collect(n_val, c_val);
  if (train_groups.empty())
    throw ConfigError("position-aware training: empty training split");
  if (val_groups.empty())
    throw ConfigError("position-aware training: empty validation split");
  double total_train = 0.0, total_val = 0.0;
  for (const auto& g : train_groups) total_train += g.n;
  for (const auto& g : val_groups) total_val += g.n;

  RankerPolicy p;
  p.kind = PolicyKind::position_aware;
  auto& m = p.model;
  m.n_segments = n_segments;
  m.n_items = n_items;
  m.max_position = max_position;
  m.hyper = hyper;
  m.logits.assign(cells, 0.0);
  m.position_weights.assign(static_cast<size_t>(max_position), 0.0);

  auto loss_on = [&](const std::vector<Group>& groups, double total) {
    double loss = 0.0;
    for (const auto& g : groups) {
      const double z =
          m.logits[g.cell] + m.position_weights[static_cast<size_t>(g.pos0)];
      loss += g.n * softplus(z) - g.c * z;
    }
    return loss / total;
  };

  std::vector<double> grad_a(cells), grad_g(static_cast<size_t>(max_position));
  std::vector<double> best_a = m.logits, best_g = m.position_weights;
  double best_val = std::numeric_limits<double>::infinity();
  int32_t since_best = 0;
  const double lr = hyper.learning_rate;

  auto fail = [&](int32_t epoch) {
    char msg[160];
    std::snprintf(msg, sizeof msg,
                  "position-aware training diverged at epoch %d "
                  "(learning rate %g): non-finite loss or parameters",
                  epoch, lr);
    throw TrainingError(msg);
  };

  for (int32_t epoch = 0; epoch < hyper.max_epochs; ++epoch) {
    std::fill(grad_a.begin(), grad_a.end(), 0.0);
    std::fill(grad_g.begin(), grad_g.end(), 0.0);
    double train_loss = 0.0;
    for (const auto& g : train_groups) {
      const double z =
          m.logits[g.cell] + m.position_weights[static_cast<size_t>(g.pos0)];
      const double resid = (g.n * sigmoid(z) - g.c) / total_train;
      grad_a[g.cell] += resid;
      grad_g[static_cast<size_t>(g.pos0)] += resid;
      train_loss += g.n * softplus(z) - g.c * z;
    }
    train_loss /= total_train;
    double penalty = 0.0;
    for (double g : m.position_weights) penalty += g * g;
    train_loss += hyper.l2_position * penalty;
    if (!std::isfinite(train_loss)) fail(epoch);

    for (size_t c = 0; c < cells; ++c) m.logits[c] -= lr * grad_a[c];
    // Proximal handling of the L2 penalty keeps huge strengths stable where
    // an explicit penalty gradient would oscillate and blow up.
    const double shrink = 1.0 + 2.0 * lr * hyper.l2_position;
    for (size_t k = 0; k < grad_g.size(); ++k)
      m.position_weights[k] = (m.position_weights[k] - lr * grad_g[k]) / shrink;
    for (double v : m.logits)
      if (!std::isfinite(v)) fail(epoch);
    for (double v : m.position_weights)
      if (!std::isfinite(v)) fail(epoch);

    const double val_loss = loss_on(val_groups, total_val);
    if (!std::isfinite(val_loss)) fail(epoch);
    m.epochs_run = epoch + 1;
    if (val_loss < best_val - 1e-9) {
      best_val = val_loss;
      best_a = m.logits;
      best_g = m.position_weights;
      since_best = 0;
    } else if (++since_best >= hyper.patience) {
      break;
    }
  }
  m.logits = std::move(best_a);
  m.position_weights = std::move(best_g);
  m.best_val_loss = best_val;
  return p;
}

RankerPolicy train_popularity(const InteractionLog& log, int32_t n_items) {
  return train_popularity(std::span<const InteractionLog>{&log, 1}, n_items);
}
RankerPolicy train_naive_ctr(const InteractionLog& log, int32_t n_segments,
                             int32_t n_items) {
  return train_naive_ctr(std::span<const InteractionLog>{&log, 1}, n_segments,
                         n_items);
}
RankerPolicy train_ipw_ctr(const InteractionLog& log, const PositionBiasCurve& curve,
                           int32_t n_segments, int32_t n_items) {
  return train_ipw_ctr(std::span<const InteractionLog>{&log, 1}, curve, n_segments,
                       n_items);
}
RankerPolicy train_position_aware(const InteractionLog& log, int32_t n_segments,
                                  int32_t n_items, int32_t max_position,
                                  const PositionHyper& hyper, uint64_t seed) {
  return train_position_aware(std::span<const InteractionLog>{&log, 1}, n_segments,
                              n_items, max_position, hyper, seed);
}

RankedSlate serve(const RankerPolicy& policy, int32_t segment,
                  std::span<const int32_t> candidate_items, int32_t slate_length) {
  if (slate_length < 1) throw ConfigError("serve: slate_length must be >= 1");
  if (candidate_items.size() < static_cast<size_t>(slate_length))
    throw ConfigError("serve: candidate set smaller than the requested slate");

  std::vector<std::pair<double, int32_t>> scored;
  scored.reserve(candidate_items.size());
  for (int32_t id : candidate_items) scored.emplace_back(policy.score(segment, id), id);
  std::partial_sort(scored.begin(), scored.begin() + slate_length, scored.end(),
                    [](const auto& a, const auto& b) {
                      if (a.first != b.first) return a.first > b.first;
                      return a.second < b.second;
                    });
  RankedSlate slate;
  slate.items.reserve(static_cast<size_t>(slate_length));
  for (int32_t j = 0; j < slate_length; ++j)
    slate.items.push_back(scored[static_cast<size_t>(j)].second);
  return slate;
}

}  // namespace poploop
