#include "poploop/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace poploop {

namespace {

struct MeanPartial {
  double sum = 0.0;
  int64_t n = 0;
};

// Aggregates per_session(session) -> optional<double> over all sessions,
// with a deterministic chunked reduction.
template <class PerSession>
std::optional<double> mean_over_sessions(std::span<const EvalSession> sessions,
                                         Exec exec, PerSession&& per_session) {
  auto total = chunked_reduce<MeanPartial>(
      sessions.size(), exec,
      [&](size_t begin, size_t end, MeanPartial& part) {
        for (size_t s = begin; s < end; ++s) {
          if (auto v = per_session(sessions[s])) {
            part.sum += *v;
            ++part.n;
          }
        }
      },
      [](MeanPartial& into, const MeanPartial& part) {
        into.sum += part.sum;
        into.n += part.n;
      });
  if (total.n == 0) return std::nullopt;
  return total.sum / static_cast<double>(total.n);
}

bool contains(std::span<const int32_t> items, int32_t id) {
  return std::find(items.begin(), items.end(), id) != items.end();
}

double discount(size_t zero_based_position) {
  return std::log2(static_cast<double>(zero_based_position) + 2.0);
}

}  // namespace

std::optional<double> recall_at_k(std::span<const EvalSession> sessions, int32_t k,
                                  Exec exec) {
  if (k < 1) throw std::domain_error("recall_at_k: k must be >= 1");
  return mean_over_sessions(
      sessions, exec, [k](const EvalSession& s) -> std::optional<double> {
        if (s.attributed.empty()) return std::nullopt;
        const size_t top = std::min<size_t>(static_cast<size_t>(k), s.evaluated.size());
        int hits = 0;
        for (size_t j = 0; j < top; ++j)
          hits += contains(s.attributed, s.evaluated[j]) ? 1 : 0;
        return static_cast<double>(hits) / static_cast<double>(s.attributed.size());
      });
}

std::optional<double> ips_ndcg_at_k(std::span<const EvalSession> sessions, int32_t k,
                                    const PositionBiasCurve& curve, Exec exec) {
  if (k < 1) throw std::domain_error("ips_ndcg_at_k: k must be >= 1");
  return mean_over_sessions(
      sessions, exec, [&](const EvalSession& s) -> std::optional<double> {
        if (s.attributed.empty()) return std::nullopt;
        std::vector<double> gains(s.attributed.size());
        for (size_t a = 0; a < s.attributed.size(); ++a)
          gains[a] = 1.0 / curve.bias_at(s.logged_positions[a]);

        double dcg = 0.0;
        const size_t top = std::min<size_t>(static_cast<size_t>(k), s.evaluated.size());
        for (size_t j = 0; j < top; ++j) {
          auto it = std::find(s.attributed.begin(), s.attributed.end(), s.evaluated[j]);
          if (it != s.attributed.end())
            dcg += gains[static_cast<size_t>(it - s.attributed.begin())] / discount(j);
        }
        std::sort(gains.begin(), gains.end(), std::greater<>());
        double idcg = 0.0;
        for (size_t j = 0; j < std::min<size_t>(static_cast<size_t>(k), gains.size());
             ++j)
          idcg += gains[j] / discount(j);
        if (!(idcg > 0.0)) return std::nullopt;
        return dcg / idcg;
      });
}

std::optional<double> arp_at_k(std::span<const EvalSession> sessions, int32_t k,
                               std::span<const int64_t> popularity, Exec exec) {
  if (k < 1) throw std::domain_error("arp_at_k: k must be >= 1");
  return mean_over_sessions(
      sessions, exec, [&](const EvalSession& s) -> std::optional<double> {
        const size_t top = std::min<size_t>(static_cast<size_t>(k), s.evaluated.size());
        if (top == 0) return std::nullopt;
        double sum = 0.0;
        for (size_t j = 0; j < top; ++j) {
          auto id = static_cast<size_t>(s.evaluated[j]);
          sum += id < popularity.size() ? static_cast<double>(popularity[id]) : 0.0;
        }
        return sum / static_cast<double>(top);
      });
}

std::optional<double> ecs_at_x(const PopularityHistogram& hist, double x,
                               bool interpolate) {
  if (!(x > 0.0) || x > 1.0)
    throw std::domain_error("ecs_at_x: x must lie in (0, 1]");
  if (hist.total < 1) return std::nullopt;

  std::vector<int64_t> counts = hist.counts;
  std::sort(counts.begin(), counts.end(), std::greater<>());
  const double total = static_cast<double>(hist.total);
  int64_t cum = 0;
  for (size_t m = 0; m < counts.size(); ++m) {
    const int64_t prev = cum;
    cum += counts[m];
    if (static_cast<double>(cum) / total + 1e-12 >= x) {
      if (!interpolate)
        return static_cast<double>(m + 1) / static_cast<double>(counts.size());
      const double need = std::max(0.0, x * total - static_cast<double>(prev));
      const double frac =
          counts[m] > 0 ? std::min(1.0, need / static_cast<double>(counts[m])) : 0.0;
      return (static_cast<double>(m) + frac) / static_cast<double>(counts.size());
    }
  }
  // Unreachable for valid histograms: cumulative share ends at 1 >= x.
  return 1.0;
}

std::optional<double> ndcg_true_relevance(std::span<const int32_t> slate,
                                          std::span<const double> relevance_row,
                                          int32_t k) {
  if (k < 1) throw std::domain_error("ndcg_true_relevance: k must be >= 1");
  const size_t top = std::min<size_t>(static_cast<size_t>(k), slate.size());
  double dcg = 0.0;
  for (size_t j = 0; j < top; ++j)
    dcg += relevance_row[static_cast<size_t>(slate[j])] / discount(j);

  std::vector<double> ideal(relevance_row.begin(), relevance_row.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  double idcg = 0.0;
  for (size_t j = 0; j < std::min<size_t>(static_cast<size_t>(k), ideal.size()); ++j)
    idcg += ideal[j] / discount(j);
  if (!(idcg > 0.0)) return std::nullopt;
  return dcg / idcg;
}

}  // namespace poploop
