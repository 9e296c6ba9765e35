#include <chrono>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "poploop/loop_engine.hpp"
#include "poploop/metrics.hpp"
#include "poploop/parallel.hpp"
#include "poploop/propensity.hpp"
#include "poploop/serial_ref.hpp"

using namespace poploop;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

template <class Fn>
double time_best_of(int repeats, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto start = Clock::now();
    fn();
    best = std::min(best, seconds_since(start));
  }
  return best;
}

void report(const char* kernel, const char* impl, double secs, double ref_secs,
            bool identical) {
  std::printf("%-22s %-14s %8.3fs  x%-5.2f results identical: %s\n", kernel, impl,
              secs, ref_secs / secs, identical ? "yes" : "NO");
}

std::vector<EvalSession> sessions_from(const InteractionLog& log) {
  std::vector<EvalSession> sessions(log.records.size());
  for (size_t i = 0; i < log.records.size(); ++i) {
    const auto& rec = log.records[i];
    const auto& items = log.slate_of(rec);
    sessions[i].segment = rec.segment;
    sessions[i].evaluated.assign(items.begin(), items.end());
    for (size_t j = 0; j < items.size(); ++j)
      if (rec.clicked[j]) {
        sessions[i].attributed.push_back(items[j]);
        sessions[i].logged_positions.push_back(static_cast<int32_t>(j) + 1);
      }
  }
  return sessions;
}

bool same_log(const InteractionLog& a, const InteractionLog& b) {
  if (a.records.size() != b.records.size()) return false;
  for (size_t i = 0; i < a.records.size(); ++i)
    if (a.records[i].clicked != b.records[i].clicked ||
        a.slate_of(a.records[i]) != b.slate_of(b.records[i]))
      return false;
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial-reference vs OpenMP kernel benchmark"};
  int sessions = 200000;
  int threads = 0;
  int repeats = 3;
  app.add_option("--sessions", sessions, "sessions per kernel run");
  app.add_option("--threads", threads, "thread count for the parallel runs");
  app.add_option("--repeats", repeats, "take the best of this many runs");
  CLI11_PARSE(app, argc, argv);
  if (threads > 0) set_threads(threads);
  std::printf("sessions %d, threads %d, best of %d\n\n", sessions, max_threads(),
              repeats);

  const World world = generate_world(200, 8, RelevanceSpec::exponential_tail(0.3), 7);
  const auto curve = PositionBiasCurve::power_law(1.0, 6);

  // Session collection.
  InteractionLog ref_log, ser_log, par_log;
  const double collect_ref = time_best_of(repeats, [&] {
    ref_log = serial_ref::collect_log(world, curve, InteractionMode::choice_biased, 6,
                                      sessions, {}, 11);
  });
  const double collect_ser = time_best_of(repeats, [&] {
    ser_log = random_slate_log(world, curve, InteractionMode::choice_biased, 6,
                               sessions, {}, 11, 0, Exec::serial);
  });
  const double collect_par = time_best_of(repeats, [&] {
    par_log = random_slate_log(world, curve, InteractionMode::choice_biased, 6,
                               sessions, {}, 11, 0, Exec::parallel);
  });
  report("session collection", "serial_ref", collect_ref, collect_ref, true);
  report("session collection", "lib serial", collect_ser, collect_ref,
         same_log(ref_log, ser_log));
  report("session collection", "lib parallel", collect_par, collect_ref,
         same_log(ref_log, par_log));

  // EM estimation (fixed iteration budget so runs are comparable).
  const auto exam = random_slate_log(world, curve, InteractionMode::examination, 6,
                                     sessions, {}, 13);
  EmOptions em;
  em.max_iter = 50;
  em.tol = 1e-300;  // never trips: forces the full budget
  PropensityFit em_ser, em_par;
  const double em_serial = time_best_of(repeats, [&] {
    em_ser = estimate_propensity_em(exam, em, Exec::serial);
  });
  const double em_parallel = time_best_of(repeats, [&] {
    em_par = estimate_propensity_em(exam, em, Exec::parallel);
  });
  report("EM estimation", "lib serial", em_serial, em_serial, true);
  report("EM estimation", "lib parallel", em_parallel, em_serial,
         em_ser.curve_table == em_par.curve_table);

  // Metric aggregation.
  const auto eval_sessions = sessions_from(ser_log);
  std::optional<double> rec_ref, rec_ser, rec_par;
  const double recall_ref = time_best_of(
      repeats, [&] { rec_ref = serial_ref::recall_at_k(eval_sessions, 6); });
  const double recall_ser = time_best_of(
      repeats, [&] { rec_ser = recall_at_k(eval_sessions, 6, Exec::serial); });
  const double recall_par = time_best_of(
      repeats, [&] { rec_par = recall_at_k(eval_sessions, 6, Exec::parallel); });
  report("recall aggregation", "serial_ref", recall_ref, recall_ref, true);
  report("recall aggregation", "lib serial", recall_ser, recall_ref,
         rec_ref == rec_ser);
  report("recall aggregation", "lib parallel", recall_par, recall_ref,
         rec_ref == rec_par);
  return 0;
}
