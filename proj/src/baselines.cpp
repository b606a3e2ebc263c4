#include "mecsim/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mecsim/errors.hpp"

namespace mecsim {

namespace {

using clock_type = std::chrono::steady_clock;

double elapsed_us(clock_type::time_point start) {
  return std::chrono::duration<double, std::micro>(clock_type::now() - start).count();
}

}  // namespace

BaselineResult enumerate_opt(const SystemConfig& cfg, const SlotObservation& obs,
                             ScoreMode mode, const SolverTolerances& tol, bool parallel) {
  auto start = clock_type::now();
  const int n = cfg.n_devices;
  if (n > 20)
    throw ConfigError("enumerate_opt: N > 20 would need " + std::to_string(1L << n) +
                      " solver calls");
  const size_t count = static_cast<size_t>(1) << n;
  // Device 0 is the most significant bit, so ascending index is ascending
  // lexicographic order and first-wins tie-breaking picks the smallest x.
  std::vector<std::vector<uint8_t>> candidates(count);
  for (size_t m = 0; m < count; ++m) {
    candidates[m].resize(n);
    for (int i = 0; i < n; ++i)
      candidates[m][i] = static_cast<uint8_t>((m >> (n - 1 - i)) & 1);
  }
  BestChoice choice = best_action(cfg, obs, candidates, mode, tol, parallel);
  BaselineResult res;
  res.method = "enum";
  res.action = std::move(choice.best.action);
  res.score = choice.best.score;
  res.solver_calls = static_cast<long>(count);
  res.wall_time_us = elapsed_us(start);
  return res;
}

BaselineResult coordinate_descent(const SystemConfig& cfg, const SlotObservation& obs,
                                  ScoreMode mode, const std::vector<uint8_t>& init,
                                  const SolverTolerances& tol) {
  auto start = clock_type::now();
  const int n = cfg.n_devices;
  if (init.size() != static_cast<size_t>(n))
    throw FeasibilityError("coordinate_descent: init length must equal n_devices");

  std::vector<uint8_t> x = init;
  ScoredAction cur = solve_mode(cfg, obs, x, mode, tol);
  long calls = 1;
  const long flip_cap = static_cast<long>(n) * n;
  for (long flips = 0; flips < flip_cap; ++flips) {
    int best_i = -1;
    ScoredAction best;
    for (int i = 0; i < n; ++i) {
      x[i] ^= 1;
      ScoredAction trial = solve_mode(cfg, obs, x, mode, tol);
      ++calls;
      x[i] ^= 1;
      if (trial.score > cur.score && (best_i < 0 || trial.score > best.score)) {
        best_i = i;
        best = std::move(trial);
      }
    }
    if (best_i < 0) break;  // local optimum: every flip re-checked non-improving
    x[best_i] ^= 1;
    cur = std::move(best);
  }

  BaselineResult res;
  res.method = "cd";
  res.action = std::move(cur.action);
  res.score = cur.score;
  res.solver_calls = calls;
  res.wall_time_us = elapsed_us(start);
  return res;
}

BaselineResult coordinate_descent_auto(const SystemConfig& cfg, const SlotObservation& obs,
                                       ScoreMode mode, const SolverTolerances& tol) {
  auto start = clock_type::now();
  BaselineResult lc = all_local(cfg, obs, mode, tol);
  BaselineResult ec = all_edge(cfg, obs, mode, tol);
  std::vector<uint8_t> init(cfg.n_devices, lc.score >= ec.score ? 0 : 1);
  BaselineResult res = coordinate_descent(cfg, obs, mode, init, tol);
  res.solver_calls += lc.solver_calls + ec.solver_calls;
  res.wall_time_us = elapsed_us(start);
  return res;
}

BaselineResult all_local(const SystemConfig& cfg, const SlotObservation& obs,
                         ScoreMode mode, const SolverTolerances& tol) {
  auto start = clock_type::now();
  std::vector<uint8_t> x(cfg.n_devices, 0);
  ScoredAction sa = solve_mode(cfg, obs, x, mode, tol);
  return {"lc", std::move(sa.action), sa.score, 1, elapsed_us(start)};
}

BaselineResult all_edge(const SystemConfig& cfg, const SlotObservation& obs,
                        ScoreMode mode, const SolverTolerances& tol) {
  auto start = clock_type::now();
  std::vector<uint8_t> x(cfg.n_devices, 1);
  ScoredAction sa = solve_mode(cfg, obs, x, mode, tol);
  return {"ec", std::move(sa.action), sa.score, 1, elapsed_us(start)};
}

BudgetTracker BudgetTracker::init(const SystemConfig& cfg, long horizon_slots) {
  BudgetTracker t;
  t.spent.assign(cfg.n_devices, 0.0);
  t.budget.resize(cfg.n_devices);
  for (int i = 0; i < cfg.n_devices; ++i)
    t.budget[i] = cfg.power_budget[i] * cfg.slot_len * static_cast<double>(horizon_slots);
  return t;
}

namespace {

// Queue-blind slot value: locals count their full-rate throughput, the
// channel goes entirely to the best-value offloader (linear in tau).
double myopic_score(const SystemConfig& cfg, const SlotObservation& obs,
                    const std::vector<uint8_t>& x, const std::vector<uint8_t>& eligible) {
  const double local_rate = cfg.f_max * cfg.slot_len / cfg.cycles_per_unit();
  double v = 0.0, best_off = 0.0;
  for (int i = 0; i < cfg.n_devices; ++i) {
    if (!eligible[i]) continue;
    if (x[i]) {
      double r = cfg.weights[i] * offload_rate(cfg, cfg.p_max, obs.gains[i]);
      best_off = std::max(best_off, r);
    } else {
      v += cfg.weights[i] * local_rate;
    }
  }
  return v + cfg.slot_len * best_off;
}

}  // namespace

BaselineResult myopic(const SystemConfig& cfg, const SlotObservation& obs,
                      BudgetTracker& tracker) {
  auto start = clock_type::now();
  const int n = cfg.n_devices;
  std::vector<uint8_t> eligible(n);
  for (int i = 0; i < n; ++i) eligible[i] = tracker.eligible(i) ? 1 : 0;

  // Coordinate descent on the queue-blind score, from the better of
  // all-local / all-edge over the eligible set.
  std::vector<uint8_t> loc(n, 0), edge(n);
  for (int i = 0; i < n; ++i) edge[i] = eligible[i];
  long calls = 2;
  double s_loc = myopic_score(cfg, obs, loc, eligible);
  double s_edge = myopic_score(cfg, obs, edge, eligible);
  std::vector<uint8_t> x = s_loc >= s_edge ? loc : edge;
  double cur = std::max(s_loc, s_edge);
  for (long flips = 0; flips < static_cast<long>(n) * n; ++flips) {
    int best_i = -1;
    double best = cur;
    for (int i = 0; i < n; ++i) {
      if (!eligible[i]) continue;
      x[i] ^= 1;
      double s = myopic_score(cfg, obs, x, eligible);
      ++calls;
      x[i] ^= 1;
      if (s > best) {
        best = s;
        best_i = i;
      }
    }
    if (best_i < 0) break;
    x[best_i] ^= 1;
    cur = best;
  }

  // Realized execution: locals run the slot at the frequency their backlog
  // needs (capped at f_max); the channel goes to the best offloader for as
  // long as its queue lasts. Work never exceeds Q_i.
  OffloadAction action = OffloadAction::idle(n);
  const double phi_u = cfg.cycles_per_unit();
  int winner = -1;
  double winner_value = 0.0;
  for (int i = 0; i < n; ++i) {
    if (!eligible[i]) continue;
    if (x[i]) {
      double r = cfg.weights[i] * offload_rate(cfg, cfg.p_max, obs.gains[i]);
      if (winner < 0 || r > winner_value) {
        winner = i;
        winner_value = r;
      }
    } else if (obs.queues.data_q[i] > 0.0) {
      action.x[i] = 0;
      action.cpu_freq[i] =
          std::min(cfg.f_max, phi_u * obs.queues.data_q[i] / cfg.slot_len);
    }
  }
  if (winner >= 0 && obs.queues.data_q[winner] > 0.0) {
    double rho = offload_rate(cfg, cfg.p_max, obs.gains[winner]);
    double tau = std::min(cfg.slot_len, obs.queues.data_q[winner] / rho);
    action.x[winner] = 1;
    action.tx_power[winner] = cfg.p_max;
    action.time_shares[winner] = tau;
  }

  auto [score, outcome] = lyapunov_score(cfg, obs, action);
  for (int i = 0; i < n; ++i) tracker.spent[i] += outcome.energy[i];

  BaselineResult res;
  res.method = "myopic";
  res.action = std::move(action);
  res.score = score;
  res.solver_calls = calls;
  res.wall_time_us = elapsed_us(start);
  return res;
}

}  // namespace mecsim
