#pragma once

#include <string>
#include <vector>

#include "mecsim/critic.hpp"

namespace mecsim {

struct BaselineResult {
  std::string method;
  OffloadAction action;
  double score = 0.0;
  long solver_calls = 0;
  double wall_time_us = 0.0;
};

// Exact mixed-integer optimum by scoring all 2^N binary vectors with the
// mode's solver; ties go to the lexicographically smallest x. Guarded to
// N <= 20.
BaselineResult enumerate_opt(const SystemConfig& cfg, const SlotObservation& obs,
                             ScoreMode mode, const SolverTolerances& tol = {},
                             bool parallel = true);

// Greedy single-bit local search: repeatedly apply the best strictly
// improving flip until none improves (at most N^2 flips). mode=lyapunov is
// the Lyapunov-guided variant.
BaselineResult coordinate_descent(const SystemConfig& cfg, const SlotObservation& obs,
                                  ScoreMode mode, const std::vector<uint8_t>& init,
                                  const SolverTolerances& tol = {});

// Coordinate descent initialized from the better of all-local / all-edge.
BaselineResult coordinate_descent_auto(const SystemConfig& cfg,
                                       const SlotObservation& obs, ScoreMode mode,
                                       const SolverTolerances& tol = {});

// Fixed policies with the continuous part still optimized by the solver.
BaselineResult all_local(const SystemConfig& cfg, const SlotObservation& obs,
                         ScoreMode mode, const SolverTolerances& tol = {});
BaselineResult all_edge(const SystemConfig& cfg, const SlotObservation& obs,
                        ScoreMode mode, const SolverTolerances& tol = {});

// Cumulative realized energy per device against a prescribed total budget
// (gamma_i * T * horizon); a device at or over its budget is forced idle.
struct BudgetTracker {
  std::vector<double> spent;
  std::vector<double> budget;

  static BudgetTracker init(const SystemConfig& cfg, long horizon_slots);
  bool eligible(int i) const { return spent[i] < budget[i]; }
};

// Queue-blind greedy policy: eligible devices pick x by coordinate descent
// on the weighted full-power rate (f_max / p_max, fractional time sharing);
// execution still clips work at Q_i and charges the energy actually spent.
// Updates the tracker with realized energy. Reported score re-evaluates the
// realized action under the Lyapunov objective.
BaselineResult myopic(const SystemConfig& cfg, const SlotObservation& obs,
                      BudgetTracker& tracker);

}  // namespace mecsim
