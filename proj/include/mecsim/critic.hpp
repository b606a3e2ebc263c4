#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mecsim/model.hpp"

namespace mecsim {

enum class ScoreMode { wpt, lyapunov };

struct SolverTolerances {
  double outer_tol = 1e-6;   // absolute tolerance on the a-search
  double dual_tol = 1e-9;    // relative tolerance on the dual bisection
  double inner_tol = 1e-10;  // tolerance on scalar inversions
  int max_iters = 200;       // cap per bisection

  void validate() const;  // throws ConfigError
};

struct ScoredAction {
  OffloadAction action;
  double score = 0.0;
  double solve_time_us = 0.0;
};

// Optimal continuous allocation for the energy-harvesting objective given a
// binary decision x: maximizes utility_wpt over a in [0, T], tau >= 0,
// a + sum tau <= T. All-local x has the closed form a* = T; otherwise the
// residual T - a is allocated across offloaders by dual bisection and the
// outer maximization over a uses golden-section search.
ScoredAction solve_wpt(const SystemConfig& cfg, const std::vector<double>& gains,
                       const std::vector<uint8_t>& x,
                       const SolverTolerances& tol = {});

// Optimal continuous allocation for the drift-plus-penalty objective given
// x, by per-device closed forms plus a fractional-knapsack time allocation.
ScoredAction solve_lyapunov(const SystemConfig& cfg, const SlotObservation& obs,
                            const std::vector<uint8_t>& x,
                            const SolverTolerances& tol = {});

// Mode dispatch (obs.gains is all that wpt mode reads).
ScoredAction solve_mode(const SystemConfig& cfg, const SlotObservation& obs,
                        const std::vector<uint8_t>& x, ScoreMode mode,
                        const SolverTolerances& tol = {});

// Brute-force verification oracle: exhaustive grid over the continuous
// variables at the stated resolution plus one local refinement pass.
// Guarded to at most 3 offloaders. Test use only.
ScoredAction oracle_grid(const SystemConfig& cfg, const SlotObservation& obs,
                         const std::vector<uint8_t>& x, ScoreMode mode,
                         double resolution);

// Scores every candidate with the mode's solver. This is the data-parallel
// kernel: with parallel=true candidates fan out across OpenMP threads; the
// serial path is the reference the tests compare against. Results are
// identical either way (solvers are pure, no cross-candidate reduction).
std::vector<double> score_candidates(const SystemConfig& cfg,
                                     const SlotObservation& obs,
                                     std::span<const std::vector<uint8_t>> candidates,
                                     ScoreMode mode, const SolverTolerances& tol,
                                     bool parallel);

struct BestChoice {
  ScoredAction best;
  std::size_t index = 0;  // 0-based index into the candidate list
};

// Max-score candidate, ties broken by lowest candidate index.
BestChoice best_action(const SystemConfig& cfg, const SlotObservation& obs,
                       std::span<const std::vector<uint8_t>> candidates,
                       ScoreMode mode, const SolverTolerances& tol = {},
                       bool parallel = true);

}  // namespace mecsim
