#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mecsim/actor.hpp"
#include "mecsim/baselines.hpp"
#include "mecsim/critic.hpp"

namespace mecsim {

enum class Scenario { droo, lydroo };

struct ScheduledEvent {
  long slot = 0;
  std::string kind;  // supported: "weight_flip"
};

struct ExperimentConfig {
  Scenario scenario = Scenario::droo;
  long slots = 10000;              // default 20000 for lydroo
  int k_init = 0;                  // 0 = N
  std::vector<ScheduledEvent> events;
  int metric_window = 200;         // moving-average width
  std::string output_dir;          // empty = no files written
  uint64_t seed = 1;
  bool enumeration = true;         // exact NCR denominator (droo, N <= 20)
  bool baselines = false;          // also score LC/EC/CD per slot (droo)
  long baselines_from = 0;         // first slot baselines are scored on
  bool exhaustive_candidates = false;  // feed all 2^N candidates (tests)
  bool parallel = true;            // OpenMP candidate scoring
  SolverTolerances solver_tol;

  void validate(const SystemConfig& cfg) const;
};

// One slot of a run. Vector fields are per device. Baseline and
// enumeration fields are NaN when not computed.
struct SlotRecord {
  long t = 0;
  double utility = 0.0;
  double optimal_utility = 0.0;
  double ncr = 0.0;
  double ncr_ma = 0.0;
  double loss = 0.0;  // last train-step loss (NaN before first step)
  int k_used = 0;
  int chosen_index = 0;  // 1-based candidate index
  double decision_time_us = 0.0;
  double lc = 0.0, ec = 0.0, cd = 0.0;
  std::vector<double> q, y, e, d;
  std::vector<double> p_avg;  // running average power per device
};

struct RunSummary {
  long converged_at = -1;  // first slot with moving-average NCR >= threshold
  double convergence_threshold = 0.98;
  std::vector<double> final_avg_queue;  // mean Q_i over the final quarter
  std::vector<double> avg_power;        // realized mean e_i / T over the run
  double mean_decision_us = 0.0;
  double p95_decision_us = 0.0;
  double total_utility = 0.0;
  double avg_utility = 0.0;  // over [baselines_from, slots) when baselines on,
                             // else over the whole run
  double avg_lc = 0.0, avg_ec = 0.0, avg_cd = 0.0;  // same window, NaN if off
  long train_steps = 0;
  int final_k = 0;
};

struct RunResult {
  std::vector<SlotRecord> records;
  RunSummary summary;
  Checkpoint checkpoint;  // trained actor + scaling + final K
};

// Slot loop of the energy-harvesting scenario: draw channels, featurize,
// forward, quantize, pick the best candidate with the wpt critic, store the
// labeled sample, train every train_interval slots, adapt K every
// k_adapt_interval slots, apply scheduled events. Deterministic per seed.
RunResult run_droo(const ExperimentConfig& ec, const SystemConfig& cfg,
                   const TrainConfig& tc = {});

// Which policy drives the stochastic slot loop.
enum class StochasticPolicy { actor, lycd, myopic };

// Slot loop of the stochastic scenario: draw channels and arrivals, decide
// via the policy (actor = LyDROO), execute, step the queues. Uses only
// slot-t information.
RunResult run_lydroo(const ExperimentConfig& ec, const SystemConfig& cfg,
                     const TrainConfig& tc = {},
                     StochasticPolicy policy = StochasticPolicy::actor);

// Largest probe arrival rate the Lyapunov-guided coordinate-descent policy
// keeps stable (last-quarter mean queue <= 2x second-quarter mean queue)
// over the given horizon. Throws ConfigError when no probe is stable.
double estimate_capacity(const SystemConfig& cfg, const std::vector<double>& probe_lambdas,
                         long horizon, uint64_t seed = 1);

// Tidy CSV emission. Selectors: ncr, loss, queues, power. Writes a
// documented header plus one row per slot, floats at 9 significant digits.
void emit_csv(const RunResult& run, const std::string& what, const std::string& path);

// Everything a run leaves behind: config snapshot, checkpoint, records.csv,
// summary.json and the tidy CSVs applicable to the scenario.
void write_run_dir(const RunResult& run, const ExperimentConfig& ec,
                   const SystemConfig& cfg, const TrainConfig& tc,
                   const std::string& dir);

// Re-derive one tidy CSV from a run directory's records.csv by column
// selection (no arithmetic, so re-emission is byte-identical).
void plotdata(const std::string& run_dir, const std::string& what,
              const std::string& out_path);

struct BenchCell {
  std::string method;
  int n = 0;
  int trials = 0;
  double mean_us = 0.0;
  double p95_us = 0.0;
};

// Per-decision wall time of each (method, N) pair over freshly drawn
// instances, timed sequentially. droo is timed as featurize + forward +
// quantize + K solver calls with K and the model from its checkpoint.
std::vector<BenchCell> bench_runtime(const std::vector<std::string>& methods,
                                     const std::vector<int>& n_list, int trials,
                                     const SystemConfig& cfg_template,
                                     const std::map<int, Checkpoint>& checkpoints,
                                     uint64_t seed = 1);

void write_bench_csv(const std::vector<BenchCell>& cells, const std::string& path);

// Moving average over the trailing `window` entries (inclusive).
std::vector<double> moving_average(const std::vector<double>& xs, int window);

}  // namespace mecsim
