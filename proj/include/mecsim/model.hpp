#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "mecsim/config.hpp"
#include "mecsim/rng.hpp"

namespace mecsim {

// Actual data backlog Q_i (data units) and virtual energy backlog Y_i
// (joules) per device. Both are kept nonnegative by step_queues.
struct QueueState {
  std::vector<double> data_q;
  std::vector<double> energy_q;

  static QueueState zeros(int n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  }
};

// Per-slot problem parameters: exogenous draws (gains, arrivals) plus the
// endogenous queue backlogs at the start of the slot.
struct SlotObservation {
  long t = 0;
  std::vector<double> gains;
  std::vector<double> arrivals;
  QueueState queues;
};

// Binary offloading vector plus the continuous resource allocation.
// wpt_frac/time_shares are used in the energy-harvesting scenario;
// cpu_freq/tx_power/time_shares in the stochastic scenario.
struct OffloadAction {
  std::vector<uint8_t> x;           // 1 = offload, 0 = local
  double wpt_frac = 0.0;            // a, seconds of energy broadcast
  std::vector<double> time_shares;  // tau_i, seconds, nonzero only where x_i = 1
  std::vector<double> cpu_freq;     // f_i, hertz, nonzero only where x_i = 0
  std::vector<double> tx_power;     // p_i, watts, nonzero only where x_i = 1

  static OffloadAction idle(int n) {
    OffloadAction a;
    a.x.assign(n, 0);
    a.time_shares.assign(n, 0.0);
    a.cpu_freq.assign(n, 0.0);
    a.tx_power.assign(n, 0.0);
    return a;
  }
};

// What a slot actually did: data units processed and joules spent per
// device, plus the scalar score of the action.
struct SlotOutcome {
  std::vector<double> processed;  // D_i, data units
  std::vector<double> energy;     // e_i, joules
  double utility = 0.0;
};

// Slack applied to feasibility comparisons (time budget, caps).
inline constexpr double kFeasSlack = 1e-9;

// Channel gains h_i = mean_gain_i * E with E a unit-mean exponential draw,
// independent per device per slot.
std::vector<double> gen_channels(const SystemConfig& cfg, Rng& rng);

// Task arrivals, exponential with mean cfg.arrival_rate (exactly zero when
// the rate is zero).
std::vector<double> gen_arrivals(const SystemConfig& cfg, Rng& rng);

// Throws FeasibilityError naming the violated constraint.
void validate_action_wpt(const SystemConfig& cfg, const OffloadAction& action);
void validate_action_stochastic(const SystemConfig& cfg, const OffloadAction& action);

// Weighted sum computation rate of the energy-harvesting scenario:
//   sum_{x_i=0} w_i eta (h_i a)^(1/3)
//   + sum_{x_i=1} w_i rate_scale tau_i log2(1 + c_i a / tau_i),
// with the tau_i = 0 term defined as 0. Validates the action first.
double utility_wpt(const SystemConfig& cfg, const std::vector<double>& gains,
                   const OffloadAction& action);

// Per-device processed units and energy for the energy-harvesting scenario
// (used for slot records; utility is the weighted sum over processed).
SlotOutcome wpt_outcome(const SystemConfig& cfg, const std::vector<double>& gains,
                        const OffloadAction& action);

// Drift-plus-penalty surrogate for the stochastic scenario:
//   G = sum_i (Q_i + V w_i) D_i - sum_i Y_i e_i,   D_i = min(achievable, Q_i)
// with local bits f_i T / phi_u, local energy k f_i^3 T, offload bits
// tau_i * rate_i(p_i), offload energy p_i tau_i. Maximizing G is the
// per-slot surrogate for minimizing the drift-plus-penalty.
std::pair<double, SlotOutcome> lyapunov_score(const SystemConfig& cfg,
                                              const SlotObservation& obs,
                                              const OffloadAction& action);

// Q_i' = max(Q_i - D_i, 0) + A_i;  Y_i' = max(Y_i + e_i - gamma_i T, 0).
// Arrivals of slot t are added after service (servable from t+1).
// Throws ContractError if the outcome claims D_i > Q_i.
QueueState step_queues(const SystemConfig& cfg, const QueueState& state,
                       const SlotOutcome& outcome, const std::vector<double>& arrivals);

// Uplink rate in data units per second at transmit power p and gain h.
inline double offload_rate(const SystemConfig& cfg, double p, double h) {
  return cfg.rate_scale() * std::log2(1.0 + p * h / cfg.noise_power);
}

}  // namespace mecsim
