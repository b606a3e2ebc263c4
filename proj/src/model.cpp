#include "mecsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mecsim/errors.hpp"

namespace mecsim {

std::vector<double> gen_channels(const SystemConfig& cfg, Rng& rng) {
  std::vector<double> h(cfg.n_devices);
  for (int i = 0; i < cfg.n_devices; ++i)
    h[i] = cfg.mean_gain[i] * rng.exponential(1.0);
  return h;
}

std::vector<double> gen_arrivals(const SystemConfig& cfg, Rng& rng) {
  std::vector<double> a(cfg.n_devices);
  for (int i = 0; i < cfg.n_devices; ++i)
    a[i] = rng.exponential(cfg.arrival_rate);
  return a;
}

namespace {

void check_shapes(const SystemConfig& cfg, const OffloadAction& action) {
  const size_t n = static_cast<size_t>(cfg.n_devices);
  if (action.x.size() != n || action.time_shares.size() != n ||
      action.cpu_freq.size() != n || action.tx_power.size() != n)
    throw FeasibilityError("action: vector lengths must equal n_devices");
}

std::string device_tag(int i) { return " (device " + std::to_string(i) + ")"; }

}  // namespace

void validate_action_wpt(const SystemConfig& cfg, const OffloadAction& action) {
  check_shapes(cfg, action);
  if (action.wpt_frac < -kFeasSlack || action.wpt_frac > cfg.slot_len + kFeasSlack)
    throw FeasibilityError("wpt_frac: a must lie in [0, slot_len]");
  double tau_sum = 0.0;
  for (int i = 0; i < cfg.n_devices; ++i) {
    double tau = action.time_shares[i];
    if (tau < -kFeasSlack)
      throw FeasibilityError("time_shares: tau must be >= 0" + device_tag(i));
    if (!action.x[i] && tau > kFeasSlack)
      throw FeasibilityError("time_shares: tau must be 0 where x_i = 0" + device_tag(i));
    tau_sum += std::max(tau, 0.0);
  }
  if (action.wpt_frac + tau_sum > cfg.slot_len + kFeasSlack)
    throw FeasibilityError("time_budget: a + sum(tau) exceeds slot_len");
}

void validate_action_stochastic(const SystemConfig& cfg, const OffloadAction& action) {
  check_shapes(cfg, action);
  double tau_sum = 0.0;
  for (int i = 0; i < cfg.n_devices; ++i) {
    double tau = action.time_shares[i];
    double f = action.cpu_freq[i];
    double p = action.tx_power[i];
    if (tau < -kFeasSlack)
      throw FeasibilityError("time_shares: tau must be >= 0" + device_tag(i));
    if (f < -kFeasSlack || f > cfg.f_max + kFeasSlack)
      throw FeasibilityError("cpu_freq: f must lie in [0, f_max]" + device_tag(i));
    if (p < -kFeasSlack || p > cfg.p_max + kFeasSlack)
      throw FeasibilityError("tx_power: p must lie in [0, p_max]" + device_tag(i));
    if (action.x[i]) {
      if (f > kFeasSlack)
        throw FeasibilityError("cpu_freq: f must be 0 where x_i = 1" + device_tag(i));
    } else {
      if (tau > kFeasSlack)
        throw FeasibilityError("time_shares: tau must be 0 where x_i = 0" + device_tag(i));
      if (p > kFeasSlack)
        throw FeasibilityError("tx_power: p must be 0 where x_i = 0" + device_tag(i));
    }
    tau_sum += std::max(tau, 0.0);
  }
  if (tau_sum > cfg.slot_len + kFeasSlack)
    throw FeasibilityError("time_budget: sum(tau) exceeds slot_len");
}

double utility_wpt(const SystemConfig& cfg, const std::vector<double>& gains,
                   const OffloadAction& action) {
  validate_action_wpt(cfg, action);
  if (gains.size() != static_cast<size_t>(cfg.n_devices))
    throw FeasibilityError("gains: length must equal n_devices");
  const double a = std::clamp(action.wpt_frac, 0.0, cfg.slot_len);
  const double eta = cfg.eta();
  const double rate = cfg.rate_scale();
  double u = 0.0;
  for (int i = 0; i < cfg.n_devices; ++i) {
    if (!std::isfinite(gains[i]) || gains[i] <= 0.0)
      throw FeasibilityError("gains: must be finite and > 0" + device_tag(i));
    if (action.x[i]) {
      double tau = action.time_shares[i];
      if (tau <= 0.0) continue;  // tau = 0 term is defined as 0
      u += cfg.weights[i] * rate * tau * std::log2(1.0 + cfg.snr_coeff(gains[i]) * a / tau);
    } else {
      u += cfg.weights[i] * eta * std::cbrt(gains[i] * a);
    }
  }
  return u;
}

SlotOutcome wpt_outcome(const SystemConfig& cfg, const std::vector<double>& gains,
                        const OffloadAction& action) {
  validate_action_wpt(cfg, action);
  const double a = std::clamp(action.wpt_frac, 0.0, cfg.slot_len);
  SlotOutcome out;
  out.processed.assign(cfg.n_devices, 0.0);
  out.energy.assign(cfg.n_devices, 0.0);
  for (int i = 0; i < cfg.n_devices; ++i) {
    double harvested = cfg.harvest_eff * cfg.es_tx_power * gains[i] * a;
    if (action.x[i]) {
      double tau = action.time_shares[i];
      if (tau > 0.0) {
        out.processed[i] =
            cfg.rate_scale() * tau * std::log2(1.0 + cfg.snr_coeff(gains[i]) * a / tau);
        out.energy[i] = harvested;  // all harvested energy spent over tau
      }
    } else {
      out.processed[i] = cfg.eta() * std::cbrt(gains[i] * a);
      out.energy[i] = harvested;
    }
  }
  out.utility = utility_wpt(cfg, gains, action);
  return out;
}

std::pair<double, SlotOutcome> lyapunov_score(const SystemConfig& cfg,
                                              const SlotObservation& obs,
                                              const OffloadAction& action) {
  validate_action_stochastic(cfg, action);
  const double t_slot = cfg.slot_len;
  SlotOutcome out;
  out.processed.assign(cfg.n_devices, 0.0);
  out.energy.assign(cfg.n_devices, 0.0);
  double g = 0.0;
  for (int i = 0; i < cfg.n_devices; ++i) {
    const double q = obs.queues.data_q[i];
    const double y = obs.queues.energy_q[i];
    double achievable = 0.0, energy = 0.0;
    if (action.x[i]) {
      double tau = std::max(action.time_shares[i], 0.0);
      if (tau > 0.0) {
        double p = std::clamp(action.tx_power[i], 0.0, cfg.p_max);
        achievable = tau * offload_rate(cfg, p, obs.gains[i]);
        energy = p * tau;
      }
    } else {
      double f = std::clamp(action.cpu_freq[i], 0.0, cfg.f_max);
      if (f > 0.0) {
        achievable = f * t_slot / cfg.cycles_per_unit();
        energy = cfg.cap_coeff * f * f * f * t_slot;
      }
    }
    double d = std::min(achievable, q);
    out.processed[i] = d;
    out.energy[i] = energy;
    g += (q + cfg.lyapunov_v * cfg.weights[i]) * d - y * energy;
  }
  out.utility = g;
  return {g, out};
}

QueueState step_queues(const SystemConfig& cfg, const QueueState& state,
                       const SlotOutcome& outcome, const std::vector<double>& arrivals) {
  QueueState next = state;
  for (int i = 0; i < cfg.n_devices; ++i) {
    double d = outcome.processed[i];
    if (d > state.data_q[i] + kFeasSlack * std::max(1.0, state.data_q[i])) {
      std::ostringstream msg;
      msg << "step_queues: processed " << d << " exceeds backlog " << state.data_q[i]
          << " at device " << i;
      throw ContractError(msg.str());
    }
    next.data_q[i] = std::max(state.data_q[i] - d, 0.0) + arrivals[i];
    next.energy_q[i] =
        std::max(state.energy_q[i] + outcome.energy[i] - cfg.power_budget[i] * cfg.slot_len, 0.0);
  }
  return next;
}

}  // namespace mecsim
