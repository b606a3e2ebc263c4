#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mecsim {

// Static parameters of the edge system. Task data (queues, arrivals,
// computation rates) is measured in units of `data_unit` bits; energy in
// joules, frequencies in hertz, powers in watts.
struct SystemConfig {
  int n_devices = 10;
  double es_tx_power = 3.0;      // P, watts (energy broadcast power)
  double harvest_eff = 0.51;     // mu, in (0, 1]
  double bandwidth = 2.0e6;      // B, hertz
  double noise_power = 1.0e-10;  // N0, watts
  double comm_overhead = 1.1;    // v_u >= 1 (protocol overhead on the uplink)
  double cycles_per_bit = 100.0;  // phi
  double cap_coeff = 5.0e-27;     // k, effective switched capacitance
  double f_max = 3.0e8;           // hertz
  double p_max = 0.1;             // watts
  double slot_len = 1.0;          // T, seconds
  double data_unit = 1.0e6;       // bits per task-data unit (default: megabits)
  std::vector<double> weights;    // w_i, size N; empty = default pattern
  std::vector<double> mean_gain;  // mean channel gains, size N; empty = default
  double arrival_rate = 0.0;      // lambda, data units per slot
  std::vector<double> power_budget;  // gamma_i, watts; empty = default 0.08
  double lyapunov_v = 20.0;          // V
  uint64_t rng_seed = 1;

  // Cycles needed per task-data unit.
  double cycles_per_unit() const { return cycles_per_bit * data_unit; }
  // Spectral rate scale in data units per second: B / (v_u * data_unit).
  double rate_scale() const { return bandwidth / (comm_overhead * data_unit); }
  // Local-computing rate coefficient: one data unit per slot equals
  // eta * (h * a)^(1/3) when the device spends harvested energy mu*P*h*a.
  double eta() const;
  // Offload SNR coefficient c_i = mu * P * h^2 / N0 for gain h.
  double snr_coeff(double gain) const {
    return harvest_eff * es_tx_power * gain * gain / noise_power;
  }

  void validate() const;  // throws ConfigError naming the offending field
};

// Default desk-scale system: weights alternate 1 / 1.5 (odd devices get 1),
// mean gains log-spaced over one decade from 1e-5 down.
SystemConfig default_system_config(int n_devices = 10);

// Key-value (JSON) round trip. Unknown keys are rejected.
SystemConfig system_config_from_json_text(const std::string& text);
std::string system_config_to_json_text(const SystemConfig& cfg);

}  // namespace mecsim
