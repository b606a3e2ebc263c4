#include "mecsim/config.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "mecsim/errors.hpp"

namespace mecsim {

using nlohmann::json;

double SystemConfig::eta() const {
  return std::cbrt(harvest_eff * es_tx_power / cap_coeff) / cycles_per_unit();
}

namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw ConfigError("config field '" + field + "': " + why);
}

}  // namespace

void SystemConfig::validate() const {
  require(n_devices >= 1, "n_devices", "must be a positive integer");
  require(es_tx_power > 0, "es_tx_power", "must be > 0");
  require(harvest_eff > 0 && harvest_eff <= 1, "harvest_eff", "must be in (0, 1]");
  require(bandwidth > 0, "bandwidth", "must be > 0");
  require(noise_power > 0, "noise_power", "must be > 0");
  require(comm_overhead >= 1, "comm_overhead", "must be >= 1");
  require(cycles_per_bit > 0, "cycles_per_bit", "must be > 0");
  require(cap_coeff > 0, "cap_coeff", "must be > 0");
  require(f_max > 0, "f_max", "must be > 0");
  require(p_max > 0, "p_max", "must be > 0");
  require(slot_len > 0, "slot_len", "must be > 0");
  require(data_unit > 0, "data_unit", "must be > 0");
  require(arrival_rate >= 0, "arrival_rate", "must be >= 0");
  require(lyapunov_v > 0, "lyapunov_v", "must be > 0");
  require(weights.size() == static_cast<size_t>(n_devices), "weights",
          "length must equal n_devices");
  require(mean_gain.size() == static_cast<size_t>(n_devices), "mean_gain",
          "length must equal n_devices");
  require(power_budget.size() == static_cast<size_t>(n_devices), "power_budget",
          "length must equal n_devices");
  for (double w : weights) require(w > 0, "weights", "entries must be > 0");
  for (double g : mean_gain) require(g > 0, "mean_gain", "entries must be > 0");
  for (double b : power_budget) require(b > 0, "power_budget", "entries must be > 0");
}

SystemConfig default_system_config(int n_devices) {
  SystemConfig cfg;
  cfg.n_devices = n_devices;
  cfg.weights.resize(n_devices);
  cfg.mean_gain.resize(n_devices);
  cfg.power_budget.assign(n_devices, 0.08);
  for (int i = 0; i < n_devices; ++i) {
    cfg.weights[i] = (i % 2 == 0) ? 1.0 : 1.5;  // device 1 is odd -> weight 1
    double frac = n_devices > 1 ? static_cast<double>(i) / (n_devices - 1) : 0.0;
    cfg.mean_gain[i] = 1e-5 * std::pow(10.0, -frac);  // one decade, 1e-5 .. 1e-6
  }
  return cfg;
}

namespace {

// Scalar or array field: scalars broadcast to n entries.
std::vector<double> broadcast(const json& v, int n, const std::string& field) {
  std::vector<double> out;
  if (v.is_array()) {
    for (const auto& e : v) out.push_back(e.get<double>());
    if (out.size() != static_cast<size_t>(n))
      throw ConfigError("config field '" + field + "': expected " + std::to_string(n) +
                        " entries, got " + std::to_string(out.size()));
  } else {
    out.assign(n, v.get<double>());
  }
  return out;
}

}  // namespace

SystemConfig system_config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  int n = doc.value("n_devices", 10);
  SystemConfig cfg = default_system_config(n);

  static const char* known[] = {
      "n_devices",   "es_tx_power", "harvest_eff",  "bandwidth",   "noise_power",
      "comm_overhead", "cycles_per_bit", "cap_coeff", "f_max",     "p_max",
      "slot_len",    "data_unit",   "weights",      "mean_gain",   "arrival_rate",
      "power_budget", "lyapunov_v", "rng_seed"};
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown config key '" + it.key() + "'");
  }

  cfg.es_tx_power = doc.value("es_tx_power", cfg.es_tx_power);
  cfg.harvest_eff = doc.value("harvest_eff", cfg.harvest_eff);
  cfg.bandwidth = doc.value("bandwidth", cfg.bandwidth);
  cfg.noise_power = doc.value("noise_power", cfg.noise_power);
  cfg.comm_overhead = doc.value("comm_overhead", cfg.comm_overhead);
  cfg.cycles_per_bit = doc.value("cycles_per_bit", cfg.cycles_per_bit);
  cfg.cap_coeff = doc.value("cap_coeff", cfg.cap_coeff);
  cfg.f_max = doc.value("f_max", cfg.f_max);
  cfg.p_max = doc.value("p_max", cfg.p_max);
  cfg.slot_len = doc.value("slot_len", cfg.slot_len);
  cfg.data_unit = doc.value("data_unit", cfg.data_unit);
  cfg.arrival_rate = doc.value("arrival_rate", cfg.arrival_rate);
  cfg.lyapunov_v = doc.value("lyapunov_v", cfg.lyapunov_v);
  cfg.rng_seed = doc.value("rng_seed", cfg.rng_seed);
  if (doc.contains("weights")) cfg.weights = broadcast(doc["weights"], n, "weights");
  if (doc.contains("mean_gain")) cfg.mean_gain = broadcast(doc["mean_gain"], n, "mean_gain");
  if (doc.contains("power_budget"))
    cfg.power_budget = broadcast(doc["power_budget"], n, "power_budget");

  cfg.validate();
  return cfg;
}

std::string system_config_to_json_text(const SystemConfig& cfg) {
  json doc;
  doc["n_devices"] = cfg.n_devices;
  doc["es_tx_power"] = cfg.es_tx_power;
  doc["harvest_eff"] = cfg.harvest_eff;
  doc["bandwidth"] = cfg.bandwidth;
  doc["noise_power"] = cfg.noise_power;
  doc["comm_overhead"] = cfg.comm_overhead;
  doc["cycles_per_bit"] = cfg.cycles_per_bit;
  doc["cap_coeff"] = cfg.cap_coeff;
  doc["f_max"] = cfg.f_max;
  doc["p_max"] = cfg.p_max;
  doc["slot_len"] = cfg.slot_len;
  doc["data_unit"] = cfg.data_unit;
  doc["weights"] = cfg.weights;
  doc["mean_gain"] = cfg.mean_gain;
  doc["arrival_rate"] = cfg.arrival_rate;
  doc["power_budget"] = cfg.power_budget;
  doc["lyapunov_v"] = cfg.lyapunov_v;
  doc["rng_seed"] = cfg.rng_seed;
  return doc.dump(2) + "\n";
}

}  // namespace mecsim
