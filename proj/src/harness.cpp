#include "mecsim/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "mecsim/errors.hpp"

namespace mecsim {

namespace {

using clock_type = std::chrono::steady_clock;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double elapsed_us(clock_type::time_point start) {
  return std::chrono::duration<double, std::micro>(clock_type::now() - start).count();
}

// Independent stream seeds derived from the run seed (splitmix64 step).
uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<std::vector<uint8_t>> all_binary_vectors(int n) {
  const size_t count = static_cast<size_t>(1) << n;
  std::vector<std::vector<uint8_t>> out(count);
  for (size_t m = 0; m < count; ++m) {
    out[m].resize(n);
    for (int i = 0; i < n; ++i)
      out[m][i] = static_cast<uint8_t>((m >> (n - 1 - i)) & 1);
  }
  return out;
}

// Swap every weight between the two base values of the initial config.
void apply_weight_flip(SystemConfig* cfg, double w_lo, double w_hi) {
  if (w_lo == w_hi) return;
  for (double& w : cfg->weights) w = (w == w_lo) ? w_hi : w_lo;
}

void apply_events(const ExperimentConfig& ec, long t, SystemConfig* cfg, double w_lo,
                  double w_hi) {
  for (const auto& ev : ec.events) {
    if (ev.slot != t) continue;
    if (ev.kind == "weight_flip")
      apply_weight_flip(cfg, w_lo, w_hi);
    else
      throw ConfigError("unknown event kind '" + ev.kind + "'");
  }
}

// Trailing-window mean tracker for the NCR series.
class RollingMean {
 public:
  explicit RollingMean(int window) : window_(window) {}
  double push(double v) {
    buf_.push_back(v);
    sum_ += v;
    if (buf_.size() > static_cast<size_t>(window_)) {
      sum_ -= buf_[head_];
      ++head_;
    }
    return sum_ / static_cast<double>(buf_.size() - head_);
  }

 private:
  int window_;
  size_t head_ = 0;
  double sum_ = 0.0;
  std::vector<double> buf_;
};

double percentile95(std::vector<double> xs) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  size_t idx = static_cast<size_t>(std::ceil(0.95 * xs.size()));
  return xs[std::min(idx == 0 ? 0 : idx - 1, xs.size() - 1)];
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
}

}  // namespace

std::vector<double> moving_average(const std::vector<double>& xs, int window) {
  RollingMean roll(window);
  std::vector<double> out;
  out.reserve(xs.size());
  for (double v : xs) out.push_back(roll.push(v));
  return out;
}

void ExperimentConfig::validate(const SystemConfig& cfg) const {
  if (slots < 1) throw ConfigError("experiment slots must be >= 1");
  if (metric_window < 1) throw ConfigError("metric_window must be >= 1");
  if (k_init < 0 || k_init > cfg.n_devices + 1)
    throw ConfigError("k_init must lie in [0, n_devices + 1] (0 = n_devices)");
  if (baselines_from < 0 || baselines_from > slots)
    throw ConfigError("baselines_from must lie in [0, slots]");
  for (const auto& ev : events) {
    if (ev.slot < 0 || ev.slot >= slots)
      throw ConfigError("event slot " + std::to_string(ev.slot) + " outside horizon");
    if (ev.kind != "weight_flip")
      throw ConfigError("unsupported event kind '" + ev.kind + "'");
  }
  if (scenario == Scenario::droo && enumeration && cfg.n_devices > 20)
    throw ConfigError("exact NCR denominator needs n_devices <= 20");
  if (exhaustive_candidates && cfg.n_devices > 20)
    throw ConfigError("exhaustive_candidates needs n_devices <= 20");
  solver_tol.validate();
}

RunResult run_droo(const ExperimentConfig& ec, const SystemConfig& cfg_in,
                   const TrainConfig& tc) {
  cfg_in.validate();
  ec.validate(cfg_in);
  if (ec.scenario != Scenario::droo)
    throw ConfigError("run_droo requires scenario = droo");

  SystemConfig cfg = cfg_in;
  const int n = cfg.n_devices;
  const double w_lo = *std::min_element(cfg.weights.begin(), cfg.weights.end());
  const double w_hi = *std::max_element(cfg.weights.begin(), cfg.weights.end());

  Rng channel_rng(mix_seed(ec.seed, 1));
  Rng noise_rng(mix_seed(ec.seed, 2));
  Rng train_rng(mix_seed(ec.seed, 3));
  Rng init_rng(mix_seed(ec.seed, 4));

  ReplayMemory memory(1024);
  TrainConfig tcv = tc;
  tcv.validate(memory.capacity());
  ActorModel model = ActorModel::init({n, 120, 80, n}, init_rng);
  AdamState adam = AdamState::init(model);
  FeatureScaling scaling = FeatureScaling::defaults(cfg);
  KSchedule ksched(ec.k_init > 0 ? ec.k_init : n);

  std::vector<std::vector<uint8_t>> exhaustive;
  if (ec.exhaustive_candidates) exhaustive = all_binary_vectors(n);
  std::vector<std::vector<uint8_t>> enum_candidates;
  if (ec.enumeration) enum_candidates = all_binary_vectors(n);

  RunResult run;
  run.records.reserve(ec.slots);
  RollingMean ncr_roll(ec.metric_window);
  double last_loss = kNaN;
  long train_steps = 0;
  std::vector<double> decision_times;
  decision_times.reserve(ec.slots);

  for (long t = 0; t < ec.slots; ++t) {
    apply_events(ec, t, &cfg, w_lo, w_hi);
    std::vector<double> h = gen_channels(cfg, channel_rng);
    SlotObservation obs;
    obs.t = t;
    obs.gains = h;
    obs.queues = QueueState::zeros(n);

    auto tic = clock_type::now();
    std::vector<double> feats = featurize(cfg, obs, ScoreMode::wpt, scaling);
    std::vector<double> xhat = model.forward(feats);
    std::vector<std::vector<uint8_t>> quantized;
    if (!ec.exhaustive_candidates)
      quantized = quantize(xhat, ksched.current_k, tcv.quantizer_kind, tcv.noise_sigma,
                           &noise_rng);
    const std::vector<std::vector<uint8_t>>& candidates =
        ec.exhaustive_candidates ? exhaustive : quantized;
    BestChoice choice =
        best_action(cfg, obs, candidates, ScoreMode::wpt, ec.solver_tol, ec.parallel);
    double decision_us = elapsed_us(tic);

    SlotRecord rec;
    rec.t = t;
    rec.utility = choice.best.score;
    rec.k_used = static_cast<int>(candidates.size());
    rec.chosen_index = static_cast<int>(choice.index) + 1;
    rec.decision_time_us = decision_us;
    rec.optimal_utility = kNaN;
    rec.ncr = kNaN;
    rec.ncr_ma = kNaN;
    rec.lc = kNaN;
    rec.ec = kNaN;
    rec.cd = kNaN;

    if (ec.enumeration) {
      BestChoice en = best_action(cfg, obs, enum_candidates, ScoreMode::wpt,
                                  ec.solver_tol, ec.parallel);
      rec.optimal_utility = en.best.score;
      rec.ncr = en.best.score > 0.0 ? choice.best.score / en.best.score : 1.0;
      if (rec.ncr > 1.0 + 1e-9)
        throw ContractError("NCR " + std::to_string(rec.ncr) +
                            " exceeds 1: enumeration missed the chosen action");
      rec.ncr_ma = ncr_roll.push(rec.ncr);
      if (run.summary.converged_at < 0 && rec.ncr_ma >= run.summary.convergence_threshold)
        run.summary.converged_at = t;
    }
    if (ec.baselines && t >= ec.baselines_from) {
      rec.lc = all_local(cfg, obs, ScoreMode::wpt, ec.solver_tol).score;
      rec.ec = all_edge(cfg, obs, ScoreMode::wpt, ec.solver_tol).score;
      rec.cd = coordinate_descent_auto(cfg, obs, ScoreMode::wpt, ec.solver_tol).score;
    }
    rec.d = wpt_outcome(cfg, h, choice.best.action).processed;

    memory.push(std::move(feats), candidates[choice.index]);
    ksched.record(rec.chosen_index);
    if ((t + 1) % tcv.train_interval == 0) {
      double loss = train_step(model, adam, memory, tcv, train_rng);
      if (!std::isnan(loss)) {
        last_loss = loss;
        ++train_steps;
      }
    }
    rec.loss = last_loss;
    if ((t + 1) % tcv.k_adapt_interval == 0) ksched.adapt(n);

    decision_times.push_back(decision_us);
    run.records.push_back(std::move(rec));
  }

  // Summary over the whole run (or the baseline window when enabled).
  RunSummary& s = run.summary;
  long win_from = ec.baselines ? ec.baselines_from : 0;
  double sum_u = 0.0, sum_lc = 0.0, sum_ec = 0.0, sum_cd = 0.0;
  long win_count = 0;
  for (const auto& r : run.records) {
    s.total_utility += r.utility;
    if (r.t >= win_from) {
      sum_u += r.utility;
      if (ec.baselines) {
        sum_lc += r.lc;
        sum_ec += r.ec;
        sum_cd += r.cd;
      }
      ++win_count;
    }
  }
  s.avg_utility = win_count > 0 ? sum_u / win_count : 0.0;
  s.avg_lc = ec.baselines && win_count > 0 ? sum_lc / win_count : kNaN;
  s.avg_ec = ec.baselines && win_count > 0 ? sum_ec / win_count : kNaN;
  s.avg_cd = ec.baselines && win_count > 0 ? sum_cd / win_count : kNaN;
  s.mean_decision_us = mean_of(decision_times);
  s.p95_decision_us = percentile95(decision_times);
  s.train_steps = train_steps;
  s.final_k = ksched.current_k;
  s.final_avg_queue.assign(n, 0.0);
  s.avg_power.assign(n, 0.0);

  run.checkpoint = Checkpoint{std::move(model), scaling, ksched.current_k};
  return run;
}

RunResult run_lydroo(const ExperimentConfig& ec, const SystemConfig& cfg_in,
                     const TrainConfig& tc, StochasticPolicy policy) {
  cfg_in.validate();
  ec.validate(cfg_in);
  if (ec.scenario != Scenario::lydroo)
    throw ConfigError("run_lydroo requires scenario = lydroo");

  SystemConfig cfg = cfg_in;
  const int n = cfg.n_devices;
  const double w_lo = *std::min_element(cfg.weights.begin(), cfg.weights.end());
  const double w_hi = *std::max_element(cfg.weights.begin(), cfg.weights.end());

  Rng channel_rng(mix_seed(ec.seed, 1));
  Rng noise_rng(mix_seed(ec.seed, 2));
  Rng train_rng(mix_seed(ec.seed, 3));
  Rng init_rng(mix_seed(ec.seed, 4));
  Rng arrival_rng(mix_seed(ec.seed, 5));

  ReplayMemory memory(1024);
  TrainConfig tcv = tc;
  tcv.validate(memory.capacity());
  ActorModel model = ActorModel::init({4 * n, 120, 80, n}, init_rng);
  AdamState adam = AdamState::init(model);
  FeatureScaling scaling = FeatureScaling::defaults(cfg);
  KSchedule ksched(ec.k_init > 0 ? ec.k_init : n);
  BudgetTracker tracker = BudgetTracker::init(cfg, ec.slots);

  QueueState state = QueueState::zeros(n);
  std::vector<double> cum_energy(n, 0.0);
  RunResult run;
  run.records.reserve(ec.slots);
  double last_loss = kNaN;
  long train_steps = 0;
  std::vector<double> decision_times;
  decision_times.reserve(ec.slots);

  for (long t = 0; t < ec.slots; ++t) {
    apply_events(ec, t, &cfg, w_lo, w_hi);
    SlotObservation obs;
    obs.t = t;
    obs.gains = gen_channels(cfg, channel_rng);
    obs.arrivals = gen_arrivals(cfg, arrival_rng);
    obs.queues = state;

    SlotRecord rec;
    rec.t = t;
    rec.optimal_utility = kNaN;
    rec.ncr = kNaN;
    rec.ncr_ma = kNaN;
    rec.lc = kNaN;
    rec.ec = kNaN;
    rec.cd = kNaN;

    OffloadAction action;
    auto tic = clock_type::now();
    if (policy == StochasticPolicy::actor) {
      std::vector<double> feats = featurize(cfg, obs, ScoreMode::lyapunov, scaling);
      std::vector<double> xhat = model.forward(feats);
      std::vector<std::vector<uint8_t>> candidates = quantize(
          xhat, ksched.current_k, tcv.quantizer_kind, tcv.noise_sigma, &noise_rng);
      BestChoice choice = best_action(cfg, obs, candidates, ScoreMode::lyapunov,
                                      ec.solver_tol, ec.parallel);
      rec.decision_time_us = elapsed_us(tic);
      rec.k_used = static_cast<int>(candidates.size());
      rec.chosen_index = static_cast<int>(choice.index) + 1;
      action = std::move(choice.best.action);

      memory.push(std::move(feats), candidates[choice.index]);
      ksched.record(rec.chosen_index);
      if ((t + 1) % tcv.train_interval == 0) {
        double loss = train_step(model, adam, memory, tcv, train_rng);
        if (!std::isnan(loss)) {
          last_loss = loss;
          ++train_steps;
        }
      }
      if ((t + 1) % tcv.k_adapt_interval == 0) ksched.adapt(n);
    } else if (policy == StochasticPolicy::lycd) {
      BaselineResult res =
          coordinate_descent_auto(cfg, obs, ScoreMode::lyapunov, ec.solver_tol);
      rec.decision_time_us = elapsed_us(tic);
      action = std::move(res.action);
    } else {
      BaselineResult res = myopic(cfg, obs, tracker);
      rec.decision_time_us = elapsed_us(tic);
      action = std::move(res.action);
    }

    auto [score, outcome] = lyapunov_score(cfg, obs, action);
    state = step_queues(cfg, state, outcome, obs.arrivals);

    rec.utility = score;
    rec.loss = last_loss;
    rec.q = state.data_q;
    rec.y = state.energy_q;
    rec.e = outcome.energy;
    rec.d = outcome.processed;
    rec.p_avg.resize(n);
    for (int i = 0; i < n; ++i) {
      cum_energy[i] += outcome.energy[i];
      rec.p_avg[i] = cum_energy[i] / (static_cast<double>(t + 1) * cfg.slot_len);
    }
    decision_times.push_back(rec.decision_time_us);
    run.records.push_back(std::move(rec));
  }

  RunSummary& s = run.summary;
  s.final_avg_queue.assign(n, 0.0);
  long q_from = ec.slots - ec.slots / 4;
  long q_count = 0;
  for (const auto& r : run.records) {
    s.total_utility += r.utility;
    if (r.t >= q_from) {
      for (int i = 0; i < n; ++i) s.final_avg_queue[i] += r.q[i];
      ++q_count;
    }
  }
  if (q_count > 0)
    for (double& v : s.final_avg_queue) v /= static_cast<double>(q_count);
  s.avg_power.resize(n);
  for (int i = 0; i < n; ++i)
    s.avg_power[i] = cum_energy[i] / (static_cast<double>(ec.slots) * cfg.slot_len);
  s.avg_utility = run.records.empty() ? 0.0
                                      : s.total_utility / static_cast<double>(ec.slots);
  s.avg_lc = kNaN;
  s.avg_ec = kNaN;
  s.avg_cd = kNaN;
  s.mean_decision_us = mean_of(decision_times);
  s.p95_decision_us = percentile95(decision_times);
  s.train_steps = train_steps;
  s.final_k = ksched.current_k;

  run.checkpoint = Checkpoint{std::move(model), scaling, ksched.current_k};
  return run;
}

double estimate_capacity(const SystemConfig& cfg, const std::vector<double>& probe_lambdas,
                         long horizon, uint64_t seed) {
  if (probe_lambdas.empty())
    throw ConfigError("estimate_capacity: need at least one probe");
  double capacity = -1.0;
  for (double probe : probe_lambdas) {
    if (probe < 0) throw ConfigError("estimate_capacity: probes must be >= 0");
    SystemConfig probe_cfg = cfg;
    probe_cfg.arrival_rate = probe;
    ExperimentConfig ec;
    ec.scenario = Scenario::lydroo;
    ec.slots = horizon;
    ec.seed = seed;
    ec.enumeration = false;
    RunResult run = run_lydroo(ec, probe_cfg, TrainConfig{}, StochasticPolicy::lycd);

    auto window_mean = [&](long from, long to) {
      double sum = 0.0;
      long count = 0;
      for (long t = from; t < to; ++t) {
        sum += mean_of(run.records[t].q);
        ++count;
      }
      return count > 0 ? sum / count : 0.0;
    };
    double q2 = window_mean(horizon / 4, horizon / 2);
    double q4 = window_mean(horizon - horizon / 4, horizon);
    bool stable = q4 <= std::max(2.0 * q2, 1e-9);
    if (stable) capacity = std::max(capacity, probe);
  }
  if (capacity < 0)
    throw ConfigError(
        "estimate_capacity: no probe was stable; try smaller probe_lambdas");
  return capacity;
}

namespace {

SystemConfig config_for_n(const SystemConfig& tmpl, int n) {
  SystemConfig cfg = default_system_config(n);
  cfg.es_tx_power = tmpl.es_tx_power;
  cfg.harvest_eff = tmpl.harvest_eff;
  cfg.bandwidth = tmpl.bandwidth;
  cfg.noise_power = tmpl.noise_power;
  cfg.comm_overhead = tmpl.comm_overhead;
  cfg.cycles_per_bit = tmpl.cycles_per_bit;
  cfg.cap_coeff = tmpl.cap_coeff;
  cfg.f_max = tmpl.f_max;
  cfg.p_max = tmpl.p_max;
  cfg.slot_len = tmpl.slot_len;
  cfg.data_unit = tmpl.data_unit;
  cfg.arrival_rate = tmpl.arrival_rate;
  cfg.lyapunov_v = tmpl.lyapunov_v;
  return cfg;
}

}  // namespace

std::vector<BenchCell> bench_runtime(const std::vector<std::string>& methods,
                                     const std::vector<int>& n_list, int trials,
                                     const SystemConfig& cfg_template,
                                     const std::map<int, Checkpoint>& checkpoints,
                                     uint64_t seed) {
  if (trials < 1) throw ConfigError("bench trials must be >= 1");
  std::vector<BenchCell> cells;
  const SolverTolerances tol;
  for (int n : n_list) {
    SystemConfig cfg = config_for_n(cfg_template, n);
    for (const std::string& method : methods) {
      if (method == "enum" && n > 20)
        throw ConfigError("bench: enum needs n <= 20");
      const Checkpoint* ckpt = nullptr;
      if (method == "droo") {
        auto it = checkpoints.find(n);
        if (it == checkpoints.end())
          throw ConfigError("bench: no checkpoint supplied for droo at n = " +
                            std::to_string(n));
        ckpt = &it->second;
        if (ckpt->model.input_dim() != n)
          throw ConfigError("bench: checkpoint input dim " +
                            std::to_string(ckpt->model.input_dim()) +
                            " does not match n = " + std::to_string(n));
      }

      std::vector<double> times;
      times.reserve(trials);
      for (int trial = 0; trial < trials; ++trial) {
        Rng rng(mix_seed(seed, static_cast<uint64_t>(n) * 100003 + trial));
        SlotObservation obs;
        obs.t = trial;
        obs.gains = gen_channels(cfg, rng);
        obs.queues = QueueState::zeros(n);

        // Timing runs are pinned to sequential execution.
        auto tic = clock_type::now();
        if (method == "droo") {
          std::vector<double> feats =
              featurize(cfg, obs, ScoreMode::wpt, ckpt->scaling);
          std::vector<double> xhat = ckpt->model.forward(feats);
          std::vector<std::vector<uint8_t>> candidates =
              quantize(xhat, ckpt->final_k, QuantizerKind::order_preserving, 0.0, nullptr);
          best_action(cfg, obs, candidates, ScoreMode::wpt, tol, false);
        } else if (method == "cd") {
          coordinate_descent_auto(cfg, obs, ScoreMode::wpt, tol);
        } else if (method == "enum") {
          enumerate_opt(cfg, obs, ScoreMode::wpt, tol, false);
        } else if (method == "lc") {
          all_local(cfg, obs, ScoreMode::wpt, tol);
        } else if (method == "ec") {
          all_edge(cfg, obs, ScoreMode::wpt, tol);
        } else {
          throw ConfigError("bench: unknown method '" + method + "'");
        }
        times.push_back(elapsed_us(tic));
      }
      cells.push_back({method, n, trials, mean_of(times), percentile95(times)});
    }
  }
  return cells;
}

}  // namespace mecsim
