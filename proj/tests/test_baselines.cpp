#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mecsim/baselines.hpp"
#include "mecsim/errors.hpp"

using namespace mecsim;

namespace {

SlotObservation wpt_obs(const SystemConfig& cfg, Rng& rng) {
  SlotObservation obs;
  obs.gains = gen_channels(cfg, rng);
  obs.queues = QueueState::zeros(cfg.n_devices);
  obs.arrivals.assign(cfg.n_devices, 0.0);
  return obs;
}

}  // namespace

TEST_SUITE("baselines") {

TEST_CASE("enumeration on one device picks the better of the two options") {
  SystemConfig cfg = default_system_config(1);
  Rng rng(60);
  SlotObservation obs = wpt_obs(cfg, rng);
  BaselineResult res = enumerate_opt(cfg, obs, ScoreMode::wpt);
  double local = solve_wpt(cfg, obs.gains, {0}).score;
  double edge = solve_wpt(cfg, obs.gains, {1}).score;
  CHECK(res.score == doctest::Approx(std::max(local, edge)).epsilon(1e-12));
  CHECK(res.solver_calls == 2);
}

TEST_CASE("enumeration equals best_action over all 16 vectors at N=4") {
  SystemConfig cfg = default_system_config(4);
  Rng rng(61);
  SlotObservation obs = wpt_obs(cfg, rng);
  BaselineResult res = enumerate_opt(cfg, obs, ScoreMode::wpt);
  std::vector<std::vector<uint8_t>> all;
  for (int m = 0; m < 16; ++m) {
    std::vector<uint8_t> x(4);
    for (int i = 0; i < 4; ++i) x[i] = (m >> (3 - i)) & 1;
    all.push_back(x);
  }
  BestChoice choice = best_action(cfg, obs, all, ScoreMode::wpt);
  CHECK(res.score == doctest::Approx(choice.best.score).epsilon(1e-12));
  CHECK(res.action.x == choice.best.action.x);
}

TEST_CASE("enumeration guard at N > 20") {
  SystemConfig cfg = default_system_config(21);
  Rng rng(62);
  SlotObservation obs = wpt_obs(cfg, rng);
  CHECK_THROWS_AS(enumerate_opt(cfg, obs, ScoreMode::wpt), ConfigError);
}

TEST_CASE("coordinate descent on one device is exact") {
  SystemConfig cfg = default_system_config(1);
  Rng rng(63);
  SlotObservation obs = wpt_obs(cfg, rng);
  BaselineResult cd = coordinate_descent(cfg, obs, ScoreMode::wpt, {0});
  BaselineResult en = enumerate_opt(cfg, obs, ScoreMode::wpt);
  CHECK(cd.score == doctest::Approx(en.score).epsilon(1e-12));
}

TEST_CASE("coordinate descent stops at a local optimum within N^2 flips") {
  SystemConfig cfg = default_system_config(6);
  Rng rng(64);
  for (int trial = 0; trial < 10; ++trial) {
    SlotObservation obs = wpt_obs(cfg, rng);
    BaselineResult cd = coordinate_descent_auto(cfg, obs, ScoreMode::wpt);
    // every single flip of the converged point must be non-improving
    std::vector<uint8_t> x = cd.action.x;
    for (int i = 0; i < 6; ++i) {
      x[i] ^= 1;
      CHECK(solve_wpt(cfg, obs.gains, x).score <= cd.score + 1e-12);
      x[i] ^= 1;
    }
    // budget: init pair + at most N^2 sweeps of N flips each
    CHECK(cd.solver_calls <= 2 + (1 + 36) * 6 + 36);
  }
}

TEST_CASE("fixed policies optimize their continuous part") {
  SystemConfig cfg = default_system_config(10);
  Rng rng(65);
  SlotObservation obs = wpt_obs(cfg, rng);
  BaselineResult lc = all_local(cfg, obs, ScoreMode::wpt);
  BaselineResult ec = all_edge(cfg, obs, ScoreMode::wpt);
  double expect = 0.0;
  for (int i = 0; i < 10; ++i)
    expect += cfg.weights[i] * cfg.eta() * std::cbrt(obs.gains[i] * cfg.slot_len);
  CHECK(lc.score == doctest::Approx(expect).epsilon(1e-12));
  CHECK(ec.score > 0.0);

  // vanishing channel: the edge policy's score collapses
  SystemConfig weak = default_system_config(1);
  SlotObservation wobs;
  wobs.gains = {1e-14};
  wobs.queues = QueueState::zeros(1);
  CHECK(all_edge(weak, wobs, ScoreMode::wpt).score <
        all_local(weak, wobs, ScoreMode::wpt).score);
}

TEST_CASE("dominance chain: enumeration >= CD >= max(LC, EC)") {
  Rng rng(66);
  for (int trial = 0; trial < 8; ++trial) {
    int n = 4 + static_cast<int>(rng.integer(5));
    SystemConfig cfg = default_system_config(n);
    SlotObservation obs = wpt_obs(cfg, rng);
    BaselineResult en = enumerate_opt(cfg, obs, ScoreMode::wpt);
    BaselineResult cd = coordinate_descent_auto(cfg, obs, ScoreMode::wpt);
    BaselineResult lc = all_local(cfg, obs, ScoreMode::wpt);
    BaselineResult ec = all_edge(cfg, obs, ScoreMode::wpt);
    CHECK(en.score >= cd.score - 1e-9);
    CHECK(cd.score >= std::max(lc.score, ec.score) - 1e-9);
  }
}

TEST_CASE("dominance chain holds in lyapunov mode too") {
  Rng rng(67);
  for (int trial = 0; trial < 5; ++trial) {
    int n = 4;
    SystemConfig cfg = default_system_config(n);
    SlotObservation obs;
    obs.gains = gen_channels(cfg, rng);
    obs.arrivals.assign(n, 0.0);
    obs.queues = QueueState::zeros(n);
    for (int i = 0; i < n; ++i) {
      obs.queues.data_q[i] = 20.0 * rng.uniform();
      obs.queues.energy_q[i] = 50.0 * rng.uniform();
    }
    BaselineResult en = enumerate_opt(cfg, obs, ScoreMode::lyapunov);
    BaselineResult cd = coordinate_descent_auto(cfg, obs, ScoreMode::lyapunov);
    BaselineResult lc = all_local(cfg, obs, ScoreMode::lyapunov);
    BaselineResult ec = all_edge(cfg, obs, ScoreMode::lyapunov);
    CHECK(en.score >= cd.score - 1e-9);
    CHECK(cd.score >= std::max(lc.score, ec.score) - 1e-9);
  }
}

TEST_CASE("scores re-validate against the mode's score function") {
  SystemConfig cfg = default_system_config(5);
  Rng rng(68);
  SlotObservation obs = wpt_obs(cfg, rng);
  for (const BaselineResult& res :
       {enumerate_opt(cfg, obs, ScoreMode::wpt),
        coordinate_descent_auto(cfg, obs, ScoreMode::wpt),
        all_local(cfg, obs, ScoreMode::wpt), all_edge(cfg, obs, ScoreMode::wpt)}) {
    double re = utility_wpt(cfg, obs.gains, res.action);
    CHECK(res.score == doctest::Approx(re).epsilon(1e-9));
  }
}

TEST_CASE("myopic: fresh budgets leave every device eligible") {
  SystemConfig cfg = default_system_config(4);
  BudgetTracker tracker = BudgetTracker::init(cfg, 1000);
  for (int i = 0; i < 4; ++i) CHECK(tracker.eligible(i));
  Rng rng(69);
  SlotObservation obs;
  obs.gains = gen_channels(cfg, rng);
  obs.arrivals.assign(4, 0.0);
  obs.queues = QueueState::zeros(4);
  for (int i = 0; i < 4; ++i) obs.queues.data_q[i] = 5.0;
  BaselineResult res = myopic(cfg, obs, tracker);
  double spent = 0.0;
  for (double e : tracker.spent) spent += e;
  CHECK(spent > 0.0);  // somebody worked
  auto re = lyapunov_score(cfg, obs, res.action);
  CHECK(res.score == doctest::Approx(re.first).epsilon(1e-9));
}

TEST_CASE("myopic: an exhausted device is forced idle") {
  SystemConfig cfg = default_system_config(2);
  BudgetTracker tracker = BudgetTracker::init(cfg, 100);
  tracker.spent[0] = tracker.budget[0];  // device 0 done for the horizon
  Rng rng(70);
  SlotObservation obs;
  obs.gains = gen_channels(cfg, rng);
  obs.arrivals.assign(2, 0.0);
  obs.queues = QueueState::zeros(2);
  obs.queues.data_q = {10.0, 10.0};
  BaselineResult res = myopic(cfg, obs, tracker);
  CHECK(res.action.cpu_freq[0] == 0.0);
  CHECK(res.action.time_shares[0] == 0.0);
  CHECK(res.action.tx_power[0] == 0.0);
  CHECK(tracker.spent[0] == tracker.budget[0]);  // nothing new charged
}

TEST_CASE("myopic average power respects the budget plus one-slot overshoot") {
  SystemConfig cfg = default_system_config(3);
  cfg.arrival_rate = 5.0;
  const long horizon = 400;
  BudgetTracker tracker = BudgetTracker::init(cfg, horizon);
  Rng rng(71);
  QueueState state = QueueState::zeros(3);
  for (long t = 0; t < horizon; ++t) {
    SlotObservation obs;
    obs.t = t;
    obs.gains = gen_channels(cfg, rng);
    obs.arrivals = gen_arrivals(cfg, rng);
    obs.queues = state;
    BaselineResult res = myopic(cfg, obs, tracker);
    auto [score, outcome] = lyapunov_score(cfg, obs, res.action);
    state = step_queues(cfg, state, outcome, obs.arrivals);
  }
  double max_slot_energy =
      std::max(cfg.cap_coeff * cfg.f_max * cfg.f_max * cfg.f_max * cfg.slot_len,
               cfg.p_max * cfg.slot_len);
  for (int i = 0; i < 3; ++i) {
    double avg_power = tracker.spent[i] / (horizon * cfg.slot_len);
    CHECK(avg_power <= cfg.power_budget[i] + max_slot_energy / horizon + 1e-12);
  }
}

}  // TEST_SUITE
