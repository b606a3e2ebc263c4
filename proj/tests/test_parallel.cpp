#include <doctest.h>

#include "mecsim/baselines.hpp"
#include "mecsim/critic.hpp"

using namespace mecsim;

// The OpenMP candidate-scoring path must be indistinguishable from the
// serial reference: pure solvers, per-slot writes, no cross-candidate
// floating-point reduction.
TEST_SUITE("parallel") {

TEST_CASE("serial and parallel scoring agree bit for bit (wpt)") {
  SystemConfig cfg = default_system_config(8);
  Rng rng(80);
  SlotObservation obs;
  obs.gains = gen_channels(cfg, rng);
  obs.queues = QueueState::zeros(8);
  std::vector<std::vector<uint8_t>> candidates;
  for (int m = 0; m < 256; ++m) {
    std::vector<uint8_t> x(8);
    for (int i = 0; i < 8; ++i) x[i] = (m >> (7 - i)) & 1;
    candidates.push_back(x);
  }
  SolverTolerances tol;
  auto serial = score_candidates(cfg, obs, candidates, ScoreMode::wpt, tol, false);
  auto parallel = score_candidates(cfg, obs, candidates, ScoreMode::wpt, tol, true);
  CHECK(serial == parallel);
}

TEST_CASE("serial and parallel scoring agree bit for bit (lyapunov)") {
  SystemConfig cfg = default_system_config(8);
  Rng rng(81);
  SlotObservation obs;
  obs.gains = gen_channels(cfg, rng);
  obs.arrivals.assign(8, 0.0);
  obs.queues = QueueState::zeros(8);
  for (int i = 0; i < 8; ++i) {
    obs.queues.data_q[i] = 15.0 * rng.uniform();
    obs.queues.energy_q[i] = 40.0 * rng.uniform();
  }
  std::vector<std::vector<uint8_t>> candidates;
  for (int m = 0; m < 256; ++m) {
    std::vector<uint8_t> x(8);
    for (int i = 0; i < 8; ++i) x[i] = (m >> (7 - i)) & 1;
    candidates.push_back(x);
  }
  SolverTolerances tol;
  auto serial = score_candidates(cfg, obs, candidates, ScoreMode::lyapunov, tol, false);
  auto parallel = score_candidates(cfg, obs, candidates, ScoreMode::lyapunov, tol, true);
  CHECK(serial == parallel);
}

TEST_CASE("enumeration picks the same optimum either way") {
  SystemConfig cfg = default_system_config(9);
  Rng rng(82);
  for (int trial = 0; trial < 5; ++trial) {
    SlotObservation obs;
    obs.gains = gen_channels(cfg, rng);
    obs.queues = QueueState::zeros(9);
    BaselineResult serial = enumerate_opt(cfg, obs, ScoreMode::wpt, {}, false);
    BaselineResult parallel = enumerate_opt(cfg, obs, ScoreMode::wpt, {}, true);
    CHECK(serial.score == parallel.score);
    CHECK(serial.action.x == parallel.action.x);
  }
}

}  // TEST_SUITE
