// Serial vs OpenMP throughput of the candidate-scoring kernels: full 2^N
// enumeration batches (wpt) and K-candidate batches (lyapunov). The serial
// path is the reference implementation the tests compare against; this
// target reports the speedup the parallel path buys on this machine.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "mecsim/baselines.hpp"
#include "mecsim/critic.hpp"
#include "mecsim/rng.hpp"

using namespace mecsim;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
  auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; ++r) fn();
  auto stop = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(stop - start).count() / reps;
}

std::vector<std::vector<uint8_t>> all_vectors(int n) {
  std::vector<std::vector<uint8_t>> out(static_cast<size_t>(1) << n);
  for (size_t m = 0; m < out.size(); ++m) {
    out[m].resize(n);
    for (int i = 0; i < n; ++i)
      out[m][i] = static_cast<uint8_t>((m >> (n - 1 - i)) & 1);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int n = argc > 1 ? std::atoi(argv[1]) : 10;
  int reps = argc > 2 ? std::atoi(argv[2]) : 5;

#ifdef _OPENMP
  std::printf("OpenMP: %d threads\n", omp_get_max_threads());
#else
  std::printf("OpenMP: disabled\n");
#endif

  SystemConfig cfg = default_system_config(n);
  Rng rng(42);
  SlotObservation obs;
  obs.gains = gen_channels(cfg, rng);
  obs.queues = QueueState::zeros(n);
  for (int i = 0; i < n; ++i) {
    obs.queues.data_q[i] = 5.0 + 10.0 * rng.uniform();
    obs.queues.energy_q[i] = 20.0 * rng.uniform();
  }
  obs.arrivals.assign(n, 0.0);
  SolverTolerances tol;

  std::printf("%-34s %10s %10s %8s\n", "kernel", "serial_ms", "omp_ms", "speedup");

  {
    auto candidates = all_vectors(n);
    double serial = time_ms(
        [&] { score_candidates(cfg, obs, candidates, ScoreMode::wpt, tol, false); },
        reps);
    double par = time_ms(
        [&] { score_candidates(cfg, obs, candidates, ScoreMode::wpt, tol, true); },
        reps);
    std::printf("%-34s %10.2f %10.2f %7.2fx\n",
                ("wpt enumeration (2^" + std::to_string(n) + ")").c_str(), serial, par,
                serial / par);
    // Sanity: both paths must agree bit for bit.
    auto a = score_candidates(cfg, obs, candidates, ScoreMode::wpt, tol, false);
    auto b = score_candidates(cfg, obs, candidates, ScoreMode::wpt, tol, true);
    if (a != b) {
      std::printf("MISMATCH between serial and parallel scores\n");
      return 2;
    }
  }
  {
    auto candidates = all_vectors(n);
    double serial = time_ms(
        [&] { score_candidates(cfg, obs, candidates, ScoreMode::lyapunov, tol, false); },
        reps);
    double par = time_ms(
        [&] { score_candidates(cfg, obs, candidates, ScoreMode::lyapunov, tol, true); },
        reps);
    std::printf("%-34s %10.2f %10.2f %7.2fx\n",
                ("lyapunov enumeration (2^" + std::to_string(n) + ")").c_str(), serial,
                par, serial / par);
  }
  {
    double serial = time_ms(
        [&] { enumerate_opt(cfg, obs, ScoreMode::wpt, tol, false); }, reps);
    double par = time_ms(
        [&] { enumerate_opt(cfg, obs, ScoreMode::wpt, tol, true); }, reps);
    std::printf("%-34s %10.2f %10.2f %7.2fx\n", "enumerate_opt (wpt)", serial, par,
                serial / par);
  }
  return 0;
}
