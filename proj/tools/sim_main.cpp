// Command-line front end: slot-loop experiments, method benchmarks,
// solver-vs-oracle checks, and tidy CSV extraction from run directories.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mecsim/config_doc.hpp"
#include "mecsim/errors.hpp"
#include "mecsim/harness.hpp"

namespace {

using namespace mecsim;

struct RunArgs {
  std::string config_path;
  long slots = -1;
  long seed = -1;
  std::string out_dir;
};

FullConfig load_run_config(const RunArgs& args, Scenario scenario) {
  FullConfig fc;
  if (!args.config_path.empty()) {
    fc = full_config_from_file(args.config_path);
  } else {
    fc.system = default_system_config();
    fc.experiment.scenario = scenario;
    fc.experiment.slots = scenario == Scenario::droo ? 10000 : 20000;
    fc.experiment.enumeration = scenario == Scenario::droo;
  }
  if (fc.experiment.scenario != scenario)
    throw ConfigError("config scenario does not match the subcommand");
  if (args.slots > 0) fc.experiment.slots = args.slots;
  if (args.seed >= 0) fc.experiment.seed = static_cast<uint64_t>(args.seed);
  if (!args.out_dir.empty()) fc.experiment.output_dir = args.out_dir;
  return fc;
}

int run_sim(const RunArgs& args, Scenario scenario) {
  FullConfig fc = load_run_config(args, scenario);
  RunResult run = scenario == Scenario::droo
                      ? run_droo(fc.experiment, fc.system, fc.training)
                      : run_lydroo(fc.experiment, fc.system, fc.training);
  if (!fc.experiment.output_dir.empty())
    write_run_dir(run, fc.experiment, fc.system, fc.training, fc.experiment.output_dir);

  const RunSummary& s = run.summary;
  std::printf("slots: %ld\n", static_cast<long>(run.records.size()));
  if (scenario == Scenario::droo) {
    std::printf("converged_at: %ld (moving-average NCR >= %g)\n", s.converged_at,
                s.convergence_threshold);
    if (!run.records.empty())
      std::printf("final ncr_ma: %.6f\n", run.records.back().ncr_ma);
  } else {
    double q = 0.0, p = 0.0;
    for (double v : s.final_avg_queue) q += v;
    for (double v : s.avg_power) p += v;
    std::printf("final avg queue (mean over devices): %.4f\n",
                q / s.final_avg_queue.size());
    std::printf("avg power (mean over devices): %.6f W\n", p / s.avg_power.size());
  }
  std::printf("mean decision time: %.1f us (p95 %.1f us)\n", s.mean_decision_us,
              s.p95_decision_us);
  std::printf("train steps: %ld, final K: %d\n", s.train_steps, s.final_k);
  if (!fc.experiment.output_dir.empty())
    std::printf("run directory: %s\n", fc.experiment.output_dir.c_str());
  return 0;
}

int run_bench(const std::string& methods_csv, const std::string& n_csv, int trials,
              const std::vector<std::string>& checkpoint_paths, const std::string& out,
              long seed) {
  std::vector<std::string> methods;
  for (size_t pos = 0; pos < methods_csv.size();) {
    size_t comma = methods_csv.find(',', pos);
    if (comma == std::string::npos) comma = methods_csv.size();
    methods.push_back(methods_csv.substr(pos, comma - pos));
    pos = comma + 1;
  }
  std::vector<int> n_list;
  for (size_t pos = 0; pos < n_csv.size();) {
    size_t comma = n_csv.find(',', pos);
    if (comma == std::string::npos) comma = n_csv.size();
    n_list.push_back(std::stoi(n_csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }

  std::map<int, Checkpoint> checkpoints;
  for (const auto& path : checkpoint_paths) {
    Checkpoint ckpt = checkpoint_load(path);
    checkpoints[ckpt.model.input_dim()] = std::move(ckpt);
  }

  std::vector<BenchCell> cells = bench_runtime(methods, n_list, trials,
                                               default_system_config(),
                                               checkpoints, static_cast<uint64_t>(seed));
  std::printf("%-8s %6s %8s %12s %12s\n", "method", "n", "trials", "mean_us", "p95_us");
  for (const auto& c : cells)
    std::printf("%-8s %6d %8d %12.1f %12.1f\n", c.method.c_str(), c.n, c.trials,
                c.mean_us, c.p95_us);
  if (!out.empty()) write_bench_csv(cells, out);
  return 0;
}

int run_oracle_check(int instances, int n, const std::string& mode_str, long seed) {
  ScoreMode mode;
  if (mode_str == "wpt")
    mode = ScoreMode::wpt;
  else if (mode_str == "lyapunov")
    mode = ScoreMode::lyapunov;
  else
    throw ConfigError("oracle-check: mode must be wpt or lyapunov");
  if (mode == ScoreMode::lyapunov && n > 2)
    throw ConfigError("oracle-check: lyapunov mode supports n <= 2");

  SystemConfig cfg = default_system_config(n);
  Rng rng(static_cast<uint64_t>(seed));
  double worst = 0.0;
  int worst_at = -1;
  for (int it = 0; it < instances; ++it) {
    SlotObservation obs;
    obs.t = it;
    obs.gains = gen_channels(cfg, rng);
    obs.queues = QueueState::zeros(n);
    std::vector<uint8_t> x(n, 0);
    if (mode == ScoreMode::wpt) {
      // random decision with at most 3 offloaders (oracle guard)
      int offs = 0;
      for (int i = 0; i < n && offs < 3; ++i)
        if (rng.uniform() < 0.5) {
          x[i] = 1;
          ++offs;
        }
      ScoredAction solver = solve_wpt(cfg, obs.gains, x, {});
      ScoredAction oracle = oracle_grid(cfg, obs, x, mode, 0.01);
      double rel = std::abs(solver.score - oracle.score) /
                   std::max({std::abs(oracle.score), std::abs(solver.score), 1e-12});
      if (rel > worst) {
        worst = rel;
        worst_at = it;
      }
    } else {
      for (int i = 0; i < n; ++i) {
        obs.queues.data_q[i] = 30.0 * rng.uniform();
        obs.queues.energy_q[i] = 50.0 * rng.uniform();
        x[i] = rng.uniform() < 0.5 ? 1 : 0;
      }
      ScoredAction solver = solve_lyapunov(cfg, obs, x, {});
      ScoredAction oracle = oracle_grid(cfg, obs, x, mode, 0.02);
      double margin = oracle.score > 1e-9 ? solver.score / oracle.score : 1.0;
      double rel = 1.0 - std::min(margin, 1.0);
      if (rel > worst) {
        worst = rel;
        worst_at = it;
      }
    }
  }
  std::printf("%d instances, n=%d, mode=%s: worst %s %.3e (instance %d)\n", instances,
              n, mode_str.c_str(),
              mode == ScoreMode::wpt ? "relative error" : "optimality gap", worst,
              worst_at);
  bool ok = mode == ScoreMode::wpt ? worst <= 1e-3 : worst <= 0.02;
  std::printf("%s\n", ok ? "OK" : "FAIL");
  return ok ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slot-driven edge offloading experiments"};
  app.require_subcommand(1);

  RunArgs droo_args, lydroo_args;
  auto* droo_cmd = app.add_subcommand("droo", "energy-harvesting scenario slot loop");
  droo_cmd->add_option("--config", droo_args.config_path, "config document (JSON)");
  droo_cmd->add_option("--slots", droo_args.slots, "horizon override");
  droo_cmd->add_option("--seed", droo_args.seed, "seed override");
  droo_cmd->add_option("--out", droo_args.out_dir, "run directory");

  auto* lydroo_cmd = app.add_subcommand("lydroo", "stochastic scenario slot loop");
  lydroo_cmd->add_option("--config", lydroo_args.config_path, "config document (JSON)");
  lydroo_cmd->add_option("--slots", lydroo_args.slots, "horizon override");
  lydroo_cmd->add_option("--seed", lydroo_args.seed, "seed override");
  lydroo_cmd->add_option("--out", lydroo_args.out_dir, "run directory");

  std::string bench_methods = "cd,lc,ec";
  std::string bench_n = "10";
  int bench_trials = 100;
  long bench_seed = 1;
  std::vector<std::string> bench_ckpts;
  std::string bench_out;
  auto* bench_cmd = app.add_subcommand("bench", "per-decision latency of each method");
  bench_cmd->add_option("--methods", bench_methods, "comma list: droo,cd,enum,lc,ec");
  bench_cmd->add_option("--n", bench_n, "comma list of device counts");
  bench_cmd->add_option("--trials", bench_trials, "instances per cell");
  bench_cmd->add_option("--checkpoint", bench_ckpts,
                        "trained actor checkpoint (repeat per device count)");
  bench_cmd->add_option("--out", bench_out, "bench.csv path");
  bench_cmd->add_option("--seed", bench_seed, "instance seed");

  int oc_instances = 200;
  int oc_n = 4;
  std::string oc_mode = "wpt";
  long oc_seed = 7;
  auto* oracle_cmd = app.add_subcommand("oracle-check", "solver vs brute-force grid");
  oracle_cmd->add_option("--instances", oc_instances, "random instances");
  oracle_cmd->add_option("--n", oc_n, "device count");
  oracle_cmd->add_option("--mode", oc_mode, "wpt or lyapunov");
  oracle_cmd->add_option("--seed", oc_seed, "instance seed");

  std::string pd_run, pd_what, pd_out = "-";
  auto* plot_cmd = app.add_subcommand("plotdata", "tidy CSV from a run directory");
  plot_cmd->add_option("--run", pd_run, "run directory")->required();
  plot_cmd->add_option("--what", pd_what, "ncr|loss|queues|power|bench")->required();
  plot_cmd->add_option("--out", pd_out, "output path (default stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (droo_cmd->parsed()) return run_sim(droo_args, Scenario::droo);
    if (lydroo_cmd->parsed()) return run_sim(lydroo_args, Scenario::lydroo);
    if (bench_cmd->parsed())
      return run_bench(bench_methods, bench_n, bench_trials, bench_ckpts, bench_out,
                       bench_seed);
    if (oracle_cmd->parsed())
      return run_oracle_check(oc_instances, oc_n, oc_mode, oc_seed);
    if (plot_cmd->parsed()) {
      if (pd_out == "-") {
        std::string tmp = pd_run + "/.plotdata.tmp";
        plotdata(pd_run, pd_what, tmp);
        std::ifstream in(tmp);
        std::cout << in.rdbuf();
        std::remove(tmp.c_str());
      } else {
        plotdata(pd_run, pd_what, pd_out);
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const FeasibilityError& e) {
    std::cerr << "feasibility error: " << e.what() << "\n";
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "invariant breach: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
