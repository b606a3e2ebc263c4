#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mecsim/config_doc.hpp"
#include "mecsim/errors.hpp"
#include "mecsim/harness.hpp"

namespace mecsim {

using nlohmann::json;

namespace {

// 9 significant digits, the documented CSV float format.
std::string fmt9(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write file: " + path);
  return out;
}

bool is_lydroo(const RunResult& run) {
  return !run.records.empty() && !run.records.front().q.empty();
}

int device_count(const RunResult& run) {
  if (run.records.empty()) return 0;
  const SlotRecord& r = run.records.front();
  return static_cast<int>(std::max(r.d.size(), r.q.size()));
}

void write_records_csv(const RunResult& run, const std::string& path) {
  std::ofstream out = open_out(path);
  const bool ly = is_lydroo(run);
  const int n = device_count(run);
  out << "t,utility";
  if (!ly) out << ",optimal_utility,ncr,ncr_ma";
  out << ",loss,k_used,chosen_index";
  if (!ly) {
    out << ",lc,ec,cd";
    for (int i = 0; i < n; ++i) out << ",d_" << i;
  } else {
    out << ",q_avg,y_avg,p_avg";
    for (int i = 0; i < n; ++i) out << ",q_" << i;
    for (int i = 0; i < n; ++i) out << ",y_" << i;
    for (int i = 0; i < n; ++i) out << ",e_" << i;
    for (int i = 0; i < n; ++i) out << ",d_" << i;
    for (int i = 0; i < n; ++i) out << ",pavg_" << i;
  }
  out << "\n";
  for (const auto& r : run.records) {
    out << r.t << ',' << fmt9(r.utility);
    if (!ly)
      out << ',' << fmt9(r.optimal_utility) << ',' << fmt9(r.ncr) << ','
          << fmt9(r.ncr_ma);
    out << ',' << fmt9(r.loss) << ',' << r.k_used << ',' << r.chosen_index;
    if (!ly) {
      out << ',' << fmt9(r.lc) << ',' << fmt9(r.ec) << ',' << fmt9(r.cd);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.d[i]);
    } else {
      double q_avg = 0.0, y_avg = 0.0, p_avg = 0.0;
      for (int i = 0; i < n; ++i) {
        q_avg += r.q[i];
        y_avg += r.y[i];
        p_avg += r.p_avg[i];
      }
      out << ',' << fmt9(q_avg / n) << ',' << fmt9(y_avg / n) << ',' << fmt9(p_avg / n);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.q[i]);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.y[i]);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.e[i]);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.d[i]);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.p_avg[i]);
    }
    out << "\n";
  }
}

}  // namespace

void emit_csv(const RunResult& run, const std::string& what, const std::string& path) {
  const bool ly = is_lydroo(run);
  const int n = device_count(run);
  std::ofstream out = open_out(path);
  if (what == "ncr") {
    if (ly) throw ConfigError("emit_csv: ncr series requires a droo run");
    out << "t,ncr,ncr_ma\n";
    for (const auto& r : run.records)
      out << r.t << ',' << fmt9(r.ncr) << ',' << fmt9(r.ncr_ma) << "\n";
  } else if (what == "loss") {
    out << "t,loss\n";
    for (const auto& r : run.records) out << r.t << ',' << fmt9(r.loss) << "\n";
  } else if (what == "queues") {
    if (!ly) throw ConfigError("emit_csv: queues series requires a lydroo run");
    out << "t,q_avg,y_avg";
    for (int i = 0; i < n; ++i) out << ",q_" << i;
    for (int i = 0; i < n; ++i) out << ",y_" << i;
    out << "\n";
    for (const auto& r : run.records) {
      double q_avg = 0.0, y_avg = 0.0;
      for (int i = 0; i < n; ++i) {
        q_avg += r.q[i];
        y_avg += r.y[i];
      }
      out << r.t << ',' << fmt9(q_avg / n) << ',' << fmt9(y_avg / n);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.q[i]);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.y[i]);
      out << "\n";
    }
  } else if (what == "power") {
    if (!ly) throw ConfigError("emit_csv: power series requires a lydroo run");
    out << "t,p_avg";
    for (int i = 0; i < n; ++i) out << ",p_" << i;
    out << "\n";
    for (const auto& r : run.records) {
      double p_avg = 0.0;
      for (int i = 0; i < n; ++i) p_avg += r.p_avg[i];
      out << r.t << ',' << fmt9(p_avg / n);
      for (int i = 0; i < n; ++i) out << ',' << fmt9(r.p_avg[i]);
      out << "\n";
    }
  } else {
    throw ConfigError("emit_csv: unknown selector '" + what + "'");
  }
}

namespace {

json summary_to_json(const RunSummary& s) {
  json doc;
  doc["converged_at"] = s.converged_at;
  doc["convergence_threshold"] = s.convergence_threshold;
  doc["final_avg_queue"] = s.final_avg_queue;
  doc["avg_power"] = s.avg_power;
  doc["mean_decision_us"] = s.mean_decision_us;
  doc["p95_decision_us"] = s.p95_decision_us;
  doc["total_utility"] = s.total_utility;
  doc["avg_utility"] = s.avg_utility;
  if (!std::isnan(s.avg_lc)) {
    doc["avg_lc"] = s.avg_lc;
    doc["avg_ec"] = s.avg_ec;
    doc["avg_cd"] = s.avg_cd;
  }
  doc["train_steps"] = s.train_steps;
  doc["final_k"] = s.final_k;
  return doc;
}

}  // namespace

void write_run_dir(const RunResult& run, const ExperimentConfig& ec,
                   const SystemConfig& cfg, const TrainConfig& tc,
                   const std::string& dir) {
  std::filesystem::create_directories(dir);
  FullConfig fc{cfg, ec, tc};
  open_out(dir + "/config.json") << full_config_to_json_text(fc);
  checkpoint_save(run.checkpoint, dir + "/checkpoint.json");
  write_records_csv(run, dir + "/records.csv");
  open_out(dir + "/summary.json") << summary_to_json(run.summary).dump(2) << "\n";
  emit_csv(run, "loss", dir + "/loss.csv");
  if (is_lydroo(run)) {
    emit_csv(run, "queues", dir + "/queues.csv");
    emit_csv(run, "power", dir + "/power.csv");
  } else {
    emit_csv(run, "ncr", dir + "/ncr.csv");
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

void plotdata(const std::string& run_dir, const std::string& what,
              const std::string& out_path) {
  if (what == "bench") {
    std::ifstream in(run_dir + "/bench.csv");
    if (!in) throw ConfigError("plotdata: no bench.csv in " + run_dir);
    std::ofstream out = open_out(out_path);
    out << in.rdbuf();
    return;
  }

  std::ifstream in(run_dir + "/records.csv");
  if (!in) throw ConfigError("plotdata: no records.csv in " + run_dir);
  std::string header;
  if (!std::getline(in, header)) throw ConfigError("plotdata: records.csv is empty");
  std::vector<std::string> cols = split_csv_line(header);
  auto col_index = [&](const std::string& name) {
    for (size_t i = 0; i < cols.size(); ++i)
      if (cols[i] == name) return static_cast<long>(i);
    return -1L;
  };

  // Selected source columns and the header names the tidy file uses.
  std::vector<long> indices;
  std::vector<std::string> out_names;
  auto need = [&](const std::string& name, const std::string& out_name) {
    long idx = col_index(name);
    if (idx < 0)
      throw ConfigError("plotdata: series '" + what + "' needs column '" + name +
                        "' which this run does not record");
    indices.push_back(idx);
    out_names.push_back(out_name);
  };

  need("t", "t");
  if (what == "ncr") {
    need("ncr", "ncr");
    need("ncr_ma", "ncr_ma");
  } else if (what == "loss") {
    need("loss", "loss");
  } else if (what == "queues") {
    need("q_avg", "q_avg");
    need("y_avg", "y_avg");
    for (long i = 0; col_index("q_" + std::to_string(i)) >= 0; ++i)
      need("q_" + std::to_string(i), "q_" + std::to_string(i));
    for (long i = 0; col_index("y_" + std::to_string(i)) >= 0; ++i)
      need("y_" + std::to_string(i), "y_" + std::to_string(i));
  } else if (what == "power") {
    need("p_avg", "p_avg");
    for (long i = 0; col_index("pavg_" + std::to_string(i)) >= 0; ++i)
      need("pavg_" + std::to_string(i), "p_" + std::to_string(i));
  } else {
    throw ConfigError("plotdata: unknown selector '" + what + "'");
  }

  std::ofstream out = open_out(out_path);
  for (size_t i = 0; i < out_names.size(); ++i)
    out << (i ? "," : "") << out_names[i];
  out << "\n";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields = split_csv_line(line);
    for (size_t i = 0; i < indices.size(); ++i)
      out << (i ? "," : "") << fields[static_cast<size_t>(indices[i])];
    out << "\n";
  }
}

void write_bench_csv(const std::vector<BenchCell>& cells, const std::string& path) {
  std::ofstream out = open_out(path);
  out << "method,n,trials,mean_us,p95_us\n";
  for (const auto& c : cells)
    out << c.method << ',' << c.n << ',' << c.trials << ',' << fmt9(c.mean_us) << ','
        << fmt9(c.p95_us) << "\n";
}

namespace {

Scenario scenario_from_string(const std::string& s) {
  if (s == "droo") return Scenario::droo;
  if (s == "lydroo") return Scenario::lydroo;
  throw ConfigError("unknown scenario '" + s + "' (expected droo or lydroo)");
}

std::string scenario_to_string(Scenario s) {
  return s == Scenario::droo ? "droo" : "lydroo";
}

QuantizerKind quantizer_from_string(const std::string& s) {
  if (s == "order_preserving") return QuantizerKind::order_preserving;
  if (s == "noisy") return QuantizerKind::noisy;
  throw ConfigError("unknown quantizer_kind '" + s + "'");
}

std::string quantizer_to_string(QuantizerKind k) {
  return k == QuantizerKind::order_preserving ? "order_preserving" : "noisy";
}

void reject_unknown(const json& doc, std::initializer_list<const char*> known,
                    const std::string& section) {
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + section);
  }
}

}  // namespace

FullConfig full_config_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  reject_unknown(doc, {"system", "experiment", "training"}, "config document");

  FullConfig fc;
  fc.system = system_config_from_json_text(
      doc.contains("system") ? doc["system"].dump() : "{}");

  ExperimentConfig& ec = fc.experiment;
  if (doc.contains("experiment")) {
    const json& e = doc["experiment"];
    reject_unknown(e,
                   {"scenario", "slots", "k_init", "events", "metric_window",
                    "output_dir", "seed", "enumeration", "baselines", "baselines_from",
                    "exhaustive_candidates", "parallel", "outer_tol", "dual_tol",
                    "inner_tol", "max_iters"},
                   "experiment section");
    ec.scenario = scenario_from_string(e.value("scenario", "droo"));
    ec.slots = e.value("slots", ec.scenario == Scenario::droo ? 10000L : 20000L);
    ec.k_init = e.value("k_init", 0);
    ec.metric_window = e.value("metric_window", 200);
    ec.output_dir = e.value("output_dir", std::string{});
    ec.seed = e.value("seed", static_cast<uint64_t>(1));
    ec.enumeration = e.value("enumeration", ec.scenario == Scenario::droo);
    ec.baselines = e.value("baselines", false);
    ec.baselines_from = e.value("baselines_from", 0L);
    ec.exhaustive_candidates = e.value("exhaustive_candidates", false);
    ec.parallel = e.value("parallel", true);
    ec.solver_tol.outer_tol = e.value("outer_tol", ec.solver_tol.outer_tol);
    ec.solver_tol.dual_tol = e.value("dual_tol", ec.solver_tol.dual_tol);
    ec.solver_tol.inner_tol = e.value("inner_tol", ec.solver_tol.inner_tol);
    ec.solver_tol.max_iters = e.value("max_iters", ec.solver_tol.max_iters);
    if (e.contains("events")) {
      for (const auto& ev : e["events"]) {
        reject_unknown(ev, {"slot", "kind"}, "event");
        ec.events.push_back({ev.at("slot").get<long>(),
                             ev.value("kind", std::string("weight_flip"))});
      }
    }
  } else {
    ec.enumeration = true;
  }

  TrainConfig& tc = fc.training;
  if (doc.contains("training")) {
    const json& t = doc["training"];
    reject_unknown(t,
                   {"batch_size", "train_interval", "learning_rate", "adam_beta1",
                    "adam_beta2", "adam_eps", "quantizer_kind", "noise_sigma",
                    "k_adapt_interval"},
                   "training section");
    tc.batch_size = t.value("batch_size", tc.batch_size);
    tc.train_interval = t.value("train_interval", tc.train_interval);
    tc.learning_rate = t.value("learning_rate", tc.learning_rate);
    tc.adam_beta1 = t.value("adam_beta1", tc.adam_beta1);
    tc.adam_beta2 = t.value("adam_beta2", tc.adam_beta2);
    tc.adam_eps = t.value("adam_eps", tc.adam_eps);
    tc.quantizer_kind =
        quantizer_from_string(t.value("quantizer_kind", std::string("order_preserving")));
    tc.noise_sigma = t.value("noise_sigma", tc.noise_sigma);
    tc.k_adapt_interval = t.value("k_adapt_interval", tc.k_adapt_interval);
  }
  return fc;
}

FullConfig full_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return full_config_from_json_text(buf.str());
}

std::string full_config_to_json_text(const FullConfig& fc) {
  json doc;
  doc["system"] = json::parse(system_config_to_json_text(fc.system));
  json e;
  e["scenario"] = scenario_to_string(fc.experiment.scenario);
  e["slots"] = fc.experiment.slots;
  e["k_init"] = fc.experiment.k_init;
  e["metric_window"] = fc.experiment.metric_window;
  e["output_dir"] = fc.experiment.output_dir;
  e["seed"] = fc.experiment.seed;
  e["enumeration"] = fc.experiment.enumeration;
  e["baselines"] = fc.experiment.baselines;
  e["baselines_from"] = fc.experiment.baselines_from;
  e["exhaustive_candidates"] = fc.experiment.exhaustive_candidates;
  e["parallel"] = fc.experiment.parallel;
  e["outer_tol"] = fc.experiment.solver_tol.outer_tol;
  e["dual_tol"] = fc.experiment.solver_tol.dual_tol;
  e["inner_tol"] = fc.experiment.solver_tol.inner_tol;
  e["max_iters"] = fc.experiment.solver_tol.max_iters;
  e["events"] = json::array();
  for (const auto& ev : fc.experiment.events)
    e["events"].push_back({{"slot", ev.slot}, {"kind", ev.kind}});
  doc["experiment"] = e;
  json t;
  t["batch_size"] = fc.training.batch_size;
  t["train_interval"] = fc.training.train_interval;
  t["learning_rate"] = fc.training.learning_rate;
  t["adam_beta1"] = fc.training.adam_beta1;
  t["adam_beta2"] = fc.training.adam_beta2;
  t["adam_eps"] = fc.training.adam_eps;
  t["quantizer_kind"] = quantizer_to_string(fc.training.quantizer_kind);
  t["noise_sigma"] = fc.training.noise_sigma;
  t["k_adapt_interval"] = fc.training.k_adapt_interval;
  doc["training"] = t;
  return doc.dump(2) + "\n";
}

}  // namespace mecsim
