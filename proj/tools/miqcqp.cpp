// Command-line driver: classify instances, run the pump + local-branching
// pipeline, benchmark a directory of QPLIB files, and compare result sets.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "miqcqp/heuristics.hpp"
#include "miqcqp/instance.hpp"
#include "miqcqp/localbranch.hpp"
#include "miqcqp/metrics.hpp"
#include "miqcqp/qplib.hpp"
#include "miqcqp/solver.hpp"
#include "miqcqp/spectral.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace miqcqp;

namespace {

using Clock = std::chrono::steady_clock;

struct RunConfig {
  double time_limit_s = 300.0;
  int workers = 4;
  double alpha = 0.5;
  std::string shift_rule = "safe";
  std::uint64_t seed = 0;
  std::string backend = "internal";
  bool deterministic = false;
  std::string out;
  std::string best_known;
};

ShiftRule parse_shift_rule(const std::string& s) {
  if (s == "classic") return ShiftRule::Classic;
  if (s == "safe") return ShiftRule::Safe;
  throw CLI::ValidationError("--shift-rule", "expected 'classic' or 'safe'");
}

std::string file_stem(const std::string& path) { return fs::path(path).stem().string(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out.good()) throw std::runtime_error("could not write " + path);
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty())
    std::cout << text;
  else
    write_text(out_path, text);
}

struct PipelineResult {
  ProblemClass cls = ProblemClass::MIBQP;
  std::optional<std::vector<double>> solution;
  double objective = 0.0;
  IncumbentTrace trace;
  double wall_s = 0.0;
};

/// Pump capped at 40% of the budget, parallel local branching on the rest.
PipelineResult run_pipeline(const MiqcqpInstance& inst, const RunConfig& cfg) {
  const Clock::time_point t0 = Clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(Clock::now() - t0).count(); };

  PipelineResult out;
  out.cls = classify(inst);

  PumpConfig pump;
  pump.alpha = cfg.alpha;
  pump.seed = cfg.seed;
  pump.shift_rule = parse_shift_rule(cfg.shift_rule);
  const double pump_budget = 0.4 * cfg.time_limit_s;
  pump.subproblem_time_limit_s = std::clamp(pump_budget / 2.0, 0.1, 10.0);

  PumpOutcome pumped = dispatch_pump(inst, pump, pump_budget, cfg.deterministic);
  out.trace = pumped.trace;

  if (pumped.x_star) {
    out.solution = pumped.x_star;
    out.objective = pumped.objective;
    const double lb_start = elapsed();
    const double lb_budget = cfg.time_limit_s - lb_start;
    if (lb_budget > 0.0) {
      LbOptions opt;
      opt.seed = cfg.seed;
      const int workers = cfg.deterministic ? 1 : cfg.workers;
      std::vector<double> best;
      IncumbentTrace lb = run_parallel_lb(inst, *pumped.x_star, lb_budget, workers, opt, &best);
      for (TraceEvent& e : lb.events) e.t += lb_start;
      lb.horizon += lb_start;
      out.trace = merge_traces(out.trace, lb);
      if (!best.empty()) {
        const double f = evaluate(inst, best).objective;
        if (f <= out.objective) {
          out.solution = best;
          out.objective = f;
        }
      }
    }
  }
  out.wall_s = elapsed();
  out.trace.horizon = std::max(out.trace.horizon, out.wall_s);
  return out;
}

ordered_json config_json(const RunConfig& cfg) {
  ordered_json j;
  j["time_limit_s"] = cfg.time_limit_s;
  j["workers"] = cfg.workers;
  j["alpha"] = cfg.alpha;
  j["shift_rule"] = cfg.shift_rule;
  j["seed"] = cfg.seed;
  j["backend"] = cfg.backend;
  j["deterministic"] = cfg.deterministic;
  return j;
}

ordered_json trace_json(const IncumbentTrace& trace) {
  ordered_json j;
  j["horizon_s"] = trace.horizon;
  ordered_json events = ordered_json::array();
  for (const TraceEvent& e : trace.events) {
    ordered_json ev;
    ev["t"] = e.t;
    ev["objective"] = e.objective;
    events.push_back(std::move(ev));
  }
  j["events"] = std::move(events);
  return j;
}

std::map<std::string, double> load_best_known(const std::string& path) {
  std::map<std::string, double> best;
  if (path.empty()) return best;
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open best-known file " + path);
  std::string line;
  while (std::getline(in, line)) {
    const auto comma = line.find(',');
    if (comma == std::string::npos) continue;
    const std::string name = line.substr(0, comma);
    try {
      best[name] = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      // header or malformed row; skip
    }
  }
  return best;
}

ordered_json result_json(const std::string& id, const MiqcqpInstance& inst,
                         const PipelineResult& run, const RunConfig& cfg,
                         const std::optional<double>& best_known) {
  ordered_json j;
  j["instance"] = id;
  j["class"] = to_string(run.cls);
  j["found"] = run.solution.has_value();
  j["objective"] = run.solution ? ordered_json(external_objective(inst, run.objective))
                                : ordered_json(nullptr);
  j["solution"] = run.solution ? ordered_json(*run.solution) : ordered_json(nullptr);
  j["trace"] = trace_json(run.trace);

  ordered_json metrics;
  metrics["fft_s"] =
      run.solution ? ordered_json(run.trace.first_time()) : ordered_json(nullptr);
  if (best_known) {
    // Best-known values are in the original sense; traces are internal (min).
    const double internal_star =
        inst.maximize_original ? -*best_known : *best_known;
    const double gap =
        run.solution ? primal_gap(run.objective, internal_star) : 100.0;
    metrics["gap_percent"] = gap;
    metrics["eps_gap_hit"] = eps_gap_hit(gap);
    metrics["primal_integral_s"] = primal_integral(run.trace, internal_star);
  } else {
    metrics["gap_percent"] = nullptr;
    metrics["eps_gap_hit"] = nullptr;
    metrics["primal_integral_s"] = nullptr;
  }
  j["metrics"] = std::move(metrics);
  j["wall_s"] = run.wall_s;
  j["config"] = config_json(cfg);
  return j;
}

int cmd_classify(const std::vector<std::string>& files, const RunConfig& cfg) {
  ordered_json out = ordered_json::array();
  for (const std::string& path : files) {
    MiqcqpInstance inst = parse_qplib_file(path);
    ordered_json j;
    j["instance"] = file_stem(path);
    j["class"] = to_string(classify(inst));
    out.push_back(std::move(j));
  }
  emit(cfg.out, (out.size() == 1 ? out[0] : out).dump(2) + "\n");
  return 0;
}

int cmd_solve(const std::string& file, const RunConfig& cfg) {
  MiqcqpInstance inst = parse_qplib_file(file);
  auto best_known = load_best_known(cfg.best_known);
  const std::string id = file_stem(file);
  std::optional<double> v_star;
  if (auto it = best_known.find(id); it != best_known.end()) v_star = it->second;

  PipelineResult run = run_pipeline(inst, cfg);
  emit(cfg.out, result_json(id, inst, run, cfg, v_star).dump(2) + "\n");
  return run.solution ? 0 : 2;
}

int cmd_bench(const std::string& dir, const RunConfig& cfg) {
  std::vector<std::string> files;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".qplib")
      files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());

  auto best_known = load_best_known(cfg.best_known);
  std::vector<BenchRecord> records;
  ordered_json results = ordered_json::array();

  for (const std::string& path : files) {
    MiqcqpInstance inst = parse_qplib_file(path);
    const std::string id = file_stem(path);
    PipelineResult run = run_pipeline(inst, cfg);

    BenchRecord rec;
    rec.instance = id;
    rec.problem_class = to_string(run.cls);
    rec.found = run.solution.has_value();
    if (run.solution) {
      rec.objective = external_objective(inst, run.objective);
      rec.fft_s = run.trace.first_time();
    }
    if (auto it = best_known.find(id); it != best_known.end()) {
      rec.best_known = it->second;
      const double internal_star =
          inst.maximize_original ? -it->second : it->second;
      const double gap =
          run.solution ? primal_gap(run.objective, internal_star) : 100.0;
      rec.gap_percent = gap;
      rec.eps_hit = eps_gap_hit(gap);
      rec.primal_integral_s = primal_integral(run.trace, internal_star);
    }
    records.push_back(rec);

    ordered_json r;
    r["instance"] = id;
    r["class"] = rec.problem_class;
    r["found"] = rec.found;
    r["objective"] = rec.objective ? ordered_json(*rec.objective) : ordered_json(nullptr);
    // Comparisons run in the internal minimization sense regardless of the
    // instance's original sense.
    r["objective_min"] =
        run.solution ? ordered_json(run.objective) : ordered_json(nullptr);
    results.push_back(std::move(r));
  }

  // Per-class aggregates with the all-class row last.
  auto aggregate = [&](auto&& keep) {
    ordered_json agg;
    std::vector<double> gaps, pis, ffts;
    int count = 0, found = 0, eps = 0;
    for (const BenchRecord& r : records) {
      if (!keep(r)) continue;
      ++count;
      if (r.found) ++found;
      if (r.eps_hit && *r.eps_hit) ++eps;
      if (r.gap_percent) gaps.push_back(*r.gap_percent);
      if (r.primal_integral_s) pis.push_back(*r.primal_integral_s);
      if (r.fft_s) ffts.push_back(*r.fft_s);
    }
    agg["count"] = count;
    agg["found"] = found;
    agg["eps_gap_hits"] = eps;
    agg["gap_percent"] = gaps.empty() ? ordered_json(nullptr)
                                      : ordered_json(shifted_geomean(gaps));
    agg["primal_integral_s"] =
        pis.empty() ? ordered_json(nullptr) : ordered_json(shifted_geomean(pis));
    agg["fft_s"] =
        ffts.empty() ? ordered_json(nullptr) : ordered_json(shifted_geomean(ffts));
    return agg;
  };

  ordered_json summary;
  summary["note"] = "aggregates are shifted geometric means with shift 1";
  ordered_json classes;
  for (const char* cls : {"MIBQP", "MIQP", "MIQCP"}) {
    const std::string name = cls;
    bool any = std::any_of(records.begin(), records.end(),
                           [&](const BenchRecord& r) { return r.problem_class == name; });
    if (any)
      classes[name] =
          aggregate([&](const BenchRecord& r) { return r.problem_class == name; });
  }
  classes["all"] = aggregate([](const BenchRecord&) { return true; });
  summary["classes"] = std::move(classes);
  summary["config"] = config_json(cfg);
  summary["results"] = std::move(results);

  write_text(cfg.out, bench_csv(records));
  write_text(cfg.out + ".summary.json", summary.dump(2) + "\n");
  return 0;
}

struct CompareEntry {
  std::string cls;
  bool found = false;
  double objective = 0.0;
};

std::map<std::string, CompareEntry> load_results(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("cannot open results file " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  const nlohmann::json& arr = j.is_array() ? j : j.at("results");
  if (!arr.is_array()) throw std::runtime_error(path + ": expected a results array");
  std::map<std::string, CompareEntry> out;
  for (const auto& r : arr) {
    CompareEntry e;
    e.cls = r.value("class", "unknown");
    e.found = r.value("found", false);
    if (e.found) {
      const char* key = r.contains("objective_min") ? "objective_min" : "objective";
      if (!r.contains(key) || r[key].is_null())
        throw std::runtime_error(path + ": found instance without an objective");
      e.objective = r[key].get<double>();
    }
    out[r.at("instance").get<std::string>()] = e;
  }
  return out;
}

int cmd_compare(const std::string& path_a, const std::string& path_b,
                const RunConfig& cfg) {
  auto a = load_results(path_a);
  auto b = load_results(path_b);

  std::vector<std::string> only_a, only_b;
  for (const auto& [name, _] : a)
    if (!b.count(name)) only_a.push_back(name);
  for (const auto& [name, _] : b)
    if (!a.count(name)) only_b.push_back(name);
  if (!only_a.empty() || !only_b.empty()) {
    std::ostringstream msg;
    msg << "instance sets differ;";
    if (!only_a.empty()) {
      msg << " only in " << path_a << ":";
      for (const auto& n : only_a) msg << " " << n;
      msg << ";";
    }
    if (!only_b.empty()) {
      msg << " only in " << path_b << ":";
      for (const auto& n : only_b) msg << " " << n;
    }
    throw std::runtime_error(msg.str());
  }

  ordered_json rows = ordered_json::array();
  std::map<std::string, std::map<std::string, int>> counts;
  for (const auto& [name, ea] : a) {
    const CompareEntry& eb = b.at(name);
    Comparison c = Comparison::None;
    if (ea.found && eb.found) c = compare(ea.objective, eb.objective);
    ordered_json row;
    row["instance"] = name;
    row["class"] = ea.cls;
    row["comparison"] = to_string(c);
    rows.push_back(std::move(row));
    counts[ea.cls][to_string(c)] += 1;
    counts["all"][to_string(c)] += 1;
  }

  ordered_json out;
  out["instances"] = std::move(rows);
  ordered_json count_block;
  for (const auto& [cls, by] : counts) {
    ordered_json c;
    for (const char* key : {"Same", "Better", "Worse", "None"})
      c[key] = by.count(key) ? by.at(key) : 0;
    count_block[cls] = std::move(c);
  }
  out["counts"] = std::move(count_block);
  emit(cfg.out, out.dump(2) + "\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Primal heuristics for nonconvex MIQCQP"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::vector<std::string> classify_files;
  std::string solve_file, bench_dir, compare_a, compare_b;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--time-limit", cfg.time_limit_s, "Global budget in seconds")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--workers", cfg.workers, "Concurrent local-branching solves")
        ->check(CLI::Range(1, 1024));
    cmd->add_option("--alpha", cfg.alpha, "Fixed-point blending weight")
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--shift-rule", cfg.shift_rule, "Perturbation shift: classic|safe")
        ->check(CLI::IsMember({"classic", "safe"}));
    cmd->add_option("--seed", cfg.seed, "Random seed");
    cmd->add_option("--backend", cfg.backend, "Subproblem backend: internal|external")
        ->check(CLI::IsMember({"internal", "external"}));
    cmd->add_flag("--deterministic", cfg.deterministic,
                  "Serialize races and local branching for reproducible output");
    cmd->add_option("--out", cfg.out, "Output path (default stdout)");
    cmd->add_option("--best-known", cfg.best_known,
                    "CSV of best-known objectives (instance,objective)");
  };

  CLI::App* c_classify = app.add_subcommand("classify", "Print the problem class");
  c_classify->add_option("files", classify_files, "QPLIB files")->required();
  add_common(c_classify);

  CLI::App* c_solve = app.add_subcommand("solve", "Run the primal heuristic pipeline");
  c_solve->add_option("file", solve_file, "QPLIB file")->required();
  add_common(c_solve);

  CLI::App* c_bench = app.add_subcommand("bench", "Benchmark a directory of instances");
  c_bench->add_option("dir", bench_dir, "Directory of .qplib files")->required();
  add_common(c_bench);
  c_bench->get_option("--out")->required();

  CLI::App* c_compare = app.add_subcommand("compare", "Compare two result sets");
  c_compare->add_option("a", compare_a, "First results JSON")->required();
  c_compare->add_option("b", compare_b, "Second results JSON")->required();
  add_common(c_compare);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (cfg.backend == "external") {
      const char* cmd = std::getenv("MIQCQP_EXTERNAL_SOLVER");
      if (!cmd || !*cmd)
        throw std::runtime_error(
            "--backend external requires MIQCQP_EXTERNAL_SOLVER to be set");
      set_external_backend(cmd);
    }
    if (c_classify->parsed()) return cmd_classify(classify_files, cfg);
    if (c_solve->parsed()) return cmd_solve(solve_file, cfg);
    if (c_bench->parsed()) return cmd_bench(bench_dir, cfg);
    return cmd_compare(compare_a, compare_b, cfg);
  } catch (const std::exception& e) {
    std::cerr << "miqcqp: " << e.what() << "\n";
    return 1;
  }
}
