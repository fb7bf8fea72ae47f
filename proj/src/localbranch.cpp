#include "miqcqp/localbranch.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "miqcqp/convexify.hpp"

namespace miqcqp {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// A subproblem counts as exhausted only when the backend settled it well
// inside its limit; everything that ran out of the clock is retryable.
bool hit_time_limit(const SolveResult& res, double limit_s) {
  if (res.status == SolveStatus::TimeLimitNoSolution) return true;
  if (res.status == SolveStatus::Optimal || res.status == SolveStatus::Infeasible) return false;
  return res.wall_time_s >= 0.9 * limit_s;
}

struct RoundOutcome {
  bool improved = false;
  int winner = -1;  // index into the round's model list
  std::vector<double> x;  // model-space point of the winner
  double objective = 0.0;
  bool any_time_limit_hit = false;
};

// Solves one batch of submodels with up to `workers` concurrent solves and
// returns the best instance-feasible improvement over `node`.
RoundOutcome solve_round(const std::vector<ModelIR>& models, const BranchNode& node,
                         const MiqcqpInstance& inst, double limit_s, int workers,
                         const LbOptions& opt, IncumbentTrace& trace,
                         Clock::time_point t0, double budget_s) {
  RoundOutcome out;
  const int count = static_cast<int>(models.size());
  if (count == 0 || limit_s <= 0.0) return out;

  std::vector<SolveResult> results(models.size());
  std::vector<CancelToken> cancels(models.size());
  std::mutex mtx;
  double best_seen = node.objective;

  const int threads = std::min(std::max(workers, 1), count);
#pragma omp parallel for num_threads(threads) schedule(dynamic)
  for (int d = 0; d < count; ++d) {
    if (elapsed_s(t0) >= budget_s || cancels[d].cancelled()) {
      results[d].status = SolveStatus::TimeLimitNoSolution;
      results[d].message = "skipped: budget exhausted";
      continue;
    }
    SolveRequest req;
    req.time_limit_s = std::max(0.0, std::min(limit_s, budget_s - elapsed_s(t0)));
    req.goal = SolveGoal::BestWithinLimit;
    req.seed = opt.seed + static_cast<std::uint64_t>(d);
    req.cancel = &cancels[d];
    if (models[d].feasible(node.incumbent, 1e-9)) req.warm_start = node.incumbent;
    SolveResult res = solve_model(models[d], req);

    if (res.has_solution()) {
      std::vector<double> orig = extract_original(models[d], res.x);
      if (check_feasible(inst, orig, 1e-6)) {
        const double f = evaluate(inst, orig).objective;
        std::lock_guard<std::mutex> lock(mtx);
        if (f < best_seen) {
          best_seen = f;
          trace.record(elapsed_s(t0), f);
          if (opt.eager_cut) {
            for (int s = 0; s < count; ++s)
              if (s != d) cancels[s].cancel();
          }
        }
      } else {
        res.status = SolveStatus::Error;
        res.message = "backend point failed instance validation";
      }
    }
    results[d] = std::move(res);
  }

  for (int d = 0; d < count; ++d) {
    const SolveResult& res = results[d];
    if (hit_time_limit(res, limit_s)) out.any_time_limit_hit = true;
    if (!res.has_solution()) continue;
    std::vector<double> orig = extract_original(models[d], res.x);
    if (!check_feasible(inst, orig, 1e-6)) continue;
    const double f = evaluate(inst, orig).objective;
    const double cur = out.improved ? out.objective : node.objective;
    if (f < cur) {
      out.improved = true;
      out.winner = d;
      out.x = res.x;
      out.objective = f;
    }
  }
  return out;
}

std::vector<ModelIR> halved_window_models(const ModelIR& base, std::span<const double> x_bar,
                                          std::pair<int, int> range, int num_binaries) {
  PartitionScheme one;
  one.ranges = {range};
  PartitionScheme fine = one.halved().clipped(num_binaries);
  std::vector<ModelIR> models;
  models.reserve(fine.ranges.size());
  for (auto [lo, hi] : fine.ranges) models.push_back(add_lbc(base, x_bar, lo, hi));
  return models;
}

}  // namespace

void PartitionScheme::validate() const {
  if (ranges.empty()) throw std::invalid_argument("partition scheme has no ranges");
  int expect_lo = 1;
  for (auto [lo, hi] : ranges) {
    if (lo != expect_lo)
      throw std::invalid_argument("partition ranges must be contiguous starting at 1");
    if (hi < lo) throw std::invalid_argument("partition range has k_hi < k_lo");
    expect_lo = hi + 1;
  }
}

PartitionScheme PartitionScheme::clipped(int num_binaries) const {
  PartitionScheme out;
  out.ranges.clear();
  for (auto [lo, hi] : ranges) {
    if (lo > num_binaries) break;
    out.ranges.emplace_back(lo, std::min(hi, num_binaries));
  }
  return out;
}

PartitionScheme PartitionScheme::halved() const {
  PartitionScheme out;
  out.ranges.clear();
  for (auto [lo, hi] : ranges) {
    if (hi > lo) {
      const int mid = lo + (hi - lo) / 2;
      out.ranges.emplace_back(lo, mid);
      out.ranges.emplace_back(mid + 1, hi);
    } else {
      out.ranges.emplace_back(lo, hi);
    }
  }
  return out;
}

const char* to_string(LbMode m) {
  switch (m) {
    case LbMode::LBC: return "lbc";
    case LbMode::RLBC: return "rlbc";
  }
  return "unknown";
}

std::vector<ModelIR> partition_neighborhood(const PartitionScheme& scheme,
                                            const ModelIR& base_model,
                                            std::span<const double> x_bar) {
  scheme.validate();
  if (static_cast<int>(x_bar.size()) != base_model.n_vars())
    throw std::invalid_argument("x_bar size does not match the model");
  const int nb = static_cast<int>(base_model.lbc_binaries().size());
  if (nb == 0)
    throw std::invalid_argument("model has no binary variables for local branching");
  PartitionScheme eff = scheme.clipped(nb);
  std::vector<ModelIR> models;
  models.reserve(eff.ranges.size());
  for (auto [lo, hi] : eff.ranges) models.push_back(add_lbc(base_model, x_bar, lo, hi));
  return models;
}

SolveResult solve_subproblem(const BranchNode& node, std::pair<int, int> range,
                             double time_limit_s, std::uint64_t seed,
                             CancelToken* cancel) {
  const auto [lo, hi] = range;
  ModelIR sub = add_lbc(node.base_model, node.incumbent, lo, hi);
  SolveRequest req;
  req.time_limit_s = time_limit_s;
  req.goal = SolveGoal::BestWithinLimit;
  req.seed = seed;
  req.cancel = cancel;
  const double d = lbc_distance(node.base_model, node.incumbent, node.incumbent);
  if (d >= lo && d <= hi) req.warm_start = node.incumbent;
  return solve_model(sub, req);
}

IncumbentTrace run_parallel_lb(const MiqcqpInstance& inst, std::span<const double> x0,
                               double budget_s, int workers, const LbOptions& opt,
                               std::vector<double>* x_best) {
  opt.scheme.validate();
  if (workers < 1) throw std::invalid_argument("run_parallel_lb needs workers >= 1");
  if (static_cast<int>(x0.size()) != inst.n)
    throw std::invalid_argument("x0 size does not match the instance");
  if (!check_feasible(inst, x0, 1e-6))
    throw std::invalid_argument("run_parallel_lb requires a feasible starting point");

  const Clock::time_point t0 = Clock::now();
  IncumbentTrace trace;
  std::vector<double> best_orig(x0.begin(), x0.end());
  trace.record(0.0, evaluate(inst, best_orig).objective);

  BranchNode node;
  node.base_model = build_original(inst, /*expand_generals=*/true);
  node.incumbent = lift_point(node.base_model, inst, best_orig);
  node.objective = trace.best_objective();

  const int nb = static_cast<int>(node.base_model.lbc_binaries().size());
  if (nb == 0) {
    trace.horizon = std::max(trace.horizon, elapsed_s(t0));
    if (x_best) *x_best = best_orig;
    return trace;
  }
  const PartitionScheme scheme = opt.scheme.clipped(nb);
  const int k_total = scheme.k_total();

  auto remaining = [&] { return budget_s - elapsed_s(t0); };
  auto sub_limit = [&] {
    const double share = std::clamp(remaining() / 6.0, opt.subproblem_floor_s, opt.subproblem_cap_s);
    return std::min(share, remaining());
  };

  auto adopt = [&](const ModelIR& model, const RoundOutcome& round) {
    // Exclude the exhausted neighborhood of the old center, then recenter.
    if (k_total + 1 <= nb)
      node.base_model = add_lbc(node.base_model, node.incumbent, k_total + 1, nb);
    std::vector<double> orig = extract_original(model, round.x);
    best_orig = orig;
    node.incumbent = lift_point(node.base_model, inst, orig);
    node.objective = round.objective;
    node.depth += 1;
    node.mode = LbMode::LBC;
  };

  while (remaining() > 0.0) {
    if (node.mode == LbMode::LBC) {
      std::vector<ModelIR> subs = partition_neighborhood(scheme, node.base_model, node.incumbent);
      RoundOutcome round =
          solve_round(subs, node, inst, sub_limit(), workers, opt, trace, t0, budget_s);
      if (round.improved) {
        adopt(subs[round.winner], round);
        continue;
      }
      bool resplit_improved = false;
      if (round.any_time_limit_hit && remaining() > 0.0) {
        // Retry every timed-out window once with halved ranges.
        for (std::size_t d = 0; d < scheme.ranges.size() && remaining() > 0.0; ++d) {
          std::vector<ModelIR> fine =
              halved_window_models(node.base_model, node.incumbent, scheme.ranges[d], nb);
          RoundOutcome fine_round =
              solve_round(fine, node, inst, sub_limit(), workers, opt, trace, t0, budget_s);
          if (fine_round.improved) {
            adopt(fine[fine_round.winner], fine_round);
            resplit_improved = true;
            break;
          }
        }
      }
      if (resplit_improved) continue;
      node.mode = LbMode::RLBC;
    } else {
      ModelIR escape = add_rlbc(node.base_model, node.incumbent, k_total);
      RoundOutcome round =
          solve_round({escape}, node, inst, sub_limit(), workers, opt, trace, t0, budget_s);
      if (!round.improved) break;  // neighborhood and escape both exhausted
      adopt(escape, round);
    }
  }

  trace.horizon = std::max(trace.horizon, elapsed_s(t0));
  if (x_best) *x_best = best_orig;
  return trace;
}

}  // namespace miqcqp
