#include "miqcqp/heuristics.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "miqcqp/convexify.hpp"

namespace miqcqp {

namespace {

using Clock = std::chrono::steady_clock;

constexpr double kInf = std::numeric_limits<double>::infinity();

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

Clock::time_point deadline_after(Clock::time_point t0, double seconds) {
  if (!std::isfinite(seconds)) return Clock::time_point::max();
  return t0 + std::chrono::duration_cast<Clock::duration>(
                  std::chrono::duration<double>(seconds));
}

double remaining_s(Clock::time_point deadline) {
  if (deadline == Clock::time_point::max()) return kInf;
  return std::chrono::duration<double>(deadline - Clock::now()).count();
}

std::vector<double> normalized_center(const MiqcqpInstance& inst) {
  std::vector<double> c(inst.n);
  for (int i = 0; i < inst.n; ++i) c[i] = 0.5 * inst.upper[i];
  return c;
}

double quad_row_violation(const QuadConstraint& qc, std::span<const double> x) {
  return std::max(0.0, qc.Q.quad_form(x) + row_dot(qc.linear, x) - qc.rhs);
}

/// Rounds every integer coordinate of y in a seeded shuffle, choosing the
/// floor/ceil side by true-objective decrease through a cached Q.y product;
/// with `propagate`, domain propagation filters the sides first and a
/// uniquely surviving side wins regardless of objective.
void flip_integers(const MiqcqpInstance& inst, std::vector<double>& y, std::uint64_t seed,
                   bool propagate) {
  std::vector<int> ints = inst.integer_indices();
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::shuffle(ints.begin(), ints.end(), rng);

  const SymSparseMatrix& Q = inst.objective.Q;
  std::vector<double> g(inst.n, 0.0);
  std::vector<double> diag(inst.n, 0.0);
  for (const auto& e : Q.entries())
    if (e.row == e.col) diag[e.row] += e.value;
  if (!Q.empty()) Q.multiply(y, g);

  auto objective_delta = [&](int i, double d) {
    return diag[i] * d * d + 2.0 * g[i] * d + inst.objective.linear[i] * d;
  };
  auto apply = [&](int i, double v) {
    double d = v - y[i];
    if (d != 0.0) {
      if (!Q.empty()) Q.add_scaled_column(i, d, g);
      y[i] = v;
    }
  };

  for (int i : ints) {
    double lo = std::clamp(std::floor(y[i]), inst.lower[i], inst.upper[i]);
    double hi = std::clamp(std::ceil(y[i]), inst.lower[i], inst.upper[i]);
    if (lo == hi) {
      apply(i, lo);
      continue;
    }
    bool lo_ok = true, hi_ok = true;
    if (propagate) {
      auto side_fixes = [&](double v) {
        std::vector<std::pair<int, double>> fixes;
        for (int j : ints)
          if (j != i && std::abs(y[j] - std::round(y[j])) < 1e-9)
            fixes.emplace_back(j, std::round(y[j]));
        fixes.emplace_back(i, v);
        return fixes;
      };
      lo_ok = domain_propagate(inst, side_fixes(lo)) != Propagation::Infeasible;
      hi_ok = domain_propagate(inst, side_fixes(hi)) != Propagation::Infeasible;
    }
    if (hi_ok && !lo_ok)
      apply(i, hi);
    else if (lo_ok && !hi_ok)
      apply(i, lo);
    else
      apply(i, objective_delta(i, lo - y[i]) <= objective_delta(i, hi - y[i]) ? lo : hi);
  }
  for (int i : ints) y[i] = std::round(y[i]);
}

/// Continuous solve of the integer-relaxed model, reduced to the original
/// coordinates and clamped into the normalized box.
std::vector<double> relaxed_model_point(const MiqcqpInstance& inst, const ModelIR& model,
                                        Clock::time_point deadline) {
  ModelIR relaxed = relax_integrality(model);
  ContinuousOptions opt;
  opt.deadline = deadline;
  std::vector<double> center(relaxed.n_vars());
  for (int i = 0; i < relaxed.n_vars(); ++i) {
    double lo = relaxed.vars[i].lb, hi = relaxed.vars[i].ub;
    center[i] = 0.5 * (lo + hi);
  }
  ContinuousResult res = minimize_continuous(relaxed, center, opt);
  std::vector<double> y =
      res.x.empty() ? normalized_center(inst) : extract_original(relaxed, res.x);
  for (int i = 0; i < inst.n; ++i) y[i] = std::clamp(y[i], 0.0, inst.upper[i]);
  return y;
}

std::vector<int> original_indices(const MiqcqpInstance& inst) {
  std::vector<int> over(inst.n);
  std::iota(over.begin(), over.end(), 0);
  return over;
}

void snap_integers(const MiqcqpInstance& inst, std::vector<double>& x) {
  for (int i = 0; i < inst.n; ++i)
    if (inst.integer[i]) x[i] = std::round(x[i]);
}

/// Validates in normalized space, then reports the point in original
/// coordinates with the trace horizon covering the whole run.
PumpOutcome assemble(const MiqcqpInstance& inst, const NormalizedInstance& norm,
                     const std::optional<std::vector<double>>& y, IncumbentTrace trace,
                     int iterations, PumpTermination term, Clock::time_point t0) {
  PumpOutcome out;
  out.iterations = iterations;
  out.terminated_by = term;
  if (y && check_feasible(norm.inst, *y, 1e-6)) {
    std::vector<double> x = denormalize(norm, *y);
    snap_integers(inst, x);
    out.objective = evaluate(inst, x).objective;
    out.x_star = std::move(x);
  }
  out.trace = std::move(trace);
  out.trace.horizon = std::max(out.trace.horizon, elapsed_s(t0));
  return out;
}

/// Flip-project round of the linearly constrained pump: integer-relaxed
/// Approx(u-hat) solve, propagation-guided flips, then the l1 projection
/// MILP onto the original rows.
std::optional<std::vector<double>> flip_project_core(const NormalizedInstance& norm,
                                                     std::span<const double> shifts,
                                                     const UHat& u_hat, const PumpConfig& cfg,
                                                     std::uint64_t shuffle_seed,
                                                     Clock::time_point deadline) {
  const MiqcqpInstance& inst = norm.inst;
  Clock::time_point sub_deadline =
      std::min(deadline, deadline_after(Clock::now(), cfg.subproblem_time_limit_s));
  std::vector<double> y =
      relaxed_model_point(inst, build_approx(norm, u_hat, shifts), sub_deadline);
  flip_integers(inst, y, shuffle_seed, true);

  ModelIR proj = build_l1_projection(build_original(inst), y, original_indices(inst));
  SolveRequest req;
  req.time_limit_s = std::min(cfg.subproblem_time_limit_s, remaining_s(deadline));
  if (req.time_limit_s <= 0.0) return std::nullopt;
  req.goal = SolveGoal::ProveOptimal;
  req.seed = cfg.seed;
  req.warm_start = lift_point(proj, inst, y);
  SolveResult res = solve_model(proj, req);
  if (res.status == SolveStatus::Infeasible)
    throw std::runtime_error("projection onto the original rows is infeasible: " +
                             inst.name + " has no feasible point");
  if (!res.has_solution()) return std::nullopt;
  std::vector<double> out = extract_original(proj, res.x);
  snap_integers(inst, out);
  return out;
}

/// Shared setup of the two MIQCP pumps: local relaxation solve from the box
/// center and the initial u-hat (2 x0 on the continuous block).
struct PumpStart {
  std::vector<double> x0;
  UHat u_hat;
};

PumpStart pump_start(const NormalizedInstance& norm, const PumpConfig& cfg,
                     Clock::time_point deadline) {
  const MiqcqpInstance& inst = norm.inst;
  MiqcqpInstance relaxed = inst;
  std::fill(relaxed.integer.begin(), relaxed.integer.end(), std::uint8_t{0});
  std::vector<double> center = normalized_center(inst);
  double limit = std::min(cfg.subproblem_time_limit_s, remaining_s(deadline));
  PumpStart start;
  start.x0 = center;
  if (limit > 0.0) {
    SolveResult rel = solve_local_nlp(relaxed, {}, center, limit);
    if (rel.has_solution()) start.x0 = rel.x;
  }
  std::vector<double> raw(inst.n);
  for (int i = 0; i < inst.n; ++i)
    raw[i] = inst.integer[i] ? inst.upper[i] : 2.0 * start.x0[i];
  start.u_hat = make_uhat(inst, raw);
  return start;
}

void double_uhat(const MiqcqpInstance& inst, UHat& u_hat) {
  for (int i = 0; i < inst.n; ++i)
    if (!inst.integer[i])
      u_hat.values[i] = std::min(2.0 * u_hat.values[i], inst.upper[i]);
}

void blend_uhat(const MiqcqpInstance& inst, UHat& u_hat, double alpha,
                std::span<const double> target, double target_scale) {
  for (int i = 0; i < inst.n; ++i)
    if (!inst.integer[i])
      u_hat.values[i] = std::clamp(
          alpha * u_hat.values[i] + target_scale * (1.0 - alpha) * target[i], 0.0,
          inst.upper[i]);
}

/// Integer-fix polish of a normalized-space feasible point; returns the
/// better of the polished point and the input.
std::vector<double> polish_point(const MiqcqpInstance& inst, const std::vector<double>& y,
                                 const PumpConfig& cfg, Clock::time_point deadline) {
  std::vector<std::pair<int, double>> fixed;
  for (int i = 0; i < inst.n; ++i)
    if (inst.integer[i]) fixed.emplace_back(i, y[i]);
  double limit = std::clamp(remaining_s(deadline), 0.2, cfg.subproblem_time_limit_s);
  SolveResult pol = solve_local_nlp(inst, fixed, y, limit);
  if (pol.has_solution() && check_feasible(inst, pol.x, 1e-6)) return pol.x;
  return y;
}

PumpOutcome combine_race(PumpOutcome a, PumpOutcome b) {
  PumpOutcome out;
  out.trace = merge_traces(a.trace, b.trace);
  out.iterations = a.iterations + b.iterations;
  const bool a_wins = a.x_star && (!b.x_star || a.objective <= b.objective);
  if (a_wins) {
    out.x_star = std::move(a.x_star);
    out.objective = a.objective;
    out.terminated_by = a.terminated_by;
  } else if (b.x_star) {
    out.x_star = std::move(b.x_star);
    out.objective = b.objective;
    out.terminated_by = b.terminated_by;
  } else {
    out.terminated_by = a.terminated_by == PumpTermination::TimeBudget ||
                                b.terminated_by == PumpTermination::TimeBudget
                            ? PumpTermination::TimeBudget
                            : PumpTermination::MaxIter;
  }
  return out;
}

}  // namespace

const char* to_string(PumpTermination t) {
  switch (t) {
    case PumpTermination::Converged: return "converged";
    case PumpTermination::MaxIter: return "max-iter";
    case PumpTermination::TimeBudget: return "time-budget";
    case PumpTermination::PeerWin: return "peer-win";
  }
  return "?";
}

const char* to_string(Propagation p) {
  switch (p) {
    case Propagation::Feasible: return "feasible";
    case Propagation::Infeasible: return "infeasible";
    case Propagation::Unknown: return "unknown";
  }
  return "?";
}

Propagation domain_propagate(const MiqcqpInstance& inst,
                             const std::vector<std::pair<int, double>>& fixes) {
  std::vector<double> lo = inst.lower, hi = inst.upper;
  for (const auto& [i, v] : fixes) {
    if (i < 0 || i >= inst.n)
      throw std::invalid_argument("domain_propagate: index out of range");
    if (v < inst.lower[i] - 1e-9 || v > inst.upper[i] + 1e-9)
      throw std::invalid_argument("domain_propagate: fixed value out of bounds");
    lo[i] = hi[i] = v;
  }

  auto term_range = [&](double a, int j) {
    return a >= 0.0 ? std::pair<double, double>{a * lo[j], a * hi[j]}
                    : std::pair<double, double>{a * hi[j], a * lo[j]};
  };
  auto row_range = [&](const SparseRow& terms) {
    double mn = 0.0, mx = 0.0;
    for (const auto& t : terms) {
      auto [a, b] = term_range(t.coef, t.index);
      mn += a;
      mx += b;
    }
    return std::pair<double, double>{mn, mx};
  };

  for (int round = 0; round < 5; ++round) {
    bool changed = false;
    for (const auto& row : inst.linear_constraints) {
      auto [mn, mx] = row_range(row.terms);
      if (mn > row.rhs + 1e-9) return Propagation::Infeasible;
      for (const auto& t : row.terms) {
        if (t.coef == 0.0) continue;
        auto [tmin, tmax] = term_range(t.coef, t.index);
        double slack = row.rhs - (mn - tmin);
        if (t.coef > 0.0) {
          double cap = slack / t.coef;
          if (inst.integer[t.index]) cap = std::floor(cap + 1e-9);
          if (cap < hi[t.index] - 1e-12) {
            hi[t.index] = cap;
            changed = true;
          }
        } else {
          double floor_v = slack / t.coef;
          if (inst.integer[t.index]) floor_v = std::ceil(floor_v - 1e-9);
          if (floor_v > lo[t.index] + 1e-12) {
            lo[t.index] = floor_v;
            changed = true;
          }
        }
        if (lo[t.index] > hi[t.index] + 1e-9) return Propagation::Infeasible;
      }
    }
    if (!changed) break;
  }

  auto square_range = [&](int j) {
    double a = lo[j] * lo[j], b = hi[j] * hi[j];
    double mx = std::max(a, b);
    double mn = (lo[j] <= 0.0 && 0.0 <= hi[j]) ? 0.0 : std::min(a, b);
    return std::pair<double, double>{mn, mx};
  };
  auto product_range = [&](int i, int j) {
    double c0 = lo[i] * lo[j], c1 = lo[i] * hi[j], c2 = hi[i] * lo[j], c3 = hi[i] * hi[j];
    return std::pair<double, double>{std::min({c0, c1, c2, c3}), std::max({c0, c1, c2, c3})};
  };
  auto scaled = [](std::pair<double, double> r, double w) {
    return w >= 0.0 ? std::pair<double, double>{w * r.first, w * r.second}
                    : std::pair<double, double>{w * r.second, w * r.first};
  };

  bool all_rows_safe = true;
  for (const auto& row : inst.linear_constraints) {
    auto [mn, mx] = row_range(row.terms);
    if (mn > row.rhs + 1e-9) return Propagation::Infeasible;
    all_rows_safe = all_rows_safe && mx <= row.rhs + 1e-12;
  }
  for (const auto& qc : inst.quad_constraints) {
    double mn = 0.0, mx = 0.0;
    for (const auto& e : qc.Q.entries()) {
      auto r = e.row == e.col ? scaled(square_range(e.row), e.value)
                              : scaled(product_range(e.row, e.col), 2.0 * e.value);
      mn += r.first;
      mx += r.second;
    }
    auto [lmn, lmx] = row_range(qc.linear);
    mn += lmn;
    mx += lmx;
    if (mn > qc.rhs + 1e-9) return Propagation::Infeasible;
    all_rows_safe = all_rows_safe && mx <= qc.rhs + 1e-12;
  }
  for (int i = 0; i < inst.n; ++i) {
    if (lo[i] > hi[i] + 1e-9) return Propagation::Infeasible;
    if (inst.integer[i] && std::ceil(lo[i] - 1e-9) > std::floor(hi[i] + 1e-9) + 1e-12)
      return Propagation::Infeasible;
  }
  return all_rows_safe ? Propagation::Feasible : Propagation::Unknown;
}

std::vector<int> continuous_perturbation_support(const MiqcqpInstance& inst,
                                                 ShiftRule rule) {
  std::vector<double> shifts = applied_shifts(analyze_instance(inst), rule);
  std::vector<char> marked(inst.n, 0);
  auto mark = [&](const SymSparseMatrix& q, double shift) {
    if (shift >= 0.0) return;
    for (int i : q.support())
      if (!inst.integer[i]) marked[i] = 1;
  };
  mark(inst.objective.Q, shifts[0]);
  for (int k = 0; k < inst.num_quad(); ++k)
    mark(inst.quad_constraints[k].Q, shifts[k + 1]);
  std::vector<int> out;
  for (int i = 0; i < inst.n; ++i)
    if (marked[i]) out.push_back(i);
  return out;
}

PumpOutcome random_flip(const MiqcqpInstance& inst, const PumpConfig& cfg) {
  if (classify(inst) != ProblemClass::MIBQP)
    throw std::invalid_argument("random_flip expects a box-only instance");
  const auto t0 = Clock::now();
  NormalizedInstance norm = normalize(inst);
  std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), cfg.shift_rule);

  std::vector<double> y = relaxed_model_point(
      norm.inst, build_relaxation(norm, shifts),
      deadline_after(t0, cfg.subproblem_time_limit_s));
  flip_integers(norm.inst, y, cfg.seed, false);

  IncumbentTrace trace;
  trace.record(elapsed_s(t0), evaluate(inst, denormalize(norm, y)).objective);
  return assemble(inst, norm, y, std::move(trace), 1, PumpTermination::Converged, t0);
}

PumpOutcome random_flip_project(const MiqcqpInstance& inst, const PumpConfig& cfg) {
  if (classify(inst) != ProblemClass::MIQP)
    throw std::invalid_argument("random_flip_project expects a linearly constrained MIQP");
  const auto t0 = Clock::now();
  NormalizedInstance norm = normalize(inst);
  std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), cfg.shift_rule);

  auto y = flip_project_core(norm, shifts, uhat_from_upper_bounds(norm.inst), cfg, cfg.seed,
                             Clock::time_point::max());
  IncumbentTrace trace;
  if (y) trace.record(elapsed_s(t0), evaluate(inst, denormalize(norm, *y)).objective);
  return assemble(inst, norm, y, std::move(trace), 1,
                  y ? PumpTermination::Converged : PumpTermination::MaxIter, t0);
}

PumpOutcome fixed_point_miqp(const MiqcqpInstance& inst, const PumpConfig& cfg,
                             double budget_s) {
  if (classify(inst) != ProblemClass::MIQP)
    throw std::invalid_argument("fixed_point_miqp expects a linearly constrained MIQP");
  const auto t0 = Clock::now();
  const auto deadline = deadline_after(t0, budget_s);
  NormalizedInstance norm = normalize(inst);
  std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), cfg.shift_rule);

  const int iters = cfg.max_iter > 0 ? cfg.max_iter : 20;
  std::vector<double> uhat_raw(norm.inst.upper);
  double obj = kInf;
  std::optional<std::vector<double>> best;
  double best_obj = kInf;
  IncumbentTrace trace;
  PumpTermination term = PumpTermination::MaxIter;
  int done = 0;

  for (int it = 1; it <= iters; ++it) {
    done = it;
    if (Clock::now() >= deadline) {
      term = PumpTermination::TimeBudget;
      break;
    }
    auto y = flip_project_core(norm, shifts, make_uhat(norm.inst, uhat_raw), cfg,
                               cfg.seed + static_cast<std::uint64_t>(it), deadline);
    if (!y) {
      term = remaining_s(deadline) <= 0.0 ? PumpTermination::TimeBudget
                                          : PumpTermination::Converged;
      break;
    }
    double f = evaluate(inst, denormalize(norm, *y)).objective;
    if (f < best_obj) {
      best = *y;
      best_obj = f;
    }
    if (obj - f > cfg.epsilon_improve) {
      trace.record(elapsed_s(t0), f);
      for (int j = 0; j < norm.inst.n; ++j)
        if (!norm.inst.integer[j])
          uhat_raw[j] = std::clamp(cfg.alpha * uhat_raw[j] + 2.0 * (1.0 - cfg.alpha) * (*y)[j],
                                   0.0, norm.inst.upper[j]);
      obj = f;
    } else {
      term = PumpTermination::Converged;
      break;
    }
  }
  return assemble(inst, norm, best, std::move(trace), done, term, t0);
}

PumpOutcome two_projection(const MiqcqpInstance& inst, const PumpConfig& cfg,
                           double budget_s, const CancelToken* peer) {
  if (classify(inst) != ProblemClass::MIQCP)
    throw std::invalid_argument("two_projection expects quadratic constraints");
  const auto t0 = Clock::now();
  const auto deadline = deadline_after(t0, budget_s);
  NormalizedInstance norm = normalize(inst);
  std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), cfg.shift_rule);

  const int iters = cfg.max_iter > 0 ? cfg.max_iter : 10;
  PumpStart start = pump_start(norm, cfg, deadline);
  UHat u_hat = start.u_hat;
  const std::vector<int> over = original_indices(norm.inst);
  const ModelIR original = build_original(norm.inst);

  std::optional<std::vector<double>> x2;
  IncumbentTrace trace;
  PumpTermination term = PumpTermination::MaxIter;
  int done = 0;

  for (int it = 1; it <= iters; ++it) {
    done = it;
    if (Clock::now() >= deadline) {
      term = PumpTermination::TimeBudget;
      break;
    }
    if (peer && peer->cancelled()) {
      term = PumpTermination::PeerWin;
      break;
    }

    ModelIR proj1 =
        build_l1_projection(build_approx(norm, u_hat, shifts), start.x0, over);
    SolveRequest r1;
    r1.time_limit_s = std::min(cfg.subproblem_time_limit_s, remaining_s(deadline));
    if (r1.time_limit_s <= 0.0) {
      term = PumpTermination::TimeBudget;
      break;
    }
    r1.goal = SolveGoal::FirstFeasible;
    r1.seed = cfg.seed + static_cast<std::uint64_t>(it);
    SolveResult s1 = solve_model(proj1, r1);
    if (!s1.has_solution()) {
      double_uhat(norm.inst, u_hat);
      continue;
    }
    std::vector<double> x1 = extract_original(proj1, s1.x);
    snap_integers(norm.inst, x1);

    ModelIR proj2 = build_l1_projection(original, x1, over);
    SolveRequest r2;
    r2.time_limit_s = std::min(cfg.subproblem_time_limit_s, remaining_s(deadline));
    if (r2.time_limit_s <= 0.0) {
      term = PumpTermination::TimeBudget;
      break;
    }
    r2.goal = SolveGoal::FirstFeasible;
    r2.seed = cfg.seed + static_cast<std::uint64_t>(it);
    r2.warm_start = lift_point(proj2, norm.inst, x1);
    SolveResult s2 = solve_model(proj2, r2);
    if (s2.has_solution()) {
      x2 = extract_original(proj2, s2.x);
      snap_integers(norm.inst, *x2);
      term = PumpTermination::Converged;
      break;
    }
    blend_uhat(norm.inst, u_hat, cfg.alpha, x1, 1.0);
  }

  std::optional<std::vector<double>> final_point;
  if (x2 && check_feasible(norm.inst, *x2, 1e-6)) {
    trace.record(elapsed_s(t0), evaluate(inst, denormalize(norm, *x2)).objective);
    final_point = polish_point(norm.inst, *x2, cfg, deadline);
    trace.record(elapsed_s(t0), evaluate(inst, denormalize(norm, *final_point)).objective);
  }
  return assemble(inst, norm, final_point, std::move(trace), done, term, t0);
}

PumpOutcome relaxing_projection(const MiqcqpInstance& inst, const PumpConfig& cfg,
                                double budget_s, const CancelToken* peer) {
  if (classify(inst) != ProblemClass::MIQCP)
    throw std::invalid_argument("relaxing_projection expects quadratic constraints");
  const auto t0 = Clock::now();
  const auto deadline = deadline_after(t0, budget_s);
  NormalizedInstance norm = normalize(inst);
  std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), cfg.shift_rule);

  const int iters = cfg.max_iter > 0 ? cfg.max_iter : 10;
  PumpStart start = pump_start(norm, cfg, deadline);
  UHat u_hat = start.u_hat;
  const ModelIR fpr2 = build_fpr2(norm);

  std::optional<std::vector<double>> x3;
  IncumbentTrace trace;
  PumpTermination term = PumpTermination::MaxIter;
  int done = 0;

  for (int it = 1; it <= iters; ++it) {
    done = it;
    if (Clock::now() >= deadline) {
      term = PumpTermination::TimeBudget;
      break;
    }
    if (peer && peer->cancelled()) {
      term = PumpTermination::PeerWin;
      break;
    }

    ModelIR fpr1 = build_fpr1(norm, u_hat, shifts);
    SolveRequest r1;
    r1.time_limit_s = std::min(cfg.subproblem_time_limit_s, remaining_s(deadline));
    if (r1.time_limit_s <= 0.0) {
      term = PumpTermination::TimeBudget;
      break;
    }
    r1.goal = SolveGoal::ProveOptimal;
    r1.seed = cfg.seed + static_cast<std::uint64_t>(it);
    SolveResult s1 = solve_model(fpr1, r1);
    if (!s1.has_solution()) {
      double_uhat(norm.inst, u_hat);
      continue;
    }
    std::vector<double> x1 = extract_original(fpr1, s1.x);
    snap_integers(norm.inst, x1);

    double delta_total = 0.0;
    for (int i = 0; i < norm.inst.n; ++i)
      if (!norm.inst.integer[i])
        delta_total += std::max(0.0, u_hat.values[i] - x1[i]);
    if (delta_total <= 1e-8 && check_feasible(norm.inst, x1, 1e-6)) {
      x3 = x1;
      term = PumpTermination::Converged;
      break;
    }

    // FPR2 locally, integers pinned to the FPR1 assignment, slacks
    // warm-started at the current violations.
    std::vector<double> lb(fpr2.n_vars()), ub(fpr2.n_vars()), warm(fpr2.n_vars(), 0.0);
    for (int i = 0; i < fpr2.n_vars(); ++i) {
      lb[i] = fpr2.vars[i].lb;
      ub[i] = fpr2.vars[i].ub;
    }
    for (int i = 0; i < norm.inst.n; ++i) {
      warm[i] = x1[i];
      if (norm.inst.integer[i]) lb[i] = ub[i] = x1[i];
    }
    for (int i = norm.inst.n; i < fpr2.n_vars(); ++i) {
      int k = fpr2.vars[i].source;
      warm[i] = std::min(quad_row_violation(norm.inst.quad_constraints[k], x1),
                         fpr2.vars[i].ub);
    }
    ContinuousOptions copt;
    copt.kkt_tol = 1e-5;
    copt.deadline =
        std::min(deadline, deadline_after(Clock::now(), cfg.subproblem_time_limit_s));
    ContinuousResult s2 = minimize_continuous(fpr2, lb, ub, warm, copt);
    std::vector<double> x2 = extract_original(fpr2, s2.x);
    snap_integers(norm.inst, x2);
    if (check_feasible(norm.inst, x2, 1e-6)) {
      x3 = x2;
      term = PumpTermination::Converged;
      break;
    }
    blend_uhat(norm.inst, u_hat, cfg.alpha, x2, 1.0);
  }

  std::optional<std::vector<double>> final_point;
  if (x3) {
    trace.record(elapsed_s(t0), evaluate(inst, denormalize(norm, *x3)).objective);
    final_point = polish_point(norm.inst, *x3, cfg, deadline);
    trace.record(elapsed_s(t0), evaluate(inst, denormalize(norm, *final_point)).objective);
  }
  return assemble(inst, norm, final_point, std::move(trace), done, term, t0);
}

PumpOutcome race_pumps(const MiqcqpInstance& inst, const PumpConfig& cfg, double budget_s,
                       bool deterministic) {
  if (deterministic) {
    const auto t0 = Clock::now();
    PumpOutcome a = relaxing_projection(inst, cfg, 0.5 * budget_s);
    double used = elapsed_s(t0);
    PumpOutcome b = two_projection(inst, cfg, std::max(0.1, budget_s - used));
    for (auto& e : b.trace.events) e.t += used;
    b.trace.horizon += used;
    return combine_race(std::move(a), std::move(b));
  }

  CancelToken stop_relaxing, stop_two;
  PumpOutcome a, b;
#pragma omp parallel sections num_threads(2)
  {
#pragma omp section
    {
      a = relaxing_projection(inst, cfg, budget_s, &stop_relaxing);
      if (a.x_star) stop_two.cancel();
    }
#pragma omp section
    {
      b = two_projection(inst, cfg, budget_s, &stop_two);
      if (b.x_star) stop_relaxing.cancel();
    }
  }
  return combine_race(std::move(a), std::move(b));
}

PumpOutcome dispatch_pump(const MiqcqpInstance& inst, const PumpConfig& cfg, double budget_s,
                          bool deterministic) {
  switch (classify(inst)) {
    case ProblemClass::MIBQP:
      return random_flip(inst, cfg);
    case ProblemClass::MIQP:
      return continuous_perturbation_support(inst, cfg.shift_rule).empty()
                 ? random_flip_project(inst, cfg)
                 : fixed_point_miqp(inst, cfg, budget_s);
    case ProblemClass::MIQCP:
      return race_pumps(inst, cfg, budget_s, deterministic);
  }
  throw std::logic_error("unreachable");
}

}  // namespace miqcqp
