#include "miqcqp/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "miqcqp/convexify.hpp"

namespace miqcqp {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Rows regrouped for the continuous engine: quadratic rows stay <=, linear
/// GE rows are negated into <=, equalities kept separate.
struct PreparedRows {
  const ModelIR* model;
  std::vector<SparseRow> ineq;  // linear <= rows
  std::vector<double> ineq_rhs;
  std::vector<SparseRow> eq;
  std::vector<double> eq_rhs;

  explicit PreparedRows(const ModelIR& m) : model(&m) {
    for (const auto& row : m.lin_rows) {
      switch (row.sense) {
        case RowSense::LE:
          ineq.push_back(row.terms);
          ineq_rhs.push_back(row.rhs);
          break;
        case RowSense::GE: {
          SparseRow neg = row.terms;
          for (auto& t : neg) t.coef = -t.coef;
          ineq.push_back(std::move(neg));
          ineq_rhs.push_back(-row.rhs);
          break;
        }
        case RowSense::EQ:
          eq.push_back(row.terms);
          eq_rhs.push_back(row.rhs);
          break;
      }
    }
  }

  int n_quad() const { return static_cast<int>(model->quad_rows.size()); }
  int n_ineq() const { return static_cast<int>(ineq.size()); }
  int n_eq() const { return static_cast<int>(eq.size()); }

  double quad_value(int j, std::span<const double> x) const {
    const ModelQuadRow& row = model->quad_rows[j];
    return row.Q.quad_form(x) + row_dot(row.linear, x) - row.rhs;
  }
  double ineq_value(int j, std::span<const double> x) const {
    return row_dot(ineq[j], x) - ineq_rhs[j];
  }
  double eq_value(int j, std::span<const double> x) const {
    return row_dot(eq[j], x) - eq_rhs[j];
  }

  /// Violation of the rows only (bounds are handled by projection).
  double max_violation(std::span<const double> x) const {
    double v = 0.0;
    for (int j = 0; j < n_quad(); ++j) v = std::max(v, quad_value(j, x));
    for (int j = 0; j < n_ineq(); ++j) v = std::max(v, ineq_value(j, x));
    for (int j = 0; j < n_eq(); ++j) v = std::max(v, std::abs(eq_value(j, x)));
    return v;
  }
};

void add_sparse(std::span<double> out, const SparseRow& row, double scale) {
  for (const auto& t : row) out[t.index] += scale * t.coef;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double v = 0.0;
  for (size_t i = 0; i < a.size(); ++i) v += a[i] * b[i];
  return v;
}

/// Augmented-Lagrangian value and gradient at x for fixed multipliers.
struct AugLag {
  const PreparedRows& rows;
  std::vector<double> mu_quad;
  std::vector<double> mu_ineq;
  std::vector<double> nu;
  double rho;
  std::vector<double> scratch;  // matvec buffer

  AugLag(const PreparedRows& r, double rho0)
      : rows(r),
        mu_quad(r.n_quad(), 0.0),
        mu_ineq(r.n_ineq(), 0.0),
        nu(r.n_eq(), 0.0),
        rho(rho0),
        scratch(r.model->n_vars(), 0.0) {}

  double value(std::span<const double> x) const {
    double v = rows.model->objective_value(x);
    for (int j = 0; j < rows.n_quad(); ++j) {
      double m = mu_quad[j] + rho * rows.quad_value(j, x);
      v += (std::max(0.0, m) * std::max(0.0, m) - mu_quad[j] * mu_quad[j]) / (2.0 * rho);
    }
    for (int j = 0; j < rows.n_ineq(); ++j) {
      double m = mu_ineq[j] + rho * rows.ineq_value(j, x);
      v += (std::max(0.0, m) * std::max(0.0, m) - mu_ineq[j] * mu_ineq[j]) / (2.0 * rho);
    }
    for (int j = 0; j < rows.n_eq(); ++j) {
      double h = rows.eq_value(j, x);
      v += nu[j] * h + 0.5 * rho * h * h;
    }
    return v;
  }

  double value_and_grad(std::span<const double> x, std::span<double> grad) {
    const ModelIR& m = *rows.model;
    std::fill(grad.begin(), grad.end(), 0.0);
    double v = m.objective.constant + row_dot(m.objective.linear, x);
    add_sparse(grad, m.objective.linear, 1.0);
    if (!m.objective.Q.empty()) {
      m.objective.Q.multiply(x, scratch);
      v += dot(x, scratch);
      for (size_t i = 0; i < scratch.size(); ++i) grad[i] += 2.0 * scratch[i];
    }
    for (int j = 0; j < rows.n_quad(); ++j) {
      const ModelQuadRow& row = m.quad_rows[j];
      double g;
      if (!row.Q.empty()) {
        row.Q.multiply(x, scratch);
        g = dot(x, scratch) + row_dot(row.linear, x) - row.rhs;
      } else {
        g = row_dot(row.linear, x) - row.rhs;
      }
      double mult = std::max(0.0, mu_quad[j] + rho * g);
      v += (mult * mult - mu_quad[j] * mu_quad[j]) / (2.0 * rho);
      if (mult > 0.0) {
        if (!row.Q.empty())
          for (size_t i = 0; i < scratch.size(); ++i) grad[i] += 2.0 * mult * scratch[i];
        add_sparse(grad, row.linear, mult);
      }
    }
    for (int j = 0; j < rows.n_ineq(); ++j) {
      double g = rows.ineq_value(j, x);
      double mult = std::max(0.0, mu_ineq[j] + rho * g);
      v += (mult * mult - mu_ineq[j] * mu_ineq[j]) / (2.0 * rho);
      if (mult > 0.0) add_sparse(grad, rows.ineq[j], mult);
    }
    for (int j = 0; j < rows.n_eq(); ++j) {
      double h = rows.eq_value(j, x);
      v += nu[j] * h + 0.5 * rho * h * h;
      add_sparse(grad, rows.eq[j], nu[j] + rho * h);
    }
    return v;
  }

  void update_multipliers(std::span<const double> x) {
    for (int j = 0; j < rows.n_quad(); ++j)
      mu_quad[j] = std::max(0.0, mu_quad[j] + rho * rows.quad_value(j, x));
    for (int j = 0; j < rows.n_ineq(); ++j)
      mu_ineq[j] = std::max(0.0, mu_ineq[j] + rho * rows.ineq_value(j, x));
    for (int j = 0; j < rows.n_eq(); ++j) nu[j] += rho * rows.eq_value(j, x);
  }
};

struct InnerOutcome {
  double residual = kInf;
  int iterations = 0;
};

/// Projected gradient with Barzilai-Borwein steps and a nonmonotone Armijo
/// safeguard. Mutates x in place; returns the final step-1 projected-gradient
/// residual.
InnerOutcome projected_gradient(AugLag& lag, std::span<const double> lb,
                                std::span<const double> ub, std::vector<double>& x,
                                double tol, const ContinuousOptions& opt) {
  const int n = static_cast<int>(x.size());
  std::vector<double> grad(n), trial(n), trial_grad(n);
  std::vector<double> history;
  double value = lag.value_and_grad(x, grad);
  history.assign(8, value);
  int hist_pos = 0;

  double gnorm = 0.0;
  for (double g : grad) gnorm = std::max(gnorm, std::abs(g));
  double alpha = 1.0 / std::max(1.0, gnorm);

  InnerOutcome out;
  for (int it = 0; it < opt.max_inner; ++it) {
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
      double p = std::clamp(x[i] - grad[i], lb[i], ub[i]);
      residual = std::max(residual, std::abs(x[i] - p));
    }
    out.residual = residual;
    out.iterations = it;
    if (residual <= tol) return out;
    if ((it & 31) == 31) {
      if (Clock::now() >= opt.deadline) return out;
      if (opt.cancel && opt.cancel->cancelled()) return out;
    }

    double ref = *std::max_element(history.begin(), history.end());
    double step = alpha;
    double trial_value = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (int i = 0; i < n; ++i) trial[i] = std::clamp(x[i] - step * grad[i], lb[i], ub[i]);
      trial_value = lag.value(trial);
      double decrease = 0.0;
      for (int i = 0; i < n; ++i) decrease += grad[i] * (x[i] - trial[i]);
      if (trial_value <= ref - 1e-4 * decrease) {
        accepted = true;
        break;
      }
      step *= 0.5;
      if (step < 1e-14) break;
    }
    if (!accepted) return out;  // stalled

    double next_value = lag.value_and_grad(trial, trial_grad);
    double ss = 0.0, sy = 0.0;
    for (int i = 0; i < n; ++i) {
      double s = trial[i] - x[i];
      double y = trial_grad[i] - grad[i];
      ss += s * s;
      sy += s * y;
    }
    alpha = sy > 1e-14 ? std::clamp(ss / sy, 1e-12, 1e8) : std::min(alpha * 2.0, 1e8);
    x.swap(trial);
    grad.swap(trial_grad);
    value = next_value;
    history[hist_pos] = value;
    hist_pos = (hist_pos + 1) % static_cast<int>(history.size());
  }
  return out;
}

}  // namespace

ContinuousResult minimize_continuous(const ModelIR& model, std::span<const double> lb,
                                     std::span<const double> ub, std::span<const double> x0,
                                     const ContinuousOptions& opt) {
  const int n = model.n_vars();
  if (static_cast<int>(lb.size()) != n || static_cast<int>(ub.size()) != n ||
      static_cast<int>(x0.size()) != n)
    throw std::invalid_argument("minimize_continuous: size mismatch");

  PreparedRows rows(model);
  AugLag lag(rows, opt.rho0);
  std::vector<double> x(x0.begin(), x0.end());
  for (int i = 0; i < n; ++i) x[i] = std::clamp(x[i], lb[i], ub[i]);

  ContinuousResult best;
  bool best_feasible = false;
  auto consider = [&](const std::vector<double>& pt, double residual) {
    double viol = rows.max_violation(pt);
    double obj = model.objective_value(pt);
    bool feas = viol <= 1e-6;
    bool better = false;
    if (feas && (!best_feasible || obj < best.objective))
      better = true;
    else if (!feas && !best_feasible && viol < best.max_violation)
      better = true;
    if (better || best.x.empty()) {
      best.x = pt;
      best.objective = obj;
      best.max_violation = viol;
      best.kkt_residual = std::max(residual, viol);
      best_feasible = feas;
    }
    return viol;
  };

  double prev_viol = kInf;
  int total_iters = 0;
  for (int outer = 0; outer < opt.max_outer; ++outer) {
    InnerOutcome inner = projected_gradient(lag, lb, ub, x, 0.5 * opt.kkt_tol, opt);
    total_iters += inner.iterations;
    double viol = consider(x, inner.residual);
    if (viol <= opt.feas_tol && inner.residual <= opt.kkt_tol) {
      best.converged = true;
      break;
    }
    if (Clock::now() >= opt.deadline) break;
    if (opt.cancel && opt.cancel->cancelled()) break;
    lag.update_multipliers(x);
    if (viol > 0.25 * prev_viol) lag.rho = std::min(lag.rho * 5.0, opt.rho_max);
    prev_viol = viol;
  }
  best.iterations = total_iters;
  return best;
}

ContinuousResult minimize_continuous(const ModelIR& model, std::span<const double> x0,
                                     const ContinuousOptions& opt) {
  std::vector<double> lb(model.n_vars()), ub(model.n_vars());
  for (int i = 0; i < model.n_vars(); ++i) {
    lb[i] = model.vars[i].lb;
    ub[i] = model.vars[i].ub;
  }
  return minimize_continuous(model, lb, ub, x0, opt);
}

namespace {

struct Bright {  // branch-and-bound node
  std::vector<double> lb, ub;
  std::vector<double> warm;
  double bound = -kInf;
  long id = 0;
  int depth = 0;
};

std::vector<int> integral_indices(const ModelIR& model) {
  std::vector<int> idx;
  for (int j = 0; j < model.n_vars(); ++j)
    if (model.integral_kind(j)) idx.push_back(j);
  return idx;
}

/// Most fractional integral coordinate, ties by lowest index; -1 if integral.
int pick_branch_var(const std::vector<int>& integrals, std::span<const double> x) {
  int best = -1;
  double best_frac = 1e-6;
  for (int j : integrals) {
    double frac = std::abs(x[j] - std::round(x[j]));
    if (frac > best_frac) {
      best_frac = frac;
      best = j;
    }
  }
  return best;
}

std::vector<double> box_center(std::span<const double> lb, std::span<const double> ub) {
  std::vector<double> c(lb.size());
  for (size_t i = 0; i < lb.size(); ++i) {
    double lo = std::isfinite(lb[i]) ? lb[i] : 0.0;
    double hi = std::isfinite(ub[i]) ? ub[i] : lo;
    c[i] = 0.5 * (lo + hi);
  }
  return c;
}

std::vector<double> clamped(std::span<const double> x, std::span<const double> lb,
                            std::span<const double> ub) {
  std::vector<double> out(x.begin(), x.end());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], lb[i], ub[i]);
  return out;
}

/// Rounds integral coordinates, then re-solves the continuous block with them
/// pinned so equality links stay satisfied. Returns the repaired point, or an
/// empty vector when the pinned solve does not reach feasibility.
std::vector<double> repair_integral(const ModelIR& model, const std::vector<int>& integrals,
                                    const Bright& node, std::span<const double> x,
                                    const ContinuousOptions& base_opt) {
  std::vector<double> lb(node.lb), ub(node.ub);
  std::vector<double> start(x.begin(), x.end());
  for (int j : integrals) {
    double v = std::round(x[j]);
    lb[j] = ub[j] = v;
    start[j] = v;
  }
  ContinuousResult res = minimize_continuous(model, lb, ub, start, base_opt);
  for (int j : integrals) res.x[j] = lb[j];
  if (!model.feasible(res.x, 1e-6)) return {};
  return res.x;
}

struct Incumbent {
  bool have = false;
  std::vector<double> x;
  double objective = kInf;

  bool offer(const ModelIR& model, std::vector<double> candidate) {
    if (candidate.empty()) return false;
    if (!model.feasible(candidate, 1e-6)) return false;
    double obj = model.objective_value(candidate);
    if (have && obj >= objective - 1e-12) return false;
    have = true;
    x = std::move(candidate);
    objective = obj;
    return true;
  }
};

SolveResult finish(SolveStatus status, const Incumbent& inc, double dual, long nodes,
                   Clock::time_point start, std::string message = {}) {
  SolveResult r;
  r.status = status;
  if (inc.have && (status == SolveStatus::Optimal || status == SolveStatus::Feasible)) {
    r.x = inc.x;
    r.objective = inc.objective;
  }
  r.dual_bound = dual;
  r.nodes = nodes;
  r.wall_time_s = elapsed_s(start);
  r.message = std::move(message);
  return r;
}

}  // namespace

SolveResult solve_convex(const ModelIR& model, const SolveRequest& req) {
  if (!model.convex)
    throw std::invalid_argument("solve_convex: model is not tagged convex");
  const auto start = Clock::now();
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(req.time_limit_s));
  const std::vector<int> integrals = integral_indices(model);
  const int n = model.n_vars();

  ContinuousOptions copt;
  copt.deadline = deadline;
  copt.cancel = req.cancel;

  Bright root;
  root.lb.resize(n);
  root.ub.resize(n);
  for (int i = 0; i < n; ++i) {
    root.lb[i] = model.vars[i].lb;
    root.ub[i] = model.vars[i].ub;
  }
  root.warm = req.warm_start.empty() ? box_center(root.lb, root.ub)
                                     : clamped(req.warm_start, root.lb, root.ub);

  auto by_bound = [](const Bright& a, const Bright& b) {
    if (a.bound != b.bound) return a.bound > b.bound;
    return a.id > b.id;
  };
  std::priority_queue<Bright, std::vector<Bright>, decltype(by_bound)> open(by_bound);
  open.push(std::move(root));

  Incumbent inc;
  double root_bound = -kInf;
  long nodes = 0;
  long next_id = 1;
  bool limited = false;
  bool root_infeasible = false;

  while (!open.empty()) {
    if (Clock::now() >= deadline || (req.cancel && req.cancel->cancelled()) ||
        nodes >= req.max_nodes) {
      limited = true;
      break;
    }
    Bright node = open.top();
    open.pop();
    double margin = 1e-7 * (1.0 + std::abs(inc.objective));
    if (inc.have && node.bound >= inc.objective - 1e-12 + margin) continue;
    ++nodes;

    ContinuousResult rel = minimize_continuous(model, node.lb, node.ub, node.warm, copt);
    if (rel.max_violation > 1e-6) {
      if (nodes == 1) root_infeasible = true;
      continue;  // node region judged infeasible by the converged penalty solve
    }
    if (nodes == 1) root_bound = rel.objective;
    if (inc.have && rel.objective >= inc.objective - 1e-12 + margin) continue;

    int branch = pick_branch_var(integrals, rel.x);
    if (branch < 0) {
      bool improved = inc.offer(model, repair_integral(model, integrals, node, rel.x, copt));
      if (improved && req.goal == SolveGoal::FirstFeasible)
        return finish(SolveStatus::Feasible, inc, root_bound, nodes, start);
      continue;
    }

    double v = rel.x[branch];
    Bright down, up;
    down.lb = node.lb;
    down.ub = node.ub;
    down.ub[branch] = std::floor(v);
    up.lb = node.lb;
    up.ub = node.ub;
    up.lb[branch] = std::ceil(v);
    for (Bright* child : {&down, &up}) {
      if (child->lb[branch] > child->ub[branch] + 1e-9) continue;
      child->bound = rel.objective;
      child->warm = clamped(rel.x, child->lb, child->ub);
      child->id = next_id++;
      child->depth = node.depth + 1;
      open.push(std::move(*child));
    }
  }

  if (limited) {
    if (inc.have) {
      double dual = open.empty() ? inc.objective : std::min(open.top().bound, inc.objective);
      return finish(SolveStatus::Feasible, inc, dual, nodes, start);
    }
    return finish(SolveStatus::TimeLimitNoSolution, inc, root_bound, nodes, start,
                  "limit reached before any incumbent");
  }
  if (!inc.have)
    return finish(SolveStatus::Infeasible, inc, kInf, nodes, start,
                  root_infeasible ? "root relaxation infeasible" : "all nodes infeasible");
  return finish(SolveStatus::Optimal, inc, inc.objective, nodes, start);
}

SolveResult solve_nonconvex(const ModelIR& model, const SolveRequest& req) {
  const auto start = Clock::now();
  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                    std::chrono::duration<double>(req.time_limit_s));
  const std::vector<int> integrals = integral_indices(model);
  const int n = model.n_vars();
  // With every variable integral the relaxation guides nothing (no bound
  // pruning here) and each leaf is a point box, so the tree reduces to plain
  // enumeration with one evaluation per leaf.
  const bool pure_integral = static_cast<int>(integrals.size()) == n;

  ContinuousOptions copt;
  copt.kkt_tol = 1e-5;
  copt.deadline = deadline;
  copt.cancel = req.cancel;

  Bright root;
  root.lb.resize(n);
  root.ub.resize(n);
  for (int i = 0; i < n; ++i) {
    root.lb[i] = model.vars[i].lb;
    root.ub[i] = model.vars[i].ub;
  }
  root.warm = req.warm_start.empty() ? box_center(root.lb, root.ub)
                                     : clamped(req.warm_start, root.lb, root.ub);

  std::vector<Bright> stack;
  stack.push_back(std::move(root));
  Incumbent inc;
  long nodes = 0;
  long next_id = 1;
  bool limited = false;

  while (!stack.empty()) {
    if (Clock::now() >= deadline || (req.cancel && req.cancel->cancelled()) ||
        nodes >= req.max_nodes) {
      limited = true;
      break;
    }
    Bright node = std::move(stack.back());
    stack.pop_back();
    ++nodes;

    bool leaf = true;
    for (int j : integrals)
      if (node.ub[j] - node.lb[j] > 1e-9) leaf = false;

    if (leaf) {
      bool point_box = true;
      for (int i = 0; i < n; ++i)
        if (node.ub[i] - node.lb[i] > 1e-12) {
          point_box = false;
          break;
        }
      if (point_box) {
        std::vector<double> pt = node.lb;
        if (inc.offer(model, std::move(pt)) && req.goal == SolveGoal::FirstFeasible)
          return finish(SolveStatus::Feasible, inc, -kInf, nodes, start);
        continue;
      }
      // Multi-start local descent: parent relaxation point, box center,
      // seeded random point.
      std::mt19937_64 rng(req.seed * 0x9e3779b97f4a7c15ULL + std::uint64_t(node.id) + 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::vector<double> randpt(n);
      for (int i = 0; i < n; ++i) {
        double lo = node.lb[i], hi = node.ub[i];
        randpt[i] = lo + unit(rng) * (hi - lo);
      }
      const std::vector<std::vector<double>> starts = {
          node.warm, box_center(node.lb, node.ub), randpt};
      bool improved = false;
      for (const auto& s0 : starts) {
        ContinuousResult res =
            minimize_continuous(model, node.lb, node.ub, clamped(s0, node.lb, node.ub), copt);
        for (int j : integrals) res.x[j] = node.lb[j];
        improved = inc.offer(model, std::move(res.x)) || improved;
        if (Clock::now() >= deadline) break;
      }
      if (improved && req.goal == SolveGoal::FirstFeasible)
        return finish(SolveStatus::Feasible, inc, -kInf, nodes, start);
      continue;
    }

    int branch = -1;
    double v = 0.0;
    double split_lo = 0.0, split_hi = 0.0;  // down child ub, up child lb
    std::vector<double> warm_src;
    if (pure_integral) {
      for (int j : integrals)
        if (node.ub[j] - node.lb[j] > 1e-9) {
          branch = j;
          break;
        }
      if (branch < 0) continue;
      split_lo = std::floor(0.5 * (node.lb[branch] + node.ub[branch]));
      split_hi = split_lo + 1.0;
      v = split_lo;
      warm_src = node.warm;
    } else {
      ContinuousResult rel = minimize_continuous(model, node.lb, node.ub, node.warm, copt);
      branch = pick_branch_var(integrals, rel.x);
      if (branch >= 0) {
        v = rel.x[branch];
        split_lo = std::floor(v);
        split_hi = std::ceil(v);
      } else {
        // Relaxation integral: offer it, then keep enumerating by fixing the
        // lowest-index still-open integer at its relaxation value.
        if (inc.offer(model, repair_integral(model, integrals, node, rel.x, copt)) &&
            req.goal == SolveGoal::FirstFeasible)
          return finish(SolveStatus::Feasible, inc, -kInf, nodes, start);
        branch = -1;
        for (int j : integrals)
          if (node.ub[j] - node.lb[j] > 1e-9) {
            branch = j;
            break;
          }
        if (branch < 0) continue;
        v = std::round(rel.x[branch]);
        if (v >= node.ub[branch]) {
          split_lo = v - 1.0;
          split_hi = v;
        } else {
          split_lo = v;
          split_hi = v + 1.0;
        }
      }
      warm_src = std::move(rel.x);
    }

    Bright down, up;
    down.lb = node.lb;
    down.ub = node.ub;
    down.ub[branch] = split_lo;
    up.lb = node.lb;
    up.ub = node.ub;
    up.lb[branch] = split_hi;
    // Depth-first; push the far side first so the side nearest the
    // relaxation value is explored first.
    bool down_first = v - split_lo <= split_hi - v;
    std::vector<Bright*> order =
        down_first ? std::vector<Bright*>{&up, &down} : std::vector<Bright*>{&down, &up};
    for (Bright* child : order) {
      if (child->lb[branch] > child->ub[branch] + 1e-9) continue;
      child->warm = clamped(warm_src, child->lb, child->ub);
      child->id = next_id++;
      child->depth = node.depth + 1;
      stack.push_back(std::move(*child));
    }
  }

  if (limited) {
    if (inc.have) return finish(SolveStatus::Feasible, inc, -kInf, nodes, start);
    return finish(SolveStatus::TimeLimitNoSolution, inc, -kInf, nodes, start,
                  "limit reached before any incumbent");
  }
  if (!inc.have)
    return finish(SolveStatus::Infeasible, inc, kInf, nodes, start,
                  "enumeration finished without a feasible point (leaf solves are local)");
  return finish(SolveStatus::Feasible, inc, -kInf, nodes, start);
}

namespace {
std::string g_external_backend;
}

void set_external_backend(std::string command) { g_external_backend = std::move(command); }

const std::string& external_backend() { return g_external_backend; }

SolveResult solve_model(const ModelIR& model, const SolveRequest& req) {
  if (!g_external_backend.empty()) return solve_external(g_external_backend, model, req);
  return model.convex ? solve_convex(model, req) : solve_nonconvex(model, req);
}

SolveResult solve_local_nlp(const MiqcqpInstance& inst,
                            const std::vector<std::pair<int, double>>& fixed,
                            std::span<const double> start, double time_limit_s) {
  const auto t0 = Clock::now();
  std::vector<double> fix_value(inst.n, std::numeric_limits<double>::quiet_NaN());
  for (const auto& [idx, val] : fixed) {
    if (idx < 0 || idx >= inst.n) throw std::invalid_argument("solve_local_nlp: bad index");
    fix_value[idx] = val;
  }
  for (int i = 0; i < inst.n; ++i) {
    if (!inst.integer[i]) continue;
    double v = fix_value[i];
    if (std::isnan(v))
      throw std::invalid_argument("solve_local_nlp: integer variable not fixed");
    if (std::abs(v - std::round(v)) > 1e-6 || v < inst.lower[i] - 1e-9 ||
        v > inst.upper[i] + 1e-9)
      throw std::invalid_argument("solve_local_nlp: fixed value out of domain");
  }

  ModelIR model = build_original(inst);
  std::vector<double> lb(inst.lower), ub(inst.upper);
  std::vector<double> x0(start.begin(), start.end());
  for (int i = 0; i < inst.n; ++i) {
    if (!std::isnan(fix_value[i])) {
      lb[i] = ub[i] = std::round(fix_value[i]);
      x0[i] = lb[i];
    }
    x0[i] = std::clamp(x0[i], lb[i], ub[i]);
  }

  ContinuousOptions opt;
  opt.kkt_tol = 1e-5;
  opt.deadline = t0 + std::chrono::duration_cast<Clock::duration>(
                          std::chrono::duration<double>(time_limit_s));
  ContinuousResult res = minimize_continuous(model, lb, ub, x0, opt);
  for (int i = 0; i < inst.n; ++i)
    if (!std::isnan(fix_value[i])) res.x[i] = lb[i];

  SolveResult out;
  out.nodes = 1;
  bool res_ok = check_feasible(inst, res.x, 1e-6);
  bool start_ok = check_feasible(inst, x0, 1e-6);
  double res_obj = evaluate(inst, res.x).objective;
  double start_obj = evaluate(inst, x0).objective;
  if (res_ok && (!start_ok || res_obj <= start_obj)) {
    out.status = SolveStatus::Feasible;
    out.x = res.x;
    out.objective = res_obj;
  } else if (start_ok) {
    out.status = SolveStatus::Feasible;
    out.x = x0;
    out.objective = start_obj;
  } else {
    out.status = Clock::now() >= opt.deadline ? SolveStatus::TimeLimitNoSolution
                                              : SolveStatus::Error;
    out.message = "local descent did not reach feasibility";
  }
  out.wall_time_s = elapsed_s(t0);
  return out;
}

SolveResult brute_force(const MiqcqpInstance& inst, int grid_points) {
  const auto t0 = Clock::now();
  SolveResult out;
  const std::vector<int> ints = inst.integer_indices();
  const std::vector<int> conts = inst.continuous_indices();

  auto fail = [&](const std::string& msg) {
    out.status = SolveStatus::Error;
    out.message = msg;
    out.wall_time_s = elapsed_s(t0);
    return out;
  };
  if (static_cast<int>(ints.size()) > 16) return fail("brute_force: more than 16 integers");
  if (static_cast<int>(conts.size()) > 3)
    return fail("brute_force: more than 3 continuous variables");
  if (grid_points < 2) grid_points = 2;

  double total_assignments = 1.0;
  std::vector<int> range(ints.size());
  for (size_t k = 0; k < ints.size(); ++k) {
    int i = ints[k];
    long span = std::llround(inst.upper[i] - inst.lower[i]) + 1;
    if (span > 8) return fail("brute_force: integer range wider than 8 values");
    range[k] = static_cast<int>(span);
    total_assignments *= double(span);
  }
  double grid_total = 1.0;
  for (size_t k = 0; k < conts.size(); ++k)
    grid_total *= inst.lower[conts[k]] == inst.upper[conts[k]] ? 1.0 : double(grid_points);
  if (total_assignments * grid_total > 2e7)
    return fail("brute_force: enumeration too large");

  std::vector<double> x(inst.n, 0.0);
  std::vector<int> digit(ints.size(), 0);
  long enumerated = 0;

  struct AssignmentBest {
    std::vector<double> x;
    double objective = kInf;
    bool feasible = false;
  };
  std::vector<AssignmentBest> top;  // polish candidates, best-first, <= 6

  bool more = true;
  while (more) {
    for (size_t k = 0; k < ints.size(); ++k) x[ints[k]] = inst.lower[ints[k]] + digit[k];

    AssignmentBest best_here;
    std::vector<int> gdigit(conts.size(), 0);
    bool gmore = true;
    while (gmore) {
      for (size_t k = 0; k < conts.size(); ++k) {
        int i = conts[k];
        double t = inst.lower[i] == inst.upper[i]
                       ? 0.0
                       : double(gdigit[k]) / double(grid_points - 1);
        x[i] = inst.lower[i] + t * (inst.upper[i] - inst.lower[i]);
      }
      ++enumerated;
      Evaluation ev = evaluate(inst, x);
      if (ev.max_violation <= 1e-9 && ev.objective < best_here.objective) {
        best_here.x = x;
        best_here.objective = ev.objective;
        best_here.feasible = true;
      }
      gmore = false;
      for (size_t k = 0; k < conts.size(); ++k) {
        int limit = inst.lower[conts[k]] == inst.upper[conts[k]] ? 1 : grid_points;
        if (++gdigit[k] < limit) {
          gmore = true;
          break;
        }
        gdigit[k] = 0;
      }
      if (conts.empty()) gmore = false;
    }

    if (best_here.feasible) {
      top.push_back(std::move(best_here));
      std::sort(top.begin(), top.end(),
                [](const AssignmentBest& a, const AssignmentBest& b) {
                  return a.objective < b.objective;
                });
      if (top.size() > 6) top.pop_back();
    }

    more = false;
    for (size_t k = 0; k < ints.size(); ++k) {
      if (++digit[k] < range[k]) {
        more = true;
        break;
      }
      digit[k] = 0;
    }
    if (ints.empty()) more = false;
  }

  Incumbent inc;
  ModelIR check_model = build_original(inst);
  for (const auto& cand : top) {
    inc.offer(check_model, cand.x);
    if (!conts.empty()) {
      std::vector<std::pair<int, double>> fixed;
      for (int i : ints) fixed.emplace_back(i, cand.x[i]);
      SolveResult polished = solve_local_nlp(inst, fixed, cand.x, 1.0);
      if (polished.has_solution()) inc.offer(check_model, polished.x);
    }
  }

  out.nodes = enumerated;
  out.wall_time_s = elapsed_s(t0);
  if (!inc.have) {
    out.status = SolveStatus::Infeasible;
    out.message = "no feasible point in the enumeration";
    return out;
  }
  out.status = conts.empty() ? SolveStatus::Optimal : SolveStatus::Feasible;
  out.x = inc.x;
  out.objective = inc.objective;
  return out;
}

namespace {

std::string make_temp_dir() {
  std::string tmpl = (std::filesystem::temp_directory_path() / "miqcqp.XXXXXX").string();
  std::vector<char> buf(tmpl.begin(), tmpl.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data())) throw std::runtime_error("could not create temp directory");
  return std::string(buf.data());
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const char* to_string(SolveGoal g) {
  switch (g) {
    case SolveGoal::ProveOptimal: return "prove-optimal";
    case SolveGoal::FirstFeasible: return "first-feasible";
    case SolveGoal::BestWithinLimit: return "best-within-limit";
  }
  return "?";
}

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::Feasible: return "Feasible";
    case SolveStatus::Infeasible: return "Infeasible";
    case SolveStatus::TimeLimitNoSolution: return "TimeLimitNoSolution";
    case SolveStatus::Error: return "Error";
  }
  return "?";
}

SolveStatus solve_status_from_string(const std::string& s) {
  if (s == "Optimal") return SolveStatus::Optimal;
  if (s == "Feasible") return SolveStatus::Feasible;
  if (s == "Infeasible") return SolveStatus::Infeasible;
  if (s == "TimeLimitNoSolution") return SolveStatus::TimeLimitNoSolution;
  if (s == "Error") return SolveStatus::Error;
  throw std::invalid_argument("unknown solve status: " + s);
}

SolveResult solve_external(const std::string& command, const ModelIR& model,
                           const SolveRequest& req) {
  const auto t0 = Clock::now();
  SolveResult out;
  auto fail = [&](std::string msg) {
    out.status = SolveStatus::Error;
    out.x.clear();
    out.message = std::move(msg);
    out.wall_time_s = elapsed_s(t0);
    return out;
  };

  std::string dir;
  try {
    dir = make_temp_dir();
  } catch (const std::exception& e) {
    return fail(e.what());
  }
  const std::string model_path = dir + "/model.json";
  const std::string sol_path = dir + "/solution.txt";
  const std::string log_path = dir + "/adapter.log";
  struct Cleanup {
    std::string dir;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove_all(dir, ec);
    }
  } cleanup{dir};

  {
    std::ofstream mf(model_path);
    mf << model.to_json().dump(2) << "\n";
    if (!mf.good()) return fail("could not write model file");
  }

  std::ostringstream cmd;
  cmd << command << " \"" << model_path << "\" \"" << sol_path << "\" " << req.time_limit_s
      << " > \"" << log_path << "\" 2>&1";
  int rc = std::system(cmd.str().c_str());
  if (rc != 0)
    return fail("adapter exited with code " + std::to_string(rc) + ": " +
                read_file(log_path));

  std::ifstream sol(sol_path);
  if (!sol.good()) return fail("adapter produced no solution file");

  std::string line;
  SolveStatus status = SolveStatus::Error;
  bool have_status = false;
  std::vector<double> x(model.n_vars(), 0.0);
  std::vector<char> seen(model.n_vars(), 0);
  std::unordered_map<std::string, int> name_to_index;
  for (int j = 0; j < model.n_vars(); ++j) name_to_index[model.vars[j].name] = j;

  while (std::getline(sol, line)) {
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (!have_status) {
      try {
        status = solve_status_from_string(head);
      } catch (const std::exception& e) {
        return fail(e.what());
      }
      have_status = true;
      continue;
    }
    if (head == "objective") continue;  // recomputed below
    double value;
    if (!(ls >> value)) return fail("unparsable solution line: " + line);
    auto it = name_to_index.find(head);
    if (it == name_to_index.end()) return fail("unknown variable in solution: " + head);
    x[it->second] = value;
    seen[it->second] = 1;
  }
  if (!have_status) return fail("solution file missing status line");

  out.status = status;
  out.wall_time_s = elapsed_s(t0);
  if (status == SolveStatus::Optimal || status == SolveStatus::Feasible) {
    if (!model.feasible(x, 1e-6))
      return fail("adapter returned a point violating the model");
    out.x = std::move(x);
    out.objective = model.objective_value(out.x);
  }
  return out;
}

}  // namespace miqcqp
