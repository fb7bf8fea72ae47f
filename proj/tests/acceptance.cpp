// Acceptance gate for the primal heuristic engine. Twelve criteria run in
// sequence and print exactly one PASS/FAIL line each; the process exits
// nonzero if any criterion fails. Tolerances are stated inline.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "corpus.hpp"
#include "miqcqp/convexify.hpp"
#include "miqcqp/heuristics.hpp"
#include "miqcqp/instance.hpp"
#include "miqcqp/localbranch.hpp"
#include "miqcqp/metrics.hpp"
#include "miqcqp/qplib.hpp"
#include "miqcqp/solver.hpp"
#include "miqcqp/spectral.hpp"
#include "oracles.hpp"

using namespace miqcqp;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> failures;
};

void fail(Outcome& out, std::string msg) {
  out.pass = false;
  if (out.failures.size() < 6) out.failures.push_back(std::move(msg));
}

const std::vector<corpus::Entry>& desk_corpus() {
  static std::vector<corpus::Entry> entries = corpus::desk();
  return entries;
}

// Pipeline results shared between the end-to-end and oracle-gap criteria.
struct PipelineResult {
  bool found = false;
  double objective = 0.0;
  double wall_s = 0.0;
};
std::vector<PipelineResult> g_pipeline;

std::vector<double> sample_box_point(std::mt19937_64& rng, const MiqcqpInstance& inst) {
  std::vector<double> x(inst.n);
  for (int i = 0; i < inst.n; ++i) {
    if (inst.integer[i]) {
      x[i] = corpus::detail::uniform_int(rng, static_cast<int>(inst.lower[i]),
                                         static_cast<int>(inst.upper[i]));
    } else {
      x[i] = corpus::detail::uniform(rng, inst.lower[i], inst.upper[i]);
    }
  }
  return x;
}

double planted_objective(const corpus::Entry& e) { return evaluate(e.inst, e.planted).objective; }

MiqcqpInstance blank_binary(int n) {
  MiqcqpInstance inst;
  inst.name = "blank" + std::to_string(n);
  inst.n = n;
  inst.lower.assign(n, 0.0);
  inst.upper.assign(n, 1.0);
  inst.integer.assign(n, 1);
  inst.objective.linear.assign(n, 0.0);
  inst.validate();
  return inst;
}

int hamming(const std::vector<double>& a, const std::vector<double>& b) {
  int d = 0;
  for (size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]) > 0.5;
  return d;
}

// ---------------------------------------------------------------------------
// Criterion 1: the shifted relaxation never cuts an original-feasible point.

MiqcqpInstance random_soundness_instance(std::mt19937_64& rng, int idx) {
  using namespace corpus::detail;
  MiqcqpInstance inst;
  inst.name = "sound_" + std::to_string(idx);
  int n_bin = uniform_int(rng, 1, 3);
  int n_gen = uniform_int(rng, 0, 2);
  int n_cont = uniform_int(rng, 1, 4);
  inst.n = n_bin + n_gen + n_cont;
  inst.lower.assign(inst.n, 0.0);
  inst.upper.assign(inst.n, 1.0);
  inst.integer.assign(inst.n, 1);
  for (int i = n_bin; i < n_bin + n_gen; ++i) inst.upper[i] = uniform_int(rng, 2, 4);
  for (int i = n_bin + n_gen; i < inst.n; ++i) {
    inst.integer[i] = 0;
    inst.upper[i] = uniform(rng, 0.7, 1.6);
  }
  inst.objective.Q = random_sym(rng, inst.n, -1.0, 0.9, 0.6, 0.5);
  inst.objective.linear.resize(inst.n);
  for (auto& c : inst.objective.linear) c = uniform(rng, -1.0, 1.0);
  std::vector<double> z = plant_point(rng, inst);
  int m1 = uniform_int(rng, 1, 3);
  for (int r = 0; r < m1; ++r)
    add_planted_quad_row(rng, inst, z, uniform(rng, 1.2, 2.4), r % 2 == 0);
  if (uniform_int(rng, 0, 1) == 1) add_planted_linear_row(rng, inst, z, uniform(rng, 0.8, 1.6));
  inst.validate();
  return inst;
}

Outcome criterion_relaxation_soundness() {
  Outcome out;
  std::mt19937_64 rng(101);
  const int kInstances = 50;
  const int kSamplesPer = 200;
  int instances = 0, samples = 0, feasible_checked = 0;
  double worst = 0.0;
  int guard = 0;
  while (instances < kInstances && ++guard < 10 * kInstances) {
    MiqcqpInstance inst = random_soundness_instance(rng, instances);
    if (inst.n > 10 || inst.num_quad() > 3) {
      fail(out, "generator exceeded the n <= 10, m1 <= 3 envelope");
      break;
    }
    NormalizedInstance norm = normalize(inst);
    std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), ShiftRule::Safe);
    bool shifted = std::any_of(shifts.begin(), shifts.end(), [](double s) { return s < 0.0; });
    if (!shifted) continue;  // only genuinely nonconvex instances count
    ModelIR relax = build_relaxation(norm, shifts);
    ++instances;
    for (int s = 0; s < kSamplesPer; ++s) {
      ++samples;
      std::vector<double> x = sample_box_point(rng, norm.inst);
      if (!check_feasible(norm.inst, x, 1e-12)) continue;
      ++feasible_checked;
      std::vector<double> full = lift_point(relax, norm.inst, x);
      double viol = relax.max_violation(full);
      worst = std::max(worst, viol);
      if (viol > 1e-9)
        fail(out, fmt("%s: relaxation cuts a feasible sample (violation %.3e)",
                      inst.name.c_str(), viol));
    }
  }
  if (instances < kInstances) fail(out, fmt("only %d nonconvex instances generated", instances));
  if (feasible_checked < 500)
    fail(out, fmt("only %d feasible samples; margins too tight", feasible_checked));
  out.detail = fmt("%d nonconvex instances, %d samples (%d feasible), max violation %.2e, tol 1e-9",
                   instances, samples, feasible_checked, worst);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 2: Approx(u-hat) solutions with u-hat_i <= x_i on the continuous
// block are feasible for the original instance.

MiqcqpInstance random_consistency_instance(std::mt19937_64& rng, int idx) {
  using namespace corpus::detail;
  MiqcqpInstance inst;
  inst.name = "consist_" + std::to_string(idx);
  int n_bin = uniform_int(rng, 2, 4);
  int n_cont = uniform_int(rng, 1, 3);
  inst.n = n_bin + n_cont;
  inst.lower.assign(inst.n, 0.0);
  inst.upper.assign(inst.n, 1.0);
  inst.integer.assign(inst.n, 1);
  for (int i = n_bin; i < inst.n; ++i) {
    inst.integer[i] = 0;
    inst.upper[i] = uniform(rng, 0.5, 1.0);
  }
  inst.objective.Q = random_sym(rng, inst.n, -0.8, 0.8, 0.5, 0.4);
  inst.objective.linear.resize(inst.n);
  for (auto& c : inst.objective.linear) c = uniform(rng, -1.0, 1.0);
  std::vector<double> z = plant_point(rng, inst);
  int m1 = uniform_int(rng, 1, 2);
  for (int r = 0; r < m1; ++r)
    add_planted_quad_row(rng, inst, z, 0.0, r % 2 == 0);
  if (uniform_int(rng, 0, 1) == 1) add_planted_linear_row(rng, inst, z, uniform(rng, 0.8, 1.5));
  inst.validate();

  // Pad each quadratic right-hand side so Approx(u-hat) stays feasible at the
  // planted point for every u-hat >= 0: the perturbation adds at most
  // |shift| * sum of squared continuous bounds to the row value.
  std::vector<double> shifts = applied_shifts(analyze_instance(inst), ShiftRule::Safe);
  double sum_u2 = 0.0;
  for (int i = 0; i < inst.n; ++i)
    if (!inst.integer[i]) sum_u2 += inst.upper[i] * inst.upper[i];
  for (int k = 0; k < inst.num_quad(); ++k)
    inst.quad_constraints[k].rhs += std::abs(shifts[k + 1]) * sum_u2 + uniform(rng, 0.6, 1.2);
  return inst;
}

Outcome criterion_consistency() {
  Outcome out;
  std::mt19937_64 rng(202);
  const int kInstances = 30;
  int condition_held = 0, solved = 0;
  for (int t = 0; t < kInstances; ++t) {
    MiqcqpInstance inst = random_consistency_instance(rng, t);
    NormalizedInstance norm = normalize(inst);
    std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), ShiftRule::Safe);
    std::vector<double> raw(inst.n, 0.0);
    for (int pass = 0; pass < 2; ++pass) {
      if (pass == 1)
        for (int i = 0; i < inst.n; ++i)
          raw[i] = corpus::detail::uniform(rng, 0.0, 0.3 * norm.inst.upper[i]);
      UHat u_hat = make_uhat(norm.inst, raw);
      ModelIR approx = build_approx(norm, u_hat, shifts);
      SolveRequest req;
      req.goal = SolveGoal::ProveOptimal;
      req.time_limit_s = 5.0;
      SolveResult res = solve_model(approx, req);
      if (!res.has_solution()) {
        fail(out, fmt("%s: Approx(u-hat) unsolved (%s)", inst.name.c_str(),
                      to_string(res.status)));
        continue;
      }
      ++solved;
      std::vector<double> x = extract_original(approx, res.x);
      bool cond = true;
      for (int i = 0; i < inst.n; ++i)
        if (!norm.inst.integer[i] && u_hat.values[i] > x[i] + 1e-9) cond = false;
      if (!cond) continue;  // the theorem only speaks about such solutions
      ++condition_held;
      if (!check_feasible(norm.inst, x, 1e-6))
        fail(out, fmt("%s: consistent Approx solution infeasible on the original",
                      inst.name.c_str()));
    }
  }
  if (condition_held < kInstances)
    fail(out, fmt("condition held on only %d solutions; need >= %d for a meaningful check",
                  condition_held, kInstances));
  out.detail = fmt("%d instances, %d Approx solves, condition held on %d, all feasible at 1e-6",
                   kInstances, solved, condition_held);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 3: H-linearization is exact at every integral point.

bool linearization_row(const ModelLinRow& row) {
  return row.tag.rfind("link", 0) == 0 || row.tag.rfind("xdef", 0) == 0 ||
         row.tag.rfind("h_ub", 0) == 0 || row.tag.rfind("h_lb", 0) == 0;
}

Outcome criterion_exact_linearization() {
  Outcome out;
  int models = 0, models_with_square = 0;
  long long points = 0, rows_checked = 0;
  for (const corpus::Entry& e : desk_corpus()) {
    const MiqcqpInstance& inst = e.inst;
    std::vector<int> ints = inst.integer_indices();
    if (static_cast<int>(ints.size()) > 12) continue;
    long long grid = 1;
    bool small_ranges = true;
    for (int i : ints) {
      long long range = std::llround(inst.upper[i] - inst.lower[i]);
      if (range > 8) small_ranges = false;
      grid *= range + 1;
    }
    if (!small_ranges || grid > 100000) continue;

    NormalizedInstance norm = normalize(inst);
    std::vector<double> shifts = applied_shifts(analyze_instance(norm.inst), ShiftRule::Safe);
    ModelIR model = build_approx(norm, uhat_from_upper_bounds(norm.inst), shifts);
    ++models;
    bool has_square = false;
    for (const ModelVar& v : model.vars)
      if (v.origin == VarOrigin::SquareAux) has_square = true;
    models_with_square += has_square;

    std::vector<double> x(inst.n);
    for (int i = 0; i < inst.n; ++i)
      x[i] = inst.integer[i] ? norm.inst.lower[i] : 0.37 * norm.inst.upper[i];
    std::vector<long long> ctr(ints.size(), 0);
    bool done = false;
    while (!done) {
      for (size_t k = 0; k < ints.size(); ++k)
        x[ints[k]] = norm.inst.lower[ints[k]] + static_cast<double>(ctr[k]);
      ++points;
      std::vector<double> full = lift_point(model, norm.inst, x);

      for (int j = 0; j < model.n_vars(); ++j) {
        const ModelVar& v = model.vars[j];
        if (v.origin != VarOrigin::SquareAux) continue;
        long long xi = std::llround(x[v.source]);
        if (full[j] != static_cast<double>(xi * xi))
          fail(out, fmt("%s: X_%d = %.17g differs from %lld^2", inst.name.c_str(), v.source,
                        full[j], xi));
      }
      for (const ModelLinRow& row : model.lin_rows) {
        if (!linearization_row(row)) continue;
        ++rows_checked;
        long long acc = 0;
        bool integral = true;
        for (const auto& term : row.terms) {
          double value = full[term.index];
          if (std::abs(term.coef - std::llround(term.coef)) > 0.0 ||
              std::abs(value - std::llround(value)) > 0.0)
            integral = false;
          acc += std::llround(term.coef) * std::llround(value);
        }
        long long rhs = std::llround(row.rhs);
        if (!integral || std::abs(row.rhs - static_cast<double>(rhs)) > 0.0) {
          fail(out, fmt("%s: row %s is not integral", inst.name.c_str(), row.tag.c_str()));
          continue;
        }
        bool ok = row.sense == RowSense::LE   ? acc <= rhs
                  : row.sense == RowSense::GE ? acc >= rhs
                                              : acc == rhs;
        if (!ok)
          fail(out, fmt("%s: row %s violated by %lld at an integral point", inst.name.c_str(),
                        row.tag.c_str(), acc - rhs));
      }

      done = true;
      for (size_t k = 0; k < ints.size(); ++k) {
        long long range = std::llround(inst.upper[ints[k]] - inst.lower[ints[k]]);
        if (++ctr[k] <= range) {
          done = false;
          break;
        }
        ctr[k] = 0;
      }
    }
  }
  if (models_with_square < 5)
    fail(out, fmt("only %d models carry square auxiliaries; check is near-vacuous",
                  models_with_square));
  out.detail = fmt("%d models (%d with X vars), %lld integral points, %lld rows, exact int64",
                   models, models_with_square, points, rows_checked);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 4: fixed points of the u-hat iteration are stationary for the
// original objective (finite-difference residual on the continuous block).

MiqcqpInstance bound_attracting_miqp(std::mt19937_64& rng, int idx) {
  using namespace corpus::detail;
  MiqcqpInstance inst;
  inst.name = "station_" + std::to_string(idx);
  int n_bin = uniform_int(rng, 1, 2);
  int n_cont = uniform_int(rng, 1, 2);
  inst.n = n_bin + n_cont;
  inst.lower.assign(inst.n, 0.0);
  inst.upper.assign(inst.n, 1.0);
  inst.integer.assign(inst.n, 0);
  for (int i = 0; i < n_bin; ++i) inst.integer[i] = 1;

  SymSparseMatrix q(inst.n);
  std::vector<std::vector<double>> w(n_cont, std::vector<double>(n_bin, 0.0));
  for (int i = 0; i < n_bin; ++i)
    for (int j = i; j < n_bin; ++j) q.add(i, j, uniform(rng, -1.0, 1.0));
  for (int c = 0; c < n_cont; ++c) {
    q.add(n_bin + c, n_bin + c, uniform(rng, -0.6, -0.2));
    for (int b = 0; b < n_bin; ++b) {
      w[c][b] = uniform(rng, -0.3, 0.3);
      q.add(b, n_bin + c, w[c][b]);
    }
  }
  q.compress();
  inst.objective.Q = std::move(q);
  inst.objective.linear.assign(inst.n, 0.0);
  for (int i = 0; i < n_bin; ++i) inst.objective.linear[i] = uniform(rng, -1.0, 1.0);

  LinearConstraint row;  // never binding; only sets the problem class
  for (int i = 0; i < inst.n; ++i) row.terms.push_back({i, 1.0});
  row.rhs = inst.n + 1.0;
  inst.linear_constraints.push_back(std::move(row));
  inst.validate();

  // Choose the continuous linear terms so the per-coordinate minimizer of the
  // shifted approximation sits beyond the upper bound for every u-hat in
  // [0, 2u] and every binary assignment; iterates then stick to the bound.
  double lambda = applied_shifts(analyze_instance(inst), ShiftRule::Safe)[0];
  for (int c = 0; c < n_cont; ++c) {
    double qc = 0.0;
    Eigen::MatrixXd dense = oracle::dense_matrix(inst.objective.Q);
    qc = dense(n_bin + c, n_bin + c);
    double coupling = 0.0;
    for (int b = 0; b < n_bin; ++b) coupling += std::max(w[c][b], 0.0);
    inst.objective.linear[n_bin + c] = -2.0 * (qc - lambda) - coupling - uniform(rng, 0.2, 0.6);
  }
  return inst;
}

double fd_projected_residual(const MiqcqpInstance& inst, std::vector<double> x) {
  const double h = 1e-6;
  double res = 0.0;
  for (int i = 0; i < inst.n; ++i) {
    if (inst.integer[i]) continue;
    double keep = x[i];
    x[i] = keep + h;
    double up = evaluate(inst, x).objective;
    x[i] = keep - h;
    double dn = evaluate(inst, x).objective;
    x[i] = keep;
    double g = (up - dn) / (2.0 * h);
    double proj = std::clamp(keep - g, inst.lower[i], inst.upper[i]);
    res = std::max(res, std::abs(proj - keep));
  }
  return res;
}

Outcome criterion_stationarity() {
  Outcome out;
  std::mt19937_64 rng(303);
  const int kInstances = 20;
  double worst = 0.0;
  int converged = 0;
  for (int t = 0; t < kInstances; ++t) {
    MiqcqpInstance inst = bound_attracting_miqp(rng, t);
    auto info = analyze_instance(inst);
    if (info[0].full.min >= 0.0) {
      fail(out, fmt("%s: generator produced a convex objective", inst.name.c_str()));
      continue;
    }
    PumpConfig cfg;
    cfg.seed = 40 + t;
    cfg.subproblem_time_limit_s = 2.0;
    PumpOutcome pump = fixed_point_miqp(inst, cfg);
    if (!pump.x_star) {
      fail(out, fmt("%s: fixed-point pump returned no point", inst.name.c_str()));
      continue;
    }
    ++converged;
    double res = fd_projected_residual(inst, *pump.x_star);
    worst = std::max(worst, res);
    if (res > 1e-4)
      fail(out, fmt("%s: FD residual %.3e exceeds 1e-4", inst.name.c_str(), res));
  }
  out.detail = fmt("%d nonconvex MIQPs, %d fixed points, max FD residual %.2e, tol 1e-4",
                   kInstances, converged, worst);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 5: perturbation bounds verified against brute-force optimizers.

Outcome criterion_perturbation_bounds() {
  Outcome out;
  std::mt19937_64 rng(505);
  using corpus::detail::uniform;
  const int kInstances = 200;
  int accepted = 0, corollary = 0, guard = 0;
  while (accepted < kInstances && ++guard < 20 * kInstances) {
    int na = corpus::detail::uniform_int(rng, 1, 4);
    int nb = corpus::detail::uniform_int(rng, 1, 4);
    const int n = na + nb;
    TheoremInstance ti;
    ti.n_alpha = na;
    Eigen::MatrixXd q(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) q(i, j) = q(j, i) = uniform(rng, -1.5, 1.5);
    for (int i = 0; i < na; ++i) q(i, i) -= 1.0;
    for (int i = na; i < n; ++i) q(i, i) += 1.5;
    ti.Q = q;
    ti.a = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return uniform(rng, -1.5, 1.5); });

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(ti.Q, Eigen::EigenvaluesOnly);
    double lambda_min = full.eigenvalues().minCoeff();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> beta(ti.Q.bottomRightCorner(nb, nb),
                                                        Eigen::EigenvaluesOnly);
    double beta_min = beta.eigenvalues().minCoeff();
    if (lambda_min >= -0.05) continue;  // need genuinely nonconvex samples
    ++accepted;

    Eigen::VectorXd u_hat =
        Eigen::VectorXd::NullaryExpr(nb, [&](Eigen::Index) { return uniform(rng, 0.0, 2.0); });
    const double lambda_safe = std::min(2.0 * beta_min, lambda_min) - 1.0;
    Eigen::VectorXd xs = oracle::solve_perturbed(ti, u_hat, lambda_safe);
    BoundCheck safe = verify_bounds(ti, u_hat, lambda_safe, xs);
    if (!safe.dist_applicable)
      fail(out, fmt("sample %d: distance bound not applicable under the safe shift", accepted));
    if (!safe.holds) fail(out, fmt("sample %d: safe-shift bounds violated", accepted));

    if (lambda_min < beta_min - 0.05) {
      Eigen::VectorXd xc = oracle::solve_perturbed(ti, u_hat, lambda_min);
      BoundCheck classic = verify_bounds(ti, u_hat, lambda_min, xc);
      if (!classic.holds) fail(out, fmt("sample %d: classic-shift bounds violated", accepted));
      double coeff_safe = distance_coefficient(lambda_safe, beta_min, safe.lambda_beta_max);
      double coeff_classic = distance_coefficient(lambda_min, beta_min, safe.lambda_beta_max);
      if (!(coeff_safe < coeff_classic))
        fail(out, fmt("sample %d: safe coefficient %.6f not below classic %.6f", accepted,
                      coeff_safe, coeff_classic));
      ++corollary;
    }
  }
  if (accepted < kInstances) fail(out, fmt("only %d nonconvex samples generated", accepted));
  if (corollary < 50) fail(out, fmt("corollary precondition met on only %d samples", corollary));
  out.detail = fmt("%d brute-force-verified samples, bounds held on all, coefficient strictly "
                   "smaller on %d corollary samples",
                   accepted, corollary);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 6: applied safe shifts make every matrix PSD (dense oracle).

Outcome criterion_psd_guarantee() {
  Outcome out;
  double worst = 0.0;
  int matrices = 0;
  for (const corpus::Entry& e : desk_corpus()) {
    const MiqcqpInstance& inst = e.inst;
    if (inst.n > 64) {
      fail(out, fmt("%s: dimension %d exceeds the dense oracle cutoff", inst.name.c_str(),
                    inst.n));
      continue;
    }
    std::vector<double> shifts = applied_shifts(analyze_instance(inst), ShiftRule::Safe);
    for (size_t k = 0; k < shifts.size(); ++k) {
      const SymSparseMatrix& m =
          k == 0 ? inst.objective.Q : inst.quad_constraints[k - 1].Q;
      Eigen::MatrixXd dense = oracle::dense_matrix(m);
      dense -= shifts[k] * Eigen::MatrixXd::Identity(inst.n, inst.n);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense, Eigen::EigenvaluesOnly);
      double lo = eig.eigenvalues().minCoeff();
      worst = std::min(worst, lo);
      ++matrices;
      if (lo < -1e-8)
        fail(out, fmt("%s: matrix %zu has min eigenvalue %.3e after shifting",
                      inst.name.c_str(), k, lo));
    }
  }
  out.detail = fmt("%d shifted matrices across 40 instances, min eigenvalue %.2e, tol -1e-8",
                   matrices, worst);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 7: the pump + local branching pipeline finds feasible points.

Outcome criterion_end_to_end() {
  Outcome out;
  const auto& entries = desk_corpus();
  g_pipeline.assign(entries.size(), {});
  const double kLimit = 12.0;  // well inside the 60 s bound per instance
  int found = 0;
  double worst_wall = 0.0;
  for (size_t k = 0; k < entries.size(); ++k) {
    const corpus::Entry& e = entries[k];
    auto t0 = Clock::now();
    PumpConfig cfg;
    cfg.seed = 7;
    cfg.subproblem_time_limit_s = 2.0;
    PumpOutcome pump = dispatch_pump(e.inst, cfg, 0.4 * kLimit, /*deterministic=*/true);
    PipelineResult& pr = g_pipeline[k];
    if (pump.x_star) {
      double remaining = std::clamp(kLimit - seconds_since(t0), 1.0, 5.0);
      LbOptions opt;
      opt.seed = 7;
      opt.subproblem_floor_s = 0.5;
      opt.subproblem_cap_s = 2.0;
      std::vector<double> x_best;
      IncumbentTrace lb = run_parallel_lb(e.inst, *pump.x_star, remaining, 4, opt, &x_best);
      pr.found = true;
      pr.objective = lb.best_objective();
      if (!check_feasible(e.inst, x_best, 1e-6))
        fail(out, fmt("%s: returned point fails check_feasible at 1e-6", e.inst.name.c_str()));
    }
    pr.wall_s = seconds_since(t0);
    worst_wall = std::max(worst_wall, pr.wall_s);
    if (pr.wall_s > 60.0)
      fail(out, fmt("%s: wall %.1fs exceeds the 60 s bound", e.inst.name.c_str(), pr.wall_s));
    found += pr.found;
  }
  if (found < 36) fail(out, fmt("found %d/40; the gate requires >= 36", found));
  out.detail = fmt("found %d/40 (gate 36), every point feasible at 1e-6, max wall %.1fs "
                   "(bound 60s)",
                   found, worst_wall);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 8: final objectives sit within 1% of the brute-force optimum.

Outcome criterion_oracle_gap() {
  Outcome out;
  const auto& entries = desk_corpus();
  if (g_pipeline.size() != entries.size()) {
    fail(out, "pipeline results missing (criterion 7 did not run)");
    return out;
  }
  int eligible = 0, within = 0;
  double worst_gap = 0.0;
  for (size_t k = 0; k < entries.size(); ++k) {
    const corpus::Entry& e = entries[k];
    if (!e.brute) continue;
    ++eligible;
    SolveResult cert = brute_force(e.inst);
    if (cert.status != SolveStatus::Optimal) {
      fail(out, fmt("%s: brute_force did not certify optimality", e.inst.name.c_str()));
      continue;
    }
    if (!g_pipeline[k].found) continue;  // counted against the 15-of-20 gate
    double gap = primal_gap(g_pipeline[k].objective, cert.objective);
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 1.0) ++within;
  }
  if (eligible != 20)
    fail(out, fmt("%d brute-forceable instances; the corpus pins exactly 20", eligible));
  if (within < 15) fail(out, fmt("within 1%% on %d/20; the gate requires >= 15", within));
  out.detail = fmt("within 1%% of the oracle on %d/20 (gate 15), worst gap %.3f%%", within,
                   worst_gap);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 9: local branching machinery invariants plus corpus behavior.

Outcome criterion_lb_machinery() {
  Outcome out;
  std::mt19937_64 rng(909);

  // Partition completeness by enumeration: every vector except the center
  // falls in exactly one window (plus the right branch when the scheme stops
  // short of |B|).
  long long coverage_points = 0;
  for (int nb = 3; nb <= 8; ++nb) {
    MiqcqpInstance inst = blank_binary(nb);
    ModelIR base = build_original(inst);
    for (int trial = 0; trial < 2; ++trial) {
      std::vector<double> center(nb);
      for (auto& c : center) c = corpus::detail::uniform_int(rng, 0, 1);
      std::vector<ModelIR> windows = partition_neighborhood(PartitionScheme{}, base, center);
      PartitionScheme clipped = PartitionScheme{}.clipped(nb);
      std::vector<ModelIR> regions = windows;
      if (clipped.k_total() < nb)
        regions.push_back(add_lbc(base, center, clipped.k_total() + 1, nb));
      for (long long mask = 0; mask < (1LL << nb); ++mask) {
        std::vector<double> x(nb);
        for (int i = 0; i < nb; ++i) x[i] = (mask >> i) & 1;
        int inside = 0;
        for (const ModelIR& r : regions) inside += r.feasible(x, 1e-9);
        ++coverage_points;
        bool is_center = hamming(x, center) == 0;
        if (is_center ? inside != 0 : inside != 1)
          fail(out, fmt("|B|=%d: vector in %d regions (center=%d)", nb, inside, is_center));
      }

      // Right-branch exclusion with a deliberately short scheme.
      PartitionScheme narrow;
      narrow.ranges = {{1, 2}};
      std::vector<ModelIR> head = partition_neighborhood(narrow, base, center);
      ModelIR right = add_lbc(base, center, 3, nb);
      for (long long mask = 0; mask < (1LL << nb); ++mask) {
        std::vector<double> x(nb);
        for (int i = 0; i < nb; ++i) x[i] = (mask >> i) & 1;
        int d = hamming(x, center);
        bool in_head = head[0].feasible(x, 1e-9);
        bool in_right = right.feasible(x, 1e-9);
        if (in_head != (d >= 1 && d <= 2) || in_right != (d >= 3))
          fail(out, fmt("|B|=%d: exclusion mismatch at distance %d", nb, d));
      }
    }
  }

  // Complement identity Delta + Delta_r = |B| on 10^4 random pairs.
  int pairs = 0;
  while (pairs < 10000) {
    int nb = corpus::detail::uniform_int(rng, 4, 16);
    MiqcqpInstance inst = blank_binary(nb);
    ModelIR base = build_original(inst);
    for (int rep = 0; rep < 50 && pairs < 10000; ++rep, ++pairs) {
      std::vector<double> x(nb), xb(nb);
      for (int i = 0; i < nb; ++i) {
        x[i] = corpus::detail::uniform_int(rng, 0, 1);
        xb[i] = corpus::detail::uniform_int(rng, 0, 1);
      }
      double d = lbc_distance(base, x, xb);
      double dr = rlbc_distance(base, x, xb);
      if (d + dr != static_cast<double>(nb))
        fail(out, fmt("complement identity broke at |B|=%d: %g + %g", nb, d, dr));
    }
  }

  // Corpus sweep: never degrade the planted incumbent; improve whenever the
  // brute-force certificate is strictly better (all certificates sit within
  // Hamming radius 19 of the planted point at these sizes).
  int improved = 0, improvable = 0;
  for (const corpus::Entry& e : desk_corpus()) {
    double f0 = planted_objective(e);
    LbOptions opt;
    opt.seed = 11;
    opt.subproblem_floor_s = 0.5;
    opt.subproblem_cap_s = 2.0;
    std::vector<double> x_best;
    IncumbentTrace tr = run_parallel_lb(e.inst, e.planted, 2.5, 4, opt, &x_best);
    double best = tr.best_objective();
    if (best > f0 + 1e-9)
      fail(out, fmt("%s: incumbent degraded from %.6f to %.6f", e.inst.name.c_str(), f0, best));
    if (!check_feasible(e.inst, x_best, 1e-6))
      fail(out, fmt("%s: final incumbent infeasible", e.inst.name.c_str()));
    if (e.brute) {
      SolveResult cert = brute_force(e.inst);
      if (cert.objective < f0 - 1e-6) {
        ++improvable;
        if (best < f0 - 1e-9)
          ++improved;
        else
          fail(out, fmt("%s: certified improvement %.6f missed (stayed at %.6f)",
                        e.inst.name.c_str(), cert.objective, f0));
      }
    }
  }
  out.detail = fmt("coverage on %lld vectors, 10000 complement pairs, corpus never degraded, "
                   "improved %d/%d certified",
                   coverage_points, improved, improvable);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 10: worker counts agree on the result; more workers never cost
// materially more wall time.

Outcome criterion_parallel_consistency() {
  Outcome out;
  int compared = 0;

  // Result equality across worker counts on every corpus instance with at
  // least two nonempty partitions.
  for (const corpus::Entry& e : desk_corpus()) {
    if (e.inst.num_quad() > 0 || e.inst.num_linear() > 0) continue;
    if (e.inst.n < 8) continue;  // need >= 2 nonempty partitions
    LbOptions opt;
    opt.seed = 3;
    opt.subproblem_floor_s = 0.5;
    opt.subproblem_cap_s = 2.0;
    IncumbentTrace tr1 = run_parallel_lb(e.inst, e.planted, 4.0, 1, opt);
    IncumbentTrace tr4 = run_parallel_lb(e.inst, e.planted, 4.0, 4, opt);
    ++compared;
    if (std::abs(tr1.best_objective() - tr4.best_objective()) > 1e-6)
      fail(out, fmt("%s: objectives differ, 1-worker %.9f vs 4-worker %.9f",
                    e.inst.name.c_str(), tr1.best_objective(), tr4.best_objective()));
  }

  // Wall-time comparison on heavier binary instances that terminate before
  // the budget, so the measurement reflects the work itself rather than
  // per-round thread startup.
  std::mt19937_64 rng(1010);
  double wall1 = 0.0, wall4 = 0.0;
  int timed = 0;
  for (int t = 0; t < 3; ++t) {
    MiqcqpInstance inst = blank_binary(16);
    inst.name = "wall_bqp_" + std::to_string(t);
    inst.objective.Q = corpus::detail::random_sym(rng, 16, -1.0, 1.0, 0.8, 0.6);
    for (auto& c : inst.objective.linear) c = corpus::detail::uniform(rng, -1.0, 1.0);
    std::vector<double> start(16, 0.0);
    LbOptions opt;
    opt.seed = 3;
    opt.subproblem_floor_s = 2.0;
    opt.subproblem_cap_s = 8.0;
    auto t0 = Clock::now();
    IncumbentTrace tr1 = run_parallel_lb(inst, start, 30.0, 1, opt);
    wall1 += seconds_since(t0);
    t0 = Clock::now();
    IncumbentTrace tr4 = run_parallel_lb(inst, start, 30.0, 4, opt);
    wall4 += seconds_since(t0);
    ++timed;
    if (std::abs(tr1.best_objective() - tr4.best_objective()) > 1e-6)
      fail(out, fmt("%s: objectives differ across worker counts", inst.name.c_str()));
  }

  unsigned hw = std::thread::hardware_concurrency();
  if (hw >= 2) {
    if (wall4 > wall1)
      fail(out, fmt("4-worker aggregate wall %.2fs exceeds 1-worker %.2fs", wall4, wall1));
    out.detail = fmt("%d + %d instances, objectives equal within 1e-6; wall 4w %.2fs <= 1w "
                     "%.2fs (%u hardware threads)",
                     compared, timed, wall4, wall1, hw);
  } else {
    // One hardware thread: the ordering is unobservable (workers timeshare a
    // single core), so enforce the strongest testable property, that extra
    // workers add no material cost.
    if (wall4 > 1.10 * wall1)
      fail(out, fmt("4-worker wall %.2fs exceeds the 1.10x no-slowdown bound over %.2fs",
                    wall4, wall1));
    out.detail = fmt("%d + %d instances, objectives equal within 1e-6; single-CPU host, wall "
                     "4w %.2fs within 1.10x of 1w %.2fs (ordering unobservable with 1 thread)",
                     compared, timed, wall4, wall1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 11: metrics match their closed forms; PI is monotone under
// refinement.

Outcome criterion_metrics() {
  Outcome out;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-12; };
  struct GapCase {
    double v, v_star, expect;
  };
  const GapCase gaps[] = {{110.0, 100.0, 100.0 * 10.0 / 110.0},
                          {42.0, 42.0, 0.0},
                          {-50.0, 100.0, 150.0},
                          {0.0, 0.0, 0.0}};
  for (const auto& g : gaps)
    if (!near(primal_gap(g.v, g.v_star), g.expect))
      fail(out, fmt("primal_gap(%g, %g) = %.15g, expected %.15g", g.v, g.v_star,
                    primal_gap(g.v, g.v_star), g.expect));

  {
    IncumbentTrace tr;
    tr.record(10.0, 200.0);  // gap 0.5 against v* = 100
    tr.record(20.0, 100.0);
    tr.horizon = 30.0;
    if (!near(primal_integral(tr, 100.0), 15.0))
      fail(out, fmt("two-event PI = %.15g, expected 15", primal_integral(tr, 100.0)));
  }
  {
    IncumbentTrace tr;
    tr.record(5.0, 100.0);
    tr.horizon = 300.0;
    if (!near(primal_integral(tr, 100.0), 5.0))
      fail(out, fmt("single-event PI = %.15g, expected 5", primal_integral(tr, 100.0)));
  }
  {
    IncumbentTrace tr;
    tr.horizon = 300.0;
    if (!near(primal_integral(tr, 100.0), 300.0))
      fail(out, fmt("empty-trace PI = %.15g, expected 300", primal_integral(tr, 100.0)));
  }

  const double zeros[] = {0.0, 0.0, 0.0};
  const double one[] = {1.0};
  const double pair[] = {3.0, 8.0};
  if (!near(shifted_geomean(zeros), 0.0)) fail(out, "shifted_geomean([0,0,0]) != 0");
  if (!near(shifted_geomean(one), 1.0)) fail(out, "shifted_geomean([1]) != 1");
  if (!near(shifted_geomean(pair), 5.0)) fail(out, "shifted_geomean([3,8]) != 5");

  if (compare(7.0, 7.0) != Comparison::Same) fail(out, "compare(7,7) != Same");
  if (compare(1.0, 1.0000099) != Comparison::Same) fail(out, "boundary ratio not Same");
  if (compare(5.0, 6.0) != Comparison::Better) fail(out, "compare(5,6) != Better");
  if (compare(6.0, 5.0) != Comparison::Worse) fail(out, "compare(6,5) != Worse");

  if (!eps_gap_hit(0.0)) fail(out, "eps_gap_hit(0) should hold");
  if (!eps_gap_hit(5e-5 * 100.0)) fail(out, "gap fraction 5e-5 should hit");
  if (eps_gap_hit(2e-4 * 100.0)) fail(out, "gap fraction 2e-4 should miss");

  // Refinement monotonicity on 1000 random trace pairs: replaying the same
  // discoveries plus one earlier, better incumbent never increases PI.
  std::mt19937_64 rng(1111);
  using corpus::detail::uniform;
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    double v_star = uniform(rng, 0.5, 10.0);
    int events = corpus::detail::uniform_int(rng, 1, 6);
    std::vector<std::pair<double, double>> found;
    double tm = 0.0, obj = v_star + uniform(rng, 1.0, 8.0);
    for (int ev = 0; ev < events; ++ev) {
      tm += uniform(rng, 0.2, 4.0);
      found.push_back({tm, obj});
      obj = v_star + (obj - v_star) * uniform(rng, 0.1, 0.9);
    }
    double horizon = tm + uniform(rng, 0.5, 5.0);
    IncumbentTrace base;
    for (auto [at, value] : found) base.record(at, value);
    base.horizon = horizon;

    // The earlier incumbent stays at or above v*, as any incumbent found by a
    // minimizing solver does; diving past v* would widen the gap instead.
    auto refined_events = found;
    double at = uniform(rng, 0.0, found.front().first);
    double value = v_star + (found.front().second - v_star) * uniform(rng, 0.0, 1.0);
    refined_events.insert(refined_events.begin(), {at, value});
    IncumbentTrace refined;
    for (auto [rt, rv] : refined_events) refined.record(rt, rv);
    refined.horizon = horizon;

    double pi_base = primal_integral(base, v_star);
    double pi_ref = primal_integral(refined, v_star);
    ++checked;
    if (pi_ref > pi_base + 1e-12)
      fail(out, fmt("refinement raised PI from %.12g to %.12g", pi_base, pi_ref));
  }
  out.detail = fmt("closed-form cases exact within 1e-12, monotonicity held on %d trace pairs",
                   checked);
  return out;
}

// ---------------------------------------------------------------------------
// Criterion 12: parse -> emit -> parse is a fixed point.

bool same_instance(const MiqcqpInstance& a, const MiqcqpInstance& b) {
  if (a.n != b.n || a.name != b.name || a.maximize_original != b.maximize_original) return false;
  if (a.lower != b.lower || a.upper != b.upper || a.integer != b.integer) return false;
  if (a.objective.linear != b.objective.linear || a.objective.constant != b.objective.constant)
    return false;
  auto same_matrix = [n = a.n](const SymSparseMatrix& x, const SymSparseMatrix& y) {
    return oracle::dense_matrix(x) == oracle::dense_matrix(y);
  };
  if (!same_matrix(a.objective.Q, b.objective.Q)) return false;
  if (a.num_quad() != b.num_quad() || a.num_linear() != b.num_linear()) return false;
  for (int k = 0; k < a.num_quad(); ++k) {
    const auto& qa = a.quad_constraints[k];
    const auto& qb = b.quad_constraints[k];
    if (qa.rhs != qb.rhs || !same_matrix(qa.Q, qb.Q)) return false;
    if (oracle::dense_row(qa.linear, a.n) != oracle::dense_row(qb.linear, b.n)) return false;
  }
  for (int k = 0; k < a.num_linear(); ++k) {
    const auto& la = a.linear_constraints[k];
    const auto& lb = b.linear_constraints[k];
    if (la.rhs != lb.rhs) return false;
    if (oracle::dense_row(la.terms, a.n) != oracle::dense_row(lb.terms, b.n)) return false;
  }
  return true;
}

Outcome criterion_parser_roundtrip() {
  Outcome out;
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / ("miqcqp_acceptance_" + std::to_string(getpid()));
  fs::create_directories(dir);
  int corpus_files = 0;
  for (const corpus::Entry& e : desk_corpus()) {
    fs::path file = dir / (e.inst.name + ".qplib");
    write_qplib_file(e.inst, file.string());
    MiqcqpInstance p1 = parse_qplib_file(file.string());
    std::ostringstream s0, s1;
    write_qplib(e.inst, s0);
    write_qplib(p1, s1);
    if (s0.str() != s1.str())
      fail(out, fmt("%s: emission is not a fixed point", e.inst.name.c_str()));
    if (!same_instance(e.inst, p1))
      fail(out, fmt("%s: reparse changed the instance", e.inst.name.c_str()));
    ++corpus_files;
  }
  fs::remove_all(dir);

  const char* genuine[] = {"mipband.qplib", "qcqp_max.qplib", "toy_bqp.qplib",
                           "cli_infeasible.qplib"};
  int data_files = 0;
  for (const char* name : genuine) {
    std::string path = std::string(MIQCQP_TEST_DATA) + "/" + name;
    MiqcqpInstance p1 = parse_qplib_file(path);
    std::ostringstream s1;
    write_qplib(p1, s1);
    std::istringstream in(s1.str());
    MiqcqpInstance p2 = parse_qplib(in);
    std::ostringstream s2;
    write_qplib(p2, s2);
    if (s1.str() != s2.str()) fail(out, fmt("%s: emission is not a fixed point", name));
    if (!same_instance(p1, p2)) fail(out, fmt("%s: reparse changed the instance", name));
    ++data_files;
  }
  out.detail = fmt("%d corpus files and %d checked-in files round-trip exactly", corpus_files,
                   data_files);
  return out;
}

}  // namespace

int main() {
  struct Row {
    int id;
    const char* label;
    Outcome (*run)();
  };
  const Row rows[] = {
      {1, "relaxation soundness", criterion_relaxation_soundness},
      {2, "consistency of Approx solutions", criterion_consistency},
      {3, "exact integer linearization", criterion_exact_linearization},
      {4, "fixed-point stationarity", criterion_stationarity},
      {5, "perturbation bounds", criterion_perturbation_bounds},
      {6, "PSD shift guarantee", criterion_psd_guarantee},
      {7, "end-to-end feasibility", criterion_end_to_end},
      {8, "oracle optimality gap", criterion_oracle_gap},
      {9, "local branching machinery", criterion_lb_machinery},
      {10, "parallel consistency", criterion_parallel_consistency},
      {11, "metrics suite", criterion_metrics},
      {12, "parser round-trip", criterion_parser_roundtrip},
  };

  {
    const auto& entries = desk_corpus();
    int brute = 0, classes[3] = {0, 0, 0};
    for (const auto& e : entries) {
      brute += e.brute;
      classes[static_cast<int>(classify(e.inst))]++;
    }
    printf("corpus: %zu instances (%d MIBQP, %d MIQP, %d MIQCP), %d brute-forceable\n",
           entries.size(), classes[0], classes[1], classes[2], brute);
  }

  int passed = 0;
  for (const Row& row : rows) {
    auto t0 = Clock::now();
    Outcome out;
    try {
      out = row.run();
    } catch (const std::exception& ex) {
      out.pass = false;
      out.failures.push_back(fmt("unhandled exception: %s", ex.what()));
    }
    passed += out.pass;
    printf("criterion %2d: %s  %s (%s) [%.1fs]\n", row.id, out.pass ? "PASS" : "FAIL",
           row.label, out.detail.c_str(), seconds_since(t0));
    for (const std::string& f : out.failures) printf("              - %s\n", f.c_str());
    fflush(stdout);
  }
  printf("RESULT: %d/12 criteria pass\n", passed);
  return passed == 12 ? 0 : 1;
}
