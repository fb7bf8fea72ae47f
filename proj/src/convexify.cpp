#include "miqcqp/convexify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "miqcqp/spectral.hpp"

namespace miqcqp {

namespace {

constexpr double kPsdTol = 1e-6;

bool integral_value(double v) { return std::abs(v - std::round(v)) <= 1e-9; }

std::string var_name(const char* prefix, int i) { return prefix + std::to_string(i); }

VarKind instance_kind(const MiqcqpInstance& inst, int i) {
  if (!inst.integer[i]) return VarKind::Continuous;
  return inst.is_binary(i) ? VarKind::Binary : VarKind::Integer;
}

/// Variable block and linear rows shared by every instance-derived model.
ModelIR base_model(const MiqcqpInstance& inst, const char* suffix) {
  ModelIR m;
  m.name = inst.name.empty() ? std::string(suffix) : inst.name + ":" + suffix;
  m.original_n = inst.n;
  for (int i = 0; i < inst.n; ++i) {
    ModelVar v;
    v.name = var_name("x", i);
    v.lb = inst.lower[i];
    v.ub = inst.upper[i];
    v.kind = instance_kind(inst, i);
    v.origin = VarOrigin::Original;
    v.source = i;
    m.add_var(std::move(v));
  }
  for (int r = 0; r < inst.num_linear(); ++r) {
    const LinearConstraint& lc = inst.linear_constraints[r];
    m.lin_rows.push_back({lc.terms, RowSense::LE, lc.rhs, var_name("lin", r)});
  }
  return m;
}

SparseRow dense_to_row(const std::vector<double>& a) {
  SparseRow row;
  for (int i = 0; i < static_cast<int>(a.size()); ++i)
    if (a[i] != 0.0) row.push_back({i, a[i]});
  return row;
}

/// Widens every quadratic matrix to the final variable count so that
/// dimension-checked consumers (quad_form, multiply) accept full model points.
void finalize_dims(ModelIR& m) {
  const int n = m.n_vars();
  m.objective.Q.set_dim(n);
  for (auto& row : m.quad_rows) row.Q.set_dim(n);
}

void check_perturbed_psd(const SymSparseMatrix& q, const std::string& what) {
  EigenExtremes e = extreme_eigenvalues(q);
  if (e.min < -kPsdTol)
    throw std::invalid_argument("perturbed matrix for " + what +
                                " is not positive semidefinite (min eigenvalue " +
                                std::to_string(e.min) + ")");
}

/// Support-restricted perturbation of one quadratic entity: subtracts `shift`
/// from the support diagonal of q and returns the compensating linear terms
/// (shift * x_i for binaries, shift * u_hat_i x_i for continuous variables,
/// shift * X_ii for general integers, X created on demand via x_var).
SymSparseMatrix perturb_matrix(const SymSparseMatrix& q, double shift,
                               const MiqcqpInstance& inst, const UHat& u_hat,
                               const std::function<int(int)>& x_var, SparseRow& extra) {
  SymSparseMatrix out = q;
  if (shift == 0.0) return out;
  for (int i : q.support()) {
    out.add(i, i, -shift);
    if (!inst.integer[i])
      extra.push_back({i, shift * u_hat.values[i]});
    else if (inst.is_binary(i))
      extra.push_back({i, shift});
    else
      extra.push_back({x_var(i), shift});
  }
  out.compress();
  return out;
}

void validate_shifts(const MiqcqpInstance& inst, std::span<const double> shifts) {
  if (static_cast<int>(shifts.size()) != inst.num_quad() + 1)
    throw std::invalid_argument("expected one shift per quadratic entity (objective first)");
  for (double s : shifts)
    if (!(s <= 0.0)) throw std::invalid_argument("shifts must be <= 0");
}

void validate_uhat(const MiqcqpInstance& inst, const UHat& u_hat) {
  if (static_cast<int>(u_hat.values.size()) != inst.n)
    throw std::invalid_argument("u_hat size mismatch");
  for (int i = 0; i < inst.n; ++i) {
    if (inst.integer[i]) continue;
    double v = u_hat.values[i];
    if (!std::isfinite(v) || v < 0.0 || v > inst.upper[i] + 1e-9)
      throw std::invalid_argument("u_hat[" + std::to_string(i) + "] outside [0, u]");
  }
}

void require_normalized(const MiqcqpInstance& inst) {
  for (double lb : inst.lower)
    if (lb != 0.0) throw std::invalid_argument("model builder requires a normalized instance");
}

/// Shared core of build_approx and build_fpr1: returns the base model plus a
/// lazily filled X_ii lookup for general integers touched by a negative shift.
struct ApproxContext {
  ModelIR model;
  std::vector<int> x_of;

  std::function<int(int)> x_var() {
    return [this](int i) {
      if (x_of[i] < 0) {
        BinaryExpansion exp = binary_expand(model, i);
        x_of[i] = build_h_linearization(model, exp);
      }
      return x_of[i];
    };
  }
};

ApproxContext make_context(const MiqcqpInstance& inst, const char* suffix) {
  ApproxContext ctx;
  ctx.model = base_model(inst, suffix);
  ctx.x_of.assign(inst.n, -1);
  return ctx;
}

/// Interval upper bound of x^T Q x + a . x over the normalized box [0, u].
double row_upper_bound(const SymSparseMatrix& q, const SparseRow& linear,
                       const std::vector<double>& upper) {
  double ub = 0.0;
  for (const auto& e : q.entries()) {
    double factor = e.row == e.col ? 1.0 : 2.0;
    ub += std::max(0.0, factor * e.value * upper[e.row] * upper[e.col]);
  }
  for (const auto& t : linear) ub += std::max(0.0, t.coef * upper[t.index]);
  return ub;
}

}  // namespace

UHat make_uhat(const MiqcqpInstance& inst, std::span<const double> raw) {
  if (static_cast<int>(raw.size()) != inst.n)
    throw std::invalid_argument("make_uhat: size mismatch");
  UHat u;
  u.values.assign(inst.n, 0.0);
  for (int i = 0; i < inst.n; ++i) {
    if (inst.integer[i]) continue;
    u.values[i] = std::clamp(raw[i], 0.0, inst.upper[i]);
  }
  return u;
}

UHat uhat_from_upper_bounds(const MiqcqpInstance& inst) {
  UHat u;
  u.values.assign(inst.n, 0.0);
  for (int i = 0; i < inst.n; ++i)
    if (!inst.integer[i]) u.values[i] = inst.upper[i];
  return u;
}

BinaryExpansion binary_expand(ModelIR& model, int i) {
  if (i < 0 || i >= model.n_vars()) throw std::invalid_argument("binary_expand: bad index");
  const double lb = model.vars[i].lb;
  const double ub = model.vars[i].ub;
  if (!integral_value(lb) || !integral_value(ub))
    throw std::invalid_argument("binary_expand: bounds must be integral");
  if (!(ub > lb)) throw std::invalid_argument("binary_expand: fixed variable");

  const long long range = std::llround(ub - lb);
  int bit_count = 1;
  while ((1LL << bit_count) - 1 < range) ++bit_count;

  BinaryExpansion exp;
  exp.source = i;
  exp.offset = lb;
  ModelLinRow link;
  link.terms.push_back({i, 1.0});
  link.sense = RowSense::EQ;
  link.rhs = lb;
  link.tag = var_name("link", i);
  for (int h = 0; h < bit_count; ++h) {
    ModelVar t;
    t.name = var_name("t", i) + "_" + std::to_string(h);
    t.lb = 0.0;
    t.ub = 1.0;
    t.kind = VarKind::Binary;
    t.origin = VarOrigin::ExpansionBit;
    t.source = i;
    t.bit = h;
    int idx = model.add_var(std::move(t));
    exp.bits.push_back(idx);
    exp.weights.push_back(std::ldexp(1.0, h));
    link.terms.push_back({idx, -exp.weights.back()});
  }
  model.lin_rows.push_back(std::move(link));
  return exp;
}

int build_h_linearization(ModelIR& model, const BinaryExpansion& expansion) {
  const int i = expansion.source;
  const int nb = static_cast<int>(expansion.bits.size());
  const double lb = expansion.offset;
  const double ub = model.vars[i].ub;

  ModelVar x;
  x.name = var_name("X", i);
  x.lb = (lb <= 0.0 && ub >= 0.0) ? 0.0 : std::min(lb * lb, ub * ub);
  x.ub = std::max(lb * lb, ub * ub);
  x.kind = VarKind::Continuous;
  x.origin = VarOrigin::SquareAux;
  x.source = i;
  const int x_idx = model.add_var(std::move(x));

  // X = lb^2 + 2 lb sum_h 2^h t_h + sum_{h1<=h2} w H, where the square of the
  // bit sum expands with weight 2^{h1+h2} on the diagonal and twice that off it.
  ModelLinRow def;
  def.terms.push_back({x_idx, 1.0});
  def.sense = RowSense::EQ;
  def.rhs = lb * lb;
  def.tag = var_name("xdef", i);
  for (int h = 0; h < nb; ++h)
    if (lb != 0.0) def.terms.push_back({expansion.bits[h], -2.0 * lb * expansion.weights[h]});

  for (int h1 = 0; h1 < nb; ++h1) {
    for (int h2 = h1; h2 < nb; ++h2) {
      ModelVar hv;
      hv.name = var_name("H", i) + "_" + std::to_string(h1) + "_" + std::to_string(h2);
      hv.lb = 0.0;
      hv.ub = 1.0;
      hv.kind = VarKind::Binary;
      hv.origin = VarOrigin::ProductAux;
      hv.source = i;
      hv.bit = h1;
      hv.bit2 = h2;
      const int h_idx = model.add_var(std::move(hv));

      const int t1 = expansion.bits[h1];
      const int t2 = expansion.bits[h2];
      model.lin_rows.push_back(
          {{{h_idx, 1.0}, {t1, -1.0}}, RowSense::LE, 0.0, var_name("h_ub", h_idx)});
      if (h2 != h1)
        model.lin_rows.push_back(
            {{{h_idx, 1.0}, {t2, -1.0}}, RowSense::LE, 0.0, var_name("h_ub2", h_idx)});
      SparseRow lo{{h_idx, 1.0}, {t1, -1.0}};
      if (h2 != h1)
        lo.push_back({t2, -1.0});
      else
        lo.back().coef = -2.0;
      model.lin_rows.push_back({std::move(lo), RowSense::GE, -1.0, var_name("h_lb", h_idx)});

      double weight = std::ldexp(1.0, h1 + h2) * (h1 == h2 ? 1.0 : 2.0);
      def.terms.push_back({h_idx, -weight});
    }
  }
  model.lin_rows.push_back(std::move(def));
  return x_idx;
}

ModelIR build_original(const MiqcqpInstance& inst, bool expand_generals) {
  ModelIR m = base_model(inst, "original");
  m.objective.Q = inst.objective.Q;
  m.objective.linear = dense_to_row(inst.objective.linear);
  m.objective.constant = inst.objective.constant;
  for (int k = 0; k < inst.num_quad(); ++k) {
    const QuadConstraint& qc = inst.quad_constraints[k];
    m.quad_rows.push_back({qc.Q, qc.linear, qc.rhs, var_name("quad", k)});
  }
  bool convex = extreme_eigenvalues(inst.objective.Q).min >= -1e-7;
  for (const auto& qc : inst.quad_constraints)
    convex = convex && extreme_eigenvalues(qc.Q).min >= -1e-7;
  m.convex = convex;
  if (expand_generals) {
    for (int i = 0; i < inst.n; ++i)
      if (inst.integer[i] && !inst.is_binary(i)) binary_expand(m, i);
  }
  finalize_dims(m);
  return m;
}

ModelIR build_approx(const NormalizedInstance& norm, const UHat& u_hat,
                     std::span<const double> shifts) {
  const MiqcqpInstance& inst = norm.inst;
  require_normalized(inst);
  validate_shifts(inst, shifts);
  validate_uhat(inst, u_hat);

  ApproxContext ctx = make_context(inst, "approx");
  auto x_var = ctx.x_var();
  ModelIR& m = ctx.model;

  SparseRow extra0;
  SymSparseMatrix q0 = perturb_matrix(inst.objective.Q, shifts[0], inst, u_hat, x_var, extra0);
  check_perturbed_psd(q0, "objective");
  m.objective.Q = std::move(q0);
  m.objective.linear = dense_to_row(inst.objective.linear);
  m.objective.linear.insert(m.objective.linear.end(), extra0.begin(), extra0.end());
  sort_and_merge(m.objective.linear);
  m.objective.constant = inst.objective.constant;

  for (int k = 0; k < inst.num_quad(); ++k) {
    const QuadConstraint& qc = inst.quad_constraints[k];
    SparseRow extra;
    SymSparseMatrix qk = perturb_matrix(qc.Q, shifts[k + 1], inst, u_hat, x_var, extra);
    check_perturbed_psd(qk, var_name("constraint ", k));
    SparseRow linear = qc.linear;
    linear.insert(linear.end(), extra.begin(), extra.end());
    sort_and_merge(linear);
    m.quad_rows.push_back({std::move(qk), std::move(linear), qc.rhs, var_name("quad", k)});
  }
  m.convex = true;
  finalize_dims(m);
  return m;
}

ModelIR build_relaxation(const NormalizedInstance& norm, std::span<const double> shifts) {
  ModelIR m = build_approx(norm, uhat_from_upper_bounds(norm.inst), shifts);
  m.name = norm.inst.name.empty() ? "relax" : norm.inst.name + ":relax";
  return m;
}

ModelIR build_fpr1(const NormalizedInstance& norm, const UHat& u_hat,
                   std::span<const double> shifts) {
  const MiqcqpInstance& inst = norm.inst;
  if (inst.num_quad() < 1)
    throw std::invalid_argument("build_fpr1 requires at least one quadratic constraint");
  require_normalized(inst);
  validate_shifts(inst, shifts);
  validate_uhat(inst, u_hat);

  ApproxContext ctx = make_context(inst, "fpr1");
  auto x_var = ctx.x_var();
  ModelIR& m = ctx.model;

  for (int k = 0; k < inst.num_quad(); ++k) {
    const QuadConstraint& qc = inst.quad_constraints[k];
    SparseRow extra;
    SymSparseMatrix qk = perturb_matrix(qc.Q, shifts[k + 1], inst, u_hat, x_var, extra);
    check_perturbed_psd(qk, var_name("constraint ", k));
    SparseRow linear = qc.linear;
    linear.insert(linear.end(), extra.begin(), extra.end());
    sort_and_merge(linear);
    m.quad_rows.push_back({std::move(qk), std::move(linear), qc.rhs, var_name("quad", k)});
  }

  for (int i = 0; i < inst.n; ++i) {
    if (inst.integer[i]) continue;
    ModelVar d;
    d.name = var_name("delta", i);
    d.lb = 0.0;
    d.ub = u_hat.values[i];
    d.kind = VarKind::Continuous;
    d.origin = VarOrigin::DeltaSlack;
    d.source = i;
    d.ref = u_hat.values[i];
    int d_idx = m.add_var(std::move(d));
    m.objective.linear.push_back({d_idx, 1.0});
    m.lin_rows.push_back({{{i, 1.0}, {d_idx, 1.0}},
                          RowSense::GE,
                          u_hat.values[i],
                          var_name("fpr1_", i)});
  }
  m.objective.constant = 0.0;
  m.convex = true;
  finalize_dims(m);
  return m;
}

ModelIR build_fpr2(const NormalizedInstance& norm) {
  const MiqcqpInstance& inst = norm.inst;
  if (inst.num_quad() < 1)
    throw std::invalid_argument("build_fpr2 requires at least one quadratic constraint");
  require_normalized(inst);

  ModelIR m = base_model(inst, "fpr2");
  for (int k = 0; k < inst.num_quad(); ++k) {
    const QuadConstraint& qc = inst.quad_constraints[k];
    ModelVar s;
    s.name = var_name("s", k);
    s.lb = 0.0;
    s.ub = std::max(0.0, row_upper_bound(qc.Q, qc.linear, inst.upper) - qc.rhs);
    s.kind = VarKind::Continuous;
    s.origin = VarOrigin::RowSlack;
    s.source = k;
    int s_idx = m.add_var(std::move(s));
    m.objective.linear.push_back({s_idx, 1.0});
    SparseRow linear = qc.linear;
    linear.push_back({s_idx, -1.0});
    m.quad_rows.push_back({qc.Q, std::move(linear), qc.rhs, var_name("fpr2_", k)});
  }
  m.convex = false;
  finalize_dims(m);
  return m;
}

ModelIR build_l1_projection(const ModelIR& region, std::span<const double> x_ref,
                            std::span<const int> over) {
  ModelIR m = region;
  m.name = region.name + ":l1";
  m.objective = ModelObjective{};
  for (int j : over) {
    if (j < 0 || j >= region.n_vars())
      throw std::invalid_argument("build_l1_projection: index out of range");
    const double ref = x_ref[j];
    ModelVar d;
    d.name = "l1_" + m.vars[j].name;
    d.lb = 0.0;
    d.ub = std::max(std::abs(m.vars[j].lb - ref), std::abs(m.vars[j].ub - ref));
    d.kind = VarKind::Continuous;
    d.origin = VarOrigin::L1Aux;
    d.source = j;
    d.ref = ref;
    int d_idx = m.add_var(std::move(d));
    m.objective.linear.push_back({d_idx, 1.0});
    m.lin_rows.push_back({{{j, 1.0}, {d_idx, -1.0}}, RowSense::LE, ref, var_name("l1_hi", j)});
    m.lin_rows.push_back({{{j, 1.0}, {d_idx, 1.0}}, RowSense::GE, ref, var_name("l1_lo", j)});
  }
  // The distance objective is linear, so convexity now rests on the rows
  // alone (a projection onto a nonconvex objective's linear region is a MILP).
  bool convex = true;
  for (const auto& row : m.quad_rows)
    convex = convex && extreme_eigenvalues(row.Q).min >= -1e-7;
  m.convex = convex;
  finalize_dims(m);
  return m;
}

namespace {

/// Delta row terms: -x_j for reference-one bits, +x_j otherwise; Delta(x) =
/// ones + terms . x.
SparseRow delta_row(std::span<const double> x_bar, const std::vector<int>& binaries,
                    int& ones) {
  if (static_cast<int>(x_bar.size()) <= binaries.back())
    throw std::invalid_argument("local branching reference is shorter than the binary block");
  SparseRow row;
  ones = 0;
  for (int j : binaries) {
    double xb = x_bar[j];
    if (std::abs(xb - std::round(xb)) > 1e-6)
      throw std::invalid_argument("local branching reference must be binary");
    if (xb > 0.5) {
      row.push_back({j, -1.0});
      ++ones;
    } else {
      row.push_back({j, 1.0});
    }
  }
  return row;
}

}  // namespace

ModelIR add_lbc(const ModelIR& model, std::span<const double> x_bar, int k_lo, int k_hi) {
  std::vector<int> binaries = model.lbc_binaries();
  if (binaries.empty()) throw std::invalid_argument("add_lbc: no binary variables");
  if (k_lo > k_hi) throw std::invalid_argument("add_lbc: k_lo > k_hi");
  const int nb = static_cast<int>(binaries.size());

  ModelIR m = model;
  int ones = 0;
  SparseRow row = delta_row(x_bar, binaries, ones);
  if (k_hi < nb) m.lin_rows.push_back({row, RowSense::LE, double(k_hi - ones), "lbc_hi"});
  if (k_lo > 0) m.lin_rows.push_back({row, RowSense::GE, double(k_lo - ones), "lbc_lo"});
  return m;
}

ModelIR add_rlbc(const ModelIR& model, std::span<const double> x_bar, int k) {
  std::vector<int> binaries = model.lbc_binaries();
  if (binaries.empty()) throw std::invalid_argument("add_rlbc: no binary variables");
  const int nb = static_cast<int>(binaries.size());

  ModelIR m = model;
  if (k >= nb) return m;
  int ones = 0;
  SparseRow row = delta_row(x_bar, binaries, ones);
  m.lin_rows.push_back({std::move(row), RowSense::GE, double(nb - k - ones), "rlbc"});
  return m;
}

ModelIR relax_integrality(const ModelIR& model) {
  ModelIR m = model;
  for (auto& v : m.vars) v.kind = VarKind::Continuous;
  return m;
}

std::vector<double> lift_point(const ModelIR& model, const MiqcqpInstance& inst,
                               std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.original_n)
    throw std::invalid_argument("lift_point: expected an original-space point");
  std::vector<double> full(model.n_vars(), 0.0);
  for (int j = 0; j < model.n_vars(); ++j) {
    const ModelVar& v = model.vars[j];
    switch (v.origin) {
      case VarOrigin::Original:
        full[j] = x[v.source];
        break;
      case VarOrigin::ExpansionBit: {
        long long s = std::llround(x[v.source] - model.vars[v.source].lb);
        full[j] = double((s >> v.bit) & 1);
        break;
      }
      case VarOrigin::ProductAux: {
        long long s = std::llround(x[v.source] - model.vars[v.source].lb);
        full[j] = double(((s >> v.bit) & 1) * ((s >> v.bit2) & 1));
        break;
      }
      case VarOrigin::SquareAux:
        full[j] = x[v.source] * x[v.source];
        break;
      case VarOrigin::DeltaSlack:
        full[j] = std::max(0.0, v.ref - x[v.source]);
        break;
      case VarOrigin::RowSlack: {
        const QuadConstraint& qc = inst.quad_constraints[v.source];
        full[j] = std::max(0.0, qc.Q.quad_form(x) + row_dot(qc.linear, x) - qc.rhs);
        break;
      }
      case VarOrigin::L1Aux:
        full[j] = std::abs(full[v.source] - v.ref);
        break;
    }
  }
  return full;
}

double lbc_distance(const ModelIR& model, std::span<const double> x,
                    std::span<const double> x_bar) {
  double dist = 0.0;
  for (int j : model.lbc_binaries()) dist += x_bar[j] > 0.5 ? 1.0 - x[j] : x[j];
  return dist;
}

double rlbc_distance(const ModelIR& model, std::span<const double> x,
                     std::span<const double> x_bar) {
  return double(model.lbc_binaries().size()) - lbc_distance(model, x, x_bar);
}

}  // namespace miqcqp
