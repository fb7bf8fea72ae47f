#include "miqcqp/instance.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace miqcqp {

const char* to_string(ProblemClass c) {
  switch (c) {
    case ProblemClass::MIBQP: return "MIBQP";
    case ProblemClass::MIQP: return "MIQP";
    case ProblemClass::MIQCP: return "MIQCP";
  }
  return "?";
}

std::vector<int> MiqcqpInstance::integer_indices() const {
  std::vector<int> idx;
  for (int j = 0; j < n; ++j)
    if (integer[j]) idx.push_back(j);
  return idx;
}

std::vector<int> MiqcqpInstance::binary_indices() const {
  std::vector<int> idx;
  for (int j = 0; j < n; ++j)
    if (is_binary(j)) idx.push_back(j);
  return idx;
}

std::vector<int> MiqcqpInstance::continuous_indices() const {
  std::vector<int> idx;
  for (int j = 0; j < n; ++j)
    if (!integer[j]) idx.push_back(j);
  return idx;
}

void MiqcqpInstance::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("instance: " + msg); };
  if (n <= 0) fail("n must be positive");
  if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n ||
      static_cast<int>(integer.size()) != n)
    fail("bound/integer vectors must have size n");
  if (static_cast<int>(objective.linear.size()) != n) fail("objective linear term must have size n");
  if (!objective.Q.empty() && objective.Q.dim() != n) fail("objective Q dimension mismatch");
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]))
      fail("bounds must be finite (variable " + std::to_string(j + 1) + ")");
    if (lower[j] > upper[j]) fail("lower > upper (variable " + std::to_string(j + 1) + ")");
    if (integer[j] && (lower[j] != std::floor(lower[j]) || upper[j] != std::floor(upper[j])))
      fail("integer variable has fractional bound (variable " + std::to_string(j + 1) + ")");
  }
  auto check_row = [&](const SparseRow& row, const std::string& what) {
    for (const auto& t : row) {
      if (t.index < 0 || t.index >= n) fail(what + ": index out of range");
      if (!std::isfinite(t.coef)) fail(what + ": nonfinite coefficient");
    }
  };
  for (const auto& qc : quad_constraints) {
    if (qc.Q.empty()) fail("quadratic constraint with empty Q");
    if (qc.Q.dim() != n) fail("quadratic constraint Q dimension mismatch");
    check_row(qc.linear, "quadratic constraint");
    if (!std::isfinite(qc.rhs)) fail("quadratic constraint rhs nonfinite");
  }
  for (const auto& lc : linear_constraints) {
    check_row(lc.terms, "linear constraint");
    if (!std::isfinite(lc.rhs)) fail("linear constraint rhs nonfinite");
  }
}

ProblemClass classify(const MiqcqpInstance& inst) {
  if (inst.num_quad() > 0) return ProblemClass::MIQCP;
  if (inst.num_linear() > 0) return ProblemClass::MIQP;
  return ProblemClass::MIBQP;
}

Evaluation evaluate(const MiqcqpInstance& inst, std::span<const double> x) {
  Evaluation ev;
  ev.objective = inst.objective.Q.empty() ? 0.0 : inst.objective.Q.quad_form(x);
  for (int j = 0; j < inst.n; ++j) ev.objective += inst.objective.linear[j] * x[j];
  ev.objective += inst.objective.constant;

  double viol = 0.0;
  for (const auto& qc : inst.quad_constraints)
    viol = std::max(viol, qc.Q.quad_form(x) + row_dot(qc.linear, x) - qc.rhs);
  for (const auto& lc : inst.linear_constraints)
    viol = std::max(viol, row_dot(lc.terms, x) - lc.rhs);
  for (int j = 0; j < inst.n; ++j) {
    viol = std::max(viol, inst.lower[j] - x[j]);
    viol = std::max(viol, x[j] - inst.upper[j]);
    if (inst.integer[j]) viol = std::max(viol, std::abs(x[j] - std::round(x[j])));
  }
  ev.max_violation = viol;
  return ev;
}

bool check_feasible(const MiqcqpInstance& inst, std::span<const double> x, double tol) {
  return evaluate(inst, x).max_violation <= tol;
}

NormalizedInstance normalize(const MiqcqpInstance& inst) {
  NormalizedInstance out;
  out.shift = inst.lower;
  MiqcqpInstance& t = out.inst;
  t = inst;
  const std::vector<double>& s = out.shift;

  // x = y + s turns x^T Q x + a.x + c into y^T Q y + (a + 2 Q s).y + (s^T Q s + a.s + c).
  std::vector<double> qs(inst.n, 0.0);
  if (!inst.objective.Q.empty()) {
    inst.objective.Q.multiply(s, qs);
    for (int j = 0; j < inst.n; ++j) t.objective.linear[j] += 2.0 * qs[j];
    t.objective.constant += inst.objective.Q.quad_form(s);
  }
  for (int j = 0; j < inst.n; ++j) t.objective.constant += inst.objective.linear[j] * s[j];

  for (std::size_t k = 0; k < inst.quad_constraints.size(); ++k) {
    const QuadConstraint& src = inst.quad_constraints[k];
    QuadConstraint& dst = t.quad_constraints[k];
    src.Q.multiply(s, qs);
    SparseRow extra;
    for (int j = 0; j < inst.n; ++j)
      if (qs[j] != 0.0) extra.push_back({j, 2.0 * qs[j]});
    dst.linear.insert(dst.linear.end(), extra.begin(), extra.end());
    sort_and_merge(dst.linear);
    dst.rhs -= src.Q.quad_form(s) + row_dot(src.linear, s);
  }
  for (std::size_t k = 0; k < inst.linear_constraints.size(); ++k)
    t.linear_constraints[k].rhs -= row_dot(inst.linear_constraints[k].terms, s);

  for (int j = 0; j < inst.n; ++j) {
    t.upper[j] = inst.upper[j] - s[j];
    t.lower[j] = 0.0;
  }
  return out;
}

std::vector<double> denormalize(const NormalizedInstance& norm, std::span<const double> y) {
  std::vector<double> x(y.begin(), y.end());
  for (std::size_t j = 0; j < x.size(); ++j) x[j] += norm.shift[j];
  return x;
}

double external_objective(const MiqcqpInstance& inst, double internal_value) {
  return inst.maximize_original ? -internal_value : internal_value;
}

}  // namespace miqcqp
