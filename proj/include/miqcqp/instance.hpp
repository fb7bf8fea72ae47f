#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "miqcqp/sparse.hpp"

namespace miqcqp {

/// Quadratic inequality row: x^T Q x + linear . x <= rhs.
struct QuadConstraint {
  SymSparseMatrix Q;
  SparseRow linear;
  double rhs = 0.0;

  bool operator==(const QuadConstraint&) const = default;
};

/// Linear inequality row: terms . x <= rhs.
struct LinearConstraint {
  SparseRow terms;
  double rhs = 0.0;

  bool operator==(const LinearConstraint&) const = default;
};

struct QuadObjective {
  SymSparseMatrix Q;            // may be empty
  std::vector<double> linear;   // dense, size n
  double constant = 0.0;

  bool operator==(const QuadObjective&) const = default;
};

enum class ProblemClass { MIBQP, MIQP, MIQCP };

const char* to_string(ProblemClass c);

/// Minimization problem
///   min x^T Q0 x + a0 . x + b0
///   s.t. x^T Qk x + ak . x <= bk      (quad_constraints)
///        A x <= bA                    (linear_constraints)
///        lower <= x <= upper, x_j integral for j with integer[j] != 0.
/// Bounds are finite; maximization inputs are negated on load and flagged.
struct MiqcqpInstance {
  std::string name;
  int n = 0;
  QuadObjective objective;
  std::vector<QuadConstraint> quad_constraints;
  std::vector<LinearConstraint> linear_constraints;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<std::uint8_t> integer;
  bool maximize_original = false;

  int num_quad() const { return static_cast<int>(quad_constraints.size()); }
  int num_linear() const { return static_cast<int>(linear_constraints.size()); }
  bool is_binary(int j) const {
    return integer[j] != 0 && lower[j] == 0.0 && upper[j] == 1.0;
  }
  std::vector<int> integer_indices() const;
  std::vector<int> binary_indices() const;
  std::vector<int> continuous_indices() const;

  /// Throws std::invalid_argument when a structural invariant is broken
  /// (sizes, bound order, infinite bounds, non-integral integer bounds).
  void validate() const;

  bool operator==(const MiqcqpInstance&) const = default;
};

struct Evaluation {
  double objective = 0.0;
  double max_violation = 0.0;  // over quad rows, linear rows, bounds, integrality
};

ProblemClass classify(const MiqcqpInstance& inst);
Evaluation evaluate(const MiqcqpInstance& inst, std::span<const double> x);
bool check_feasible(const MiqcqpInstance& inst, std::span<const double> x, double tol);

/// Instance translated so every lower bound is 0, plus the shift that maps
/// normalized points back: x_original = y + shift.
struct NormalizedInstance {
  MiqcqpInstance inst;
  std::vector<double> shift;
};

NormalizedInstance normalize(const MiqcqpInstance& inst);
std::vector<double> denormalize(const NormalizedInstance& norm, std::span<const double> y);

/// Objective value in the caller's original sense (negated back when the
/// source file was a maximization problem).
double external_objective(const MiqcqpInstance& inst, double internal_value);

}  // namespace miqcqp
