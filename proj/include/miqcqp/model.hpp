#pragma once

#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <vector>

#include "miqcqp/sparse.hpp"

namespace miqcqp {

enum class VarKind { Continuous, Integer, Binary };
enum class VarOrigin {
  Original,      // mirrors instance variable `source`
  ExpansionBit,  // bit `bit` of the expansion of variable `source`
  SquareAux,     // X_ii for variable `source`
  ProductAux,    // H_{bit,bit2} for variable `source`
  DeltaSlack,    // FPR1 delta for variable `source`, ref = u_hat value
  RowSlack,      // FPR2 slack of quadratic row `source`
  L1Aux,         // l1 distance var for variable `source`, ref = projection center
};

enum class RowSense { LE, EQ, GE };

struct ModelVar {
  std::string name;
  double lb = 0.0;
  double ub = 0.0;
  VarKind kind = VarKind::Continuous;
  VarOrigin origin = VarOrigin::Original;
  int source = -1;
  int bit = -1;
  int bit2 = -1;
  double ref = 0.0;
};

struct ModelLinRow {
  SparseRow terms;
  RowSense sense = RowSense::LE;
  double rhs = 0.0;
  std::string tag;
};

struct ModelQuadRow {  // always <=
  SymSparseMatrix Q;
  SparseRow linear;
  double rhs = 0.0;
  std::string tag;
};

struct ModelObjective {
  SymSparseMatrix Q;  // may be empty
  SparseRow linear;
  double constant = 0.0;
};

/// Neutral optimization model consumed by all solver backends. The leading
/// original_n variables always mirror the source instance block.
struct ModelIR {
  std::string name;
  std::vector<ModelVar> vars;
  ModelObjective objective;
  std::vector<ModelLinRow> lin_rows;
  std::vector<ModelQuadRow> quad_rows;
  bool convex = false;
  int original_n = 0;

  int n_vars() const { return static_cast<int>(vars.size()); }
  int add_var(ModelVar v);
  bool integral_kind(int j) const { return vars[j].kind != VarKind::Continuous; }

  double objective_value(std::span<const double> x) const;
  /// Max violation over rows, bounds and integrality of integer/binary vars.
  double max_violation(std::span<const double> x) const;
  bool feasible(std::span<const double> x, double tol) const;

  /// Binary variables eligible for local-branching distances: original
  /// binaries and expansion bits.
  std::vector<int> lbc_binaries() const;

  nlohmann::ordered_json to_json() const;
  static ModelIR from_json(const nlohmann::json& j);
};

const char* to_string(VarKind k);
const char* to_string(VarOrigin o);
const char* to_string(RowSense s);

/// First original_n coordinates of a model point.
std::vector<double> extract_original(const ModelIR& model, std::span<const double> xm);

}  // namespace miqcqp
