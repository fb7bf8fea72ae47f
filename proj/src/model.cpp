#include "miqcqp/model.hpp"

#include <cmath>
#include <stdexcept>

namespace miqcqp {

int ModelIR::add_var(ModelVar v) {
  vars.push_back(std::move(v));
  return n_vars() - 1;
}

double ModelIR::objective_value(std::span<const double> x) const {
  double v = objective.constant + row_dot(objective.linear, x);
  if (!objective.Q.empty()) v += objective.Q.quad_form(x);
  return v;
}

double ModelIR::max_violation(std::span<const double> x) const {
  double viol = 0.0;
  for (const auto& row : lin_rows) {
    double lhs = row_dot(row.terms, x);
    switch (row.sense) {
      case RowSense::LE: viol = std::max(viol, lhs - row.rhs); break;
      case RowSense::GE: viol = std::max(viol, row.rhs - lhs); break;
      case RowSense::EQ: viol = std::max(viol, std::abs(lhs - row.rhs)); break;
    }
  }
  for (const auto& row : quad_rows)
    viol = std::max(viol, row.Q.quad_form(x) + row_dot(row.linear, x) - row.rhs);
  for (int j = 0; j < n_vars(); ++j) {
    viol = std::max(viol, vars[j].lb - x[j]);
    viol = std::max(viol, x[j] - vars[j].ub);
    if (integral_kind(j)) viol = std::max(viol, std::abs(x[j] - std::round(x[j])));
  }
  return viol;
}

bool ModelIR::feasible(std::span<const double> x, double tol) const {
  return max_violation(x) <= tol;
}

std::vector<int> ModelIR::lbc_binaries() const {
  std::vector<int> idx;
  for (int j = 0; j < n_vars(); ++j) {
    const ModelVar& v = vars[j];
    bool original_binary = v.origin == VarOrigin::Original && v.kind == VarKind::Binary;
    if (original_binary || v.origin == VarOrigin::ExpansionBit) idx.push_back(j);
  }
  return idx;
}

const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::Continuous: return "continuous";
    case VarKind::Integer: return "integer";
    case VarKind::Binary: return "binary";
  }
  return "?";
}

const char* to_string(VarOrigin o) {
  switch (o) {
    case VarOrigin::Original: return "original";
    case VarOrigin::ExpansionBit: return "expansion_bit";
    case VarOrigin::SquareAux: return "square_aux";
    case VarOrigin::ProductAux: return "product_aux";
    case VarOrigin::DeltaSlack: return "delta_slack";
    case VarOrigin::RowSlack: return "row_slack";
    case VarOrigin::L1Aux: return "l1_aux";
  }
  return "?";
}

const char* to_string(RowSense s) {
  switch (s) {
    case RowSense::LE: return "<=";
    case RowSense::EQ: return "=";
    case RowSense::GE: return ">=";
  }
  return "?";
}

namespace {

VarKind kind_from_string(const std::string& s) {
  if (s == "continuous") return VarKind::Continuous;
  if (s == "integer") return VarKind::Integer;
  if (s == "binary") return VarKind::Binary;
  throw std::invalid_argument("unknown variable kind: " + s);
}

VarOrigin origin_from_string(const std::string& s) {
  if (s == "original") return VarOrigin::Original;
  if (s == "expansion_bit") return VarOrigin::ExpansionBit;
  if (s == "square_aux") return VarOrigin::SquareAux;
  if (s == "product_aux") return VarOrigin::ProductAux;
  if (s == "delta_slack") return VarOrigin::DeltaSlack;
  if (s == "row_slack") return VarOrigin::RowSlack;
  if (s == "l1_aux") return VarOrigin::L1Aux;
  throw std::invalid_argument("unknown variable origin: " + s);
}

RowSense sense_from_string(const std::string& s) {
  if (s == "<=") return RowSense::LE;
  if (s == "=") return RowSense::EQ;
  if (s == ">=") return RowSense::GE;
  throw std::invalid_argument("unknown row sense: " + s);
}

nlohmann::ordered_json matrix_json(const SymSparseMatrix& q) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& e : q.entries()) out.push_back({e.row, e.col, e.value});
  return out;
}

SymSparseMatrix matrix_from_json(const nlohmann::json& j, int dim) {
  SymSparseMatrix q(dim);
  for (const auto& e : j) q.add(e.at(0).get<int>(), e.at(1).get<int>(), e.at(2).get<double>());
  q.compress();
  return q;
}

nlohmann::ordered_json row_json(const SparseRow& row) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const auto& t : row) out.push_back({t.index, t.coef});
  return out;
}

SparseRow row_from_json(const nlohmann::json& j) {
  SparseRow row;
  for (const auto& t : j) row.push_back({t.at(0).get<int>(), t.at(1).get<double>()});
  return row;
}

}  // namespace

nlohmann::ordered_json ModelIR::to_json() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["convex"] = convex;
  j["original_n"] = original_n;
  nlohmann::ordered_json vs = nlohmann::ordered_json::array();
  for (const auto& v : vars) {
    vs.push_back({{"name", v.name},
                  {"lb", v.lb},
                  {"ub", v.ub},
                  {"kind", to_string(v.kind)},
                  {"origin", to_string(v.origin)},
                  {"source", v.source},
                  {"bit", v.bit},
                  {"bit2", v.bit2},
                  {"ref", v.ref}});
  }
  j["variables"] = vs;
  j["objective"] = {{"Q", matrix_json(objective.Q)},
                    {"linear", row_json(objective.linear)},
                    {"constant", objective.constant}};
  nlohmann::ordered_json lr = nlohmann::ordered_json::array();
  for (const auto& row : lin_rows)
    lr.push_back({{"terms", row_json(row.terms)},
                  {"sense", to_string(row.sense)},
                  {"rhs", row.rhs},
                  {"tag", row.tag}});
  j["linear_constraints"] = lr;
  nlohmann::ordered_json qr = nlohmann::ordered_json::array();
  for (const auto& row : quad_rows)
    qr.push_back({{"Q", matrix_json(row.Q)},
                  {"linear", row_json(row.linear)},
                  {"rhs", row.rhs},
                  {"tag", row.tag}});
  j["quad_constraints"] = qr;
  return j;
}

ModelIR ModelIR::from_json(const nlohmann::json& j) {
  ModelIR m;
  m.name = j.at("name").get<std::string>();
  m.convex = j.at("convex").get<bool>();
  m.original_n = j.at("original_n").get<int>();
  for (const auto& v : j.at("variables")) {
    ModelVar mv;
    mv.name = v.at("name").get<std::string>();
    mv.lb = v.at("lb").get<double>();
    mv.ub = v.at("ub").get<double>();
    mv.kind = kind_from_string(v.at("kind").get<std::string>());
    mv.origin = origin_from_string(v.at("origin").get<std::string>());
    mv.source = v.at("source").get<int>();
    mv.bit = v.at("bit").get<int>();
    mv.bit2 = v.at("bit2").get<int>();
    mv.ref = v.at("ref").get<double>();
    m.vars.push_back(std::move(mv));
  }
  const int n = m.n_vars();
  const auto& obj = j.at("objective");
  m.objective.Q = matrix_from_json(obj.at("Q"), n);
  m.objective.linear = row_from_json(obj.at("linear"));
  m.objective.constant = obj.at("constant").get<double>();
  for (const auto& row : j.at("linear_constraints")) {
    ModelLinRow lr;
    lr.terms = row_from_json(row.at("terms"));
    lr.sense = sense_from_string(row.at("sense").get<std::string>());
    lr.rhs = row.at("rhs").get<double>();
    lr.tag = row.at("tag").get<std::string>();
    m.lin_rows.push_back(std::move(lr));
  }
  for (const auto& row : j.at("quad_constraints")) {
    ModelQuadRow qr;
    qr.Q = matrix_from_json(row.at("Q"), n);
    qr.linear = row_from_json(row.at("linear"));
    qr.rhs = row.at("rhs").get<double>();
    qr.tag = row.at("tag").get<std::string>();
    m.quad_rows.push_back(std::move(qr));
  }
  return m;
}

std::vector<double> extract_original(const ModelIR& model, std::span<const double> xm) {
  return std::vector<double>(xm.begin(), xm.begin() + model.original_n);
}

}  // namespace miqcqp
