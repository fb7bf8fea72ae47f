#include "miqcqp/qplib.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace miqcqp {

namespace {

constexpr double kClampBound = 1e7;
constexpr double kWriteInfinity = 1e20;

// Reads whitespace-separated tokens line by line, skipping blank lines and
// '!' comment lines. Callers take the leading tokens they need; trailing
// text on a data line is commentary and ignored.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  int line() const { return line_; }

  std::vector<std::string> data_line(int min_tokens, const char* what) {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      std::istringstream ss(raw);
      std::vector<std::string> tokens;
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (tokens.empty() || tokens[0][0] == '!') continue;
      if (static_cast<int>(tokens.size()) < min_tokens)
        throw ParseError(line_, std::string("expected ") + what);
      return tokens;
    }
    throw ParseError(line_ + 1, std::string("unexpected end of file, expected ") + what);
  }

  bool at_end() {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++line_;
      std::istringstream ss(raw);
      std::string tok;
      if (ss >> tok && tok[0] != '!') {
        pending_ = true;
        pending_line_ = raw;
        return false;
      }
    }
    return true;
  }

  // After a failed at_end() the unread line is replayed.
  std::vector<std::string> replay_or_data_line(int min_tokens, const char* what) {
    if (pending_) {
      pending_ = false;
      std::istringstream ss(pending_line_);
      std::vector<std::string> tokens;
      std::string tok;
      while (ss >> tok) tokens.push_back(tok);
      if (static_cast<int>(tokens.size()) < min_tokens)
        throw ParseError(line_, std::string("expected ") + what);
      return tokens;
    }
    return data_line(min_tokens, what);
  }

 private:
  std::istream& in_;
  int line_ = 0;
  bool pending_ = false;
  std::string pending_line_;
};

double to_double(const TokenReader& r, const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(r.line(), std::string("bad ") + what + " '" + tok + "'");
  }
}

long long to_int(const TokenReader& r, const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    long long v = std::stoll(tok, &pos);
    if (pos != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(r.line(), std::string("bad ") + what + " '" + tok + "'");
  }
}

struct DefaultedVector {
  std::vector<double> values;
  std::vector<int> set_line;  // line that fixed each entry, default line otherwise
};

DefaultedVector read_defaulted(TokenReader& r, int size, const char* what) {
  DefaultedVector out;
  auto def = r.data_line(1, what);
  double d = to_double(r, def[0], what);
  int def_line = r.line();
  out.values.assign(size, d);
  out.set_line.assign(size, def_line);
  auto cnt = r.data_line(1, what);
  long long k = to_int(r, cnt[0], what);
  for (long long t = 0; t < k; ++t) {
    auto e = r.data_line(2, what);
    long long idx = to_int(r, e[0], what);
    if (idx < 1 || idx > size)
      throw ParseError(r.line(), std::string(what) + " index out of range");
    out.values[idx - 1] = to_double(r, e[1], what);
    out.set_line[idx - 1] = r.line();
  }
  return out;
}

void warn(std::vector<std::string>* warnings, const std::string& msg) {
  if (warnings) warnings->push_back(msg);
}

}  // namespace

MiqcqpInstance parse_qplib(std::istream& in, std::vector<std::string>* warnings) {
  TokenReader r(in);

  MiqcqpInstance inst;
  inst.name = r.data_line(1, "problem name")[0];

  std::string type = r.data_line(1, "problem type")[0];
  for (auto& ch : type) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  if (type.size() != 3 || std::string("LDCQ").find(type[0]) == std::string::npos ||
      std::string("CBMIG").find(type[1]) == std::string::npos ||
      std::string("NBLDCQ").find(type[2]) == std::string::npos)
    throw ParseError(r.line(), "malformed problem type '" + type + "'");
  const bool has_obj_q = type[0] != 'L';
  const char var_code = type[1];
  const char con_code = type[2];
  const bool has_con_section = con_code != 'N' && con_code != 'B';
  const bool has_con_q = con_code == 'D' || con_code == 'C' || con_code == 'Q';

  std::string sense = r.data_line(1, "objective sense")[0];
  for (auto& ch : sense) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  bool maximize;
  if (sense == "minimize") maximize = false;
  else if (sense == "maximize") maximize = true;
  else throw ParseError(r.line(), "objective sense must be minimize or maximize");

  long long n_ll = to_int(r, r.data_line(1, "variable count")[0], "variable count");
  if (n_ll < 1 || n_ll > 10'000'000) throw ParseError(r.line(), "variable count out of range");
  const int n = static_cast<int>(n_ll);
  inst.n = n;

  long long m = 0;
  if (has_con_section) {
    m = to_int(r, r.data_line(1, "constraint count")[0], "constraint count");
    if (m < 0) throw ParseError(r.line(), "negative constraint count");
  }

  // Objective quadratic: file stores 0.5 x^T Q x, entry values are halved here.
  SymSparseMatrix q0(n);
  if (has_obj_q) {
    long long nq = to_int(r, r.data_line(1, "objective Hessian count")[0], "objective Hessian count");
    for (long long t = 0; t < nq; ++t) {
      auto e = r.data_line(3, "objective Hessian entry");
      long long i = to_int(r, e[0], "row index"), j = to_int(r, e[1], "column index");
      double v = to_double(r, e[2], "coefficient");
      if (i < 1 || i > n || j < 1 || j > n)
        throw ParseError(r.line(), "objective Hessian index out of range");
      if (!std::isfinite(v)) throw ParseError(r.line(), "nonfinite objective coefficient");
      q0.add(static_cast<int>(i) - 1, static_cast<int>(j) - 1, 0.5 * v);
    }
    q0.compress();
  }

  DefaultedVector b0 = read_defaulted(r, n, "objective linear term");
  double q0_const = to_double(r, r.data_line(1, "objective constant")[0], "objective constant");

  std::vector<SymSparseMatrix> con_q(m, SymSparseMatrix(n));
  if (m > 0 && has_con_q) {
    long long nq = to_int(r, r.data_line(1, "constraint Hessian count")[0], "constraint Hessian count");
    for (long long t = 0; t < nq; ++t) {
      auto e = r.data_line(4, "constraint Hessian entry");
      long long k = to_int(r, e[0], "constraint index");
      long long i = to_int(r, e[1], "row index"), j = to_int(r, e[2], "column index");
      double v = to_double(r, e[3], "coefficient");
      if (k < 1 || k > m) throw ParseError(r.line(), "constraint index out of range");
      if (i < 1 || i > n || j < 1 || j > n)
        throw ParseError(r.line(), "constraint Hessian index out of range");
      if (!std::isfinite(v)) throw ParseError(r.line(), "nonfinite constraint coefficient");
      con_q[k - 1].add(static_cast<int>(i) - 1, static_cast<int>(j) - 1, 0.5 * v);
    }
    for (auto& qk : con_q) qk.compress();
  }

  std::vector<SparseRow> con_lin(m);
  if (m > 0) {
    long long nb = to_int(r, r.data_line(1, "constraint coefficient count")[0],
                          "constraint coefficient count");
    for (long long t = 0; t < nb; ++t) {
      auto e = r.data_line(3, "constraint coefficient");
      long long k = to_int(r, e[0], "constraint index");
      long long i = to_int(r, e[1], "variable index");
      double v = to_double(r, e[2], "coefficient");
      if (k < 1 || k > m) throw ParseError(r.line(), "constraint index out of range");
      if (i < 1 || i > n) throw ParseError(r.line(), "variable index out of range");
      if (!std::isfinite(v)) throw ParseError(r.line(), "nonfinite constraint coefficient");
      con_lin[k - 1].push_back({static_cast<int>(i) - 1, v});
    }
    for (auto& row : con_lin) sort_and_merge(row);
  }

  double infinity = to_double(r, r.data_line(1, "infinity value")[0], "infinity value");
  if (!(infinity > 0)) throw ParseError(r.line(), "infinity value must be positive");
  auto is_inf = [infinity](double v) { return v >= infinity || v <= -infinity || !std::isfinite(v); };

  DefaultedVector cl, cu;
  if (m > 0) {
    cl = read_defaulted(r, static_cast<int>(m), "constraint lower bound");
    cu = read_defaulted(r, static_cast<int>(m), "constraint upper bound");
  }

  DefaultedVector lo, hi;
  if (var_code == 'B') {
    lo.values.assign(n, 0.0);
    hi.values.assign(n, 1.0);
    lo.set_line.assign(n, r.line());
    hi.set_line.assign(n, r.line());
  } else {
    lo = read_defaulted(r, n, "variable lower bound");
    hi = read_defaulted(r, n, "variable upper bound");
  }

  inst.integer.assign(n, var_code == 'B' || var_code == 'I' ? 1 : 0);
  if (var_code == 'M' || var_code == 'G') {
    auto def = r.data_line(1, "default variable type");
    long long d = to_int(r, def[0], "variable type");
    if (d < 0 || d > 2) throw ParseError(r.line(), "variable type must be 0, 1 or 2");
    std::fill(inst.integer.begin(), inst.integer.end(), d == 0 ? 0 : 1);
    long long k = to_int(r, r.data_line(1, "variable type count")[0], "variable type count");
    for (long long t = 0; t < k; ++t) {
      auto e = r.data_line(2, "variable type");
      long long idx = to_int(r, e[0], "variable index");
      long long tv = to_int(r, e[1], "variable type");
      if (idx < 1 || idx > n) throw ParseError(r.line(), "variable index out of range");
      if (tv < 0 || tv > 2) throw ParseError(r.line(), "variable type must be 0, 1 or 2");
      inst.integer[idx - 1] = tv == 0 ? 0 : 1;
    }
  }

  // Optional trailing sections: starting points and names.
  if (!r.at_end()) {
    auto skip_defaulted = [&](const char* what) {
      auto def = r.replay_or_data_line(1, what);
      (void)def;
      long long k = to_int(r, r.data_line(1, what)[0], what);
      for (long long t = 0; t < k; ++t) r.data_line(2, what);
    };
    skip_defaulted("primal start");
    if (m > 0 && !r.at_end()) skip_defaulted("dual start");
    if (!r.at_end()) skip_defaulted("bound dual start");
    if (!r.at_end()) {
      long long k = to_int(r, r.replay_or_data_line(1, "variable names")[0], "variable names");
      for (long long t = 0; t < k; ++t) r.data_line(2, "variable name");
    }
    if (m > 0 && !r.at_end()) {
      long long k = to_int(r, r.replay_or_data_line(1, "constraint names")[0], "constraint names");
      for (long long t = 0; t < k; ++t) r.data_line(2, "constraint name");
    }
  }

  // Assemble the instance in one-sided form.
  inst.objective.Q = q0;
  inst.objective.linear = b0.values;
  inst.objective.constant = q0_const;

  for (long long k = 0; k < m; ++k) {
    const bool has_q = !con_q[k].empty();
    const double lo_k = m > 0 ? cl.values[k] : 0.0;
    const double hi_k = m > 0 ? cu.values[k] : 0.0;
    const bool lo_inf = is_inf(lo_k) && lo_k < 0;
    const bool hi_inf = is_inf(hi_k) && hi_k > 0;
    if (is_inf(lo_k) && lo_k > 0)
      throw ParseError(cl.set_line[k], "constraint lower bound is +infinity");
    if (is_inf(hi_k) && hi_k < 0)
      throw ParseError(cu.set_line[k], "constraint upper bound is -infinity");
    if (lo_inf && hi_inf) {
      warn(warnings, "constraint " + std::to_string(k + 1) + " is free and was dropped");
      continue;
    }
    auto push = [&](double sign, double rhs) {
      if (has_q) {
        QuadConstraint qc;
        qc.Q = sign == 1.0 ? con_q[k] : con_q[k].scaled(-1.0);
        qc.linear = con_lin[k];
        for (auto& t : qc.linear) t.coef *= sign;
        qc.rhs = rhs;
        inst.quad_constraints.push_back(std::move(qc));
      } else {
        LinearConstraint lc;
        lc.terms = con_lin[k];
        for (auto& t : lc.terms) t.coef *= sign;
        lc.rhs = rhs;
        inst.linear_constraints.push_back(std::move(lc));
      }
    };
    if (!hi_inf) push(1.0, hi_k);
    if (!lo_inf) push(-1.0, -lo_k);
  }

  // Bound policy: quadratic support and integer variables need finite boxes.
  std::vector<char> in_quad(n, 0);
  for (int i : inst.objective.Q.support()) in_quad[i] = 1;
  for (const auto& qc : inst.quad_constraints)
    for (int i : qc.Q.support()) in_quad[i] = 1;

  inst.lower = lo.values;
  inst.upper = hi.values;
  for (int j = 0; j < n; ++j) {
    const bool lo_is_inf = is_inf(inst.lower[j]);
    const bool hi_is_inf = is_inf(inst.upper[j]);
    if (lo_is_inf || hi_is_inf) {
      int at = lo_is_inf ? lo.set_line[j] : hi.set_line[j];
      if (inst.integer[j])
        throw ParseError(at, "integer variable " + std::to_string(j + 1) + " has an infinite bound");
      if (in_quad[j])
        throw ParseError(at, "variable " + std::to_string(j + 1) +
                                 " appears in a quadratic term but has an infinite bound");
      if (lo_is_inf) inst.lower[j] = -kClampBound;
      if (hi_is_inf) inst.upper[j] = kClampBound;
      warn(warnings, "variable " + std::to_string(j + 1) + " bound clamped to +/-1e7");
    }
    if (inst.integer[j]) {
      inst.lower[j] = std::ceil(inst.lower[j] - 1e-9);
      inst.upper[j] = std::floor(inst.upper[j] + 1e-9);
    }
    if (inst.lower[j] > inst.upper[j])
      throw ParseError(lo.set_line[j],
                       "variable " + std::to_string(j + 1) + " has empty bound interval");
  }

  inst.maximize_original = maximize;
  if (maximize) {
    inst.objective.Q = inst.objective.Q.scaled(-1.0);
    for (auto& v : inst.objective.linear) v = -v;
    inst.objective.constant = -inst.objective.constant;
  }

  inst.validate();
  return inst;
}

MiqcqpInstance parse_qplib_file(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_qplib(in, warnings);
}

namespace {

void write_number(std::ostream& out, double v) {
  std::ostringstream ss;
  ss << std::setprecision(17) << v;
  out << ss.str();
}

void write_defaulted(std::ostream& out, const std::vector<double>& values, double def,
                     const char* what) {
  write_number(out, def);
  out << " ! default " << what << "\n";
  int count = 0;
  for (double v : values)
    if (v != def) ++count;
  out << count << " ! non-default entries\n";
  for (std::size_t j = 0; j < values.size(); ++j)
    if (values[j] != def) {
      out << (j + 1) << " ";
      write_number(out, values[j]);
      out << "\n";
    }
}

}  // namespace

void write_qplib(const MiqcqpInstance& inst, std::ostream& out) {
  const int n = inst.n;
  const double sign = inst.maximize_original ? -1.0 : 1.0;

  const bool all_int = std::all_of(inst.integer.begin(), inst.integer.end(),
                                   [](std::uint8_t b) { return b != 0; });
  const bool any_int = std::any_of(inst.integer.begin(), inst.integer.end(),
                                   [](std::uint8_t b) { return b != 0; });
  bool all_binary = all_int;
  for (int j = 0; j < n && all_binary; ++j) all_binary = inst.is_binary(j);

  char obj_code = inst.objective.Q.empty() ? 'L' : 'Q';
  char var_code = all_binary ? 'B' : (all_int ? 'I' : (any_int ? 'G' : 'C'));
  char con_code = inst.num_quad() > 0 ? 'Q' : (inst.num_linear() > 0 ? 'L' : 'B');
  const long long m = inst.num_quad() + inst.num_linear();

  std::string name = inst.name.empty() ? "unnamed" : inst.name;
  std::replace(name.begin(), name.end(), ' ', '_');
  out << name << "\n";
  out << obj_code << var_code << con_code << " ! problem type\n";
  out << (inst.maximize_original ? "maximize" : "minimize") << "\n";
  out << n << " ! variables\n";
  if (con_code != 'N' && con_code != 'B') out << m << " ! constraints\n";

  if (obj_code != 'L') {
    out << inst.objective.Q.nnz() << " ! objective Hessian entries\n";
    for (const auto& e : inst.objective.Q.entries()) {
      out << (e.col + 1) << " " << (e.row + 1) << " ";
      write_number(out, sign * 2.0 * e.value);
      out << "\n";
    }
  }

  std::vector<double> b0 = inst.objective.linear;
  for (auto& v : b0) v *= sign;
  write_defaulted(out, b0, 0.0, "objective linear term");
  write_number(out, sign * inst.objective.constant);
  out << " ! objective constant\n";

  if (m > 0) {
    if (con_code == 'Q') {
      long long nq = 0;
      for (const auto& qc : inst.quad_constraints) nq += qc.Q.nnz();
      out << nq << " ! constraint Hessian entries\n";
      for (std::size_t k = 0; k < inst.quad_constraints.size(); ++k)
        for (const auto& e : inst.quad_constraints[k].Q.entries()) {
          out << (k + 1) << " " << (e.col + 1) << " " << (e.row + 1) << " ";
          write_number(out, 2.0 * e.value);
          out << "\n";
        }
    }
    long long nb = 0;
    for (const auto& qc : inst.quad_constraints) nb += static_cast<long long>(qc.linear.size());
    for (const auto& lc : inst.linear_constraints) nb += static_cast<long long>(lc.terms.size());
    out << nb << " ! constraint linear entries\n";
    long long k = 1;
    for (const auto& qc : inst.quad_constraints) {
      for (const auto& t : qc.linear) {
        out << k << " " << (t.index + 1) << " ";
        write_number(out, t.coef);
        out << "\n";
      }
      ++k;
    }
    for (const auto& lc : inst.linear_constraints) {
      for (const auto& t : lc.terms) {
        out << k << " " << (t.index + 1) << " ";
        write_number(out, t.coef);
        out << "\n";
      }
      ++k;
    }
  }

  write_number(out, kWriteInfinity);
  out << " ! infinity\n";

  if (m > 0) {
    out << -kWriteInfinity << " ! default constraint lower bound\n0 ! non-default entries\n";
    out << kWriteInfinity << " ! default constraint upper bound\n" << m
        << " ! non-default entries\n";
    long long k = 1;
    for (const auto& qc : inst.quad_constraints) {
      out << k++ << " ";
      write_number(out, qc.rhs);
      out << "\n";
    }
    for (const auto& lc : inst.linear_constraints) {
      out << k++ << " ";
      write_number(out, lc.rhs);
      out << "\n";
    }
  }

  if (var_code != 'B') {
    write_defaulted(out, inst.lower, 0.0, "variable lower bound");
    write_defaulted(out, inst.upper, 1.0, "variable upper bound");
  }

  if (var_code == 'M' || var_code == 'G') {
    out << "0 ! default variable type\n";
    long long k = 0;
    for (int j = 0; j < n; ++j)
      if (inst.integer[j]) ++k;
    out << k << " ! non-default variable types\n";
    for (int j = 0; j < n; ++j)
      if (inst.integer[j]) out << (j + 1) << " 1\n";
  }

  out << "0 ! default primal start\n0 ! non-default entries\n";
  if (m > 0) out << "0 ! default dual start\n0 ! non-default entries\n";
  out << "0 ! default bound dual start\n0 ! non-default entries\n";
  out << "0 ! non-default variable names\n";
  if (m > 0) out << "0 ! non-default constraint names\n";
}

void write_qplib_file(const MiqcqpInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  write_qplib(inst, out);
}

nlohmann::ordered_json instance_to_json(const MiqcqpInstance& inst) {
  nlohmann::ordered_json j;
  j["name"] = inst.name;
  j["n"] = inst.n;
  j["class"] = to_string(classify(inst));
  j["maximize_original"] = inst.maximize_original;

  auto matrix_json = [](const SymSparseMatrix& q) {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& e : q.entries()) entries.push_back({e.row, e.col, e.value});
    return entries;
  };
  auto row_json = [](const SparseRow& row) {
    nlohmann::ordered_json terms = nlohmann::ordered_json::array();
    for (const auto& t : row) terms.push_back({t.index, t.coef});
    return terms;
  };

  j["objective"] = {{"Q", matrix_json(inst.objective.Q)},
                    {"linear", inst.objective.linear},
                    {"constant", inst.objective.constant}};
  nlohmann::ordered_json quads = nlohmann::ordered_json::array();
  for (const auto& qc : inst.quad_constraints)
    quads.push_back({{"Q", matrix_json(qc.Q)}, {"linear", row_json(qc.linear)}, {"rhs", qc.rhs}});
  j["quad_constraints"] = quads;
  nlohmann::ordered_json lins = nlohmann::ordered_json::array();
  for (const auto& lc : inst.linear_constraints)
    lins.push_back({{"terms", row_json(lc.terms)}, {"rhs", lc.rhs}});
  j["linear_constraints"] = lins;
  j["lower"] = inst.lower;
  j["upper"] = inst.upper;
  std::vector<int> integer(inst.integer.begin(), inst.integer.end());
  j["integer"] = integer;
  return j;
}

}  // namespace miqcqp
