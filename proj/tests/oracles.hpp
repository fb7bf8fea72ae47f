// Test-only reference implementations. These deliberately avoid the library's
// sparse code paths: everything is expanded to dense Eigen objects and
// recomputed from the problem definition.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "miqcqp/instance.hpp"
#include "miqcqp/spectral.hpp"

namespace oracle {

inline Eigen::MatrixXd dense_matrix(const miqcqp::SymSparseMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.dim(), m.dim());
  for (const auto& e : m.entries()) {
    d(e.row, e.col) += e.value;
    if (e.row != e.col) d(e.col, e.row) += e.value;
  }
  return d;
}

inline Eigen::VectorXd dense_row(const miqcqp::SparseRow& row, int n) {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n);
  for (const auto& t : row) d(t.index) += t.coef;
  return d;
}

inline Eigen::VectorXd to_vec(std::span<const double> x) {
  return Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
}

inline double dense_objective(const miqcqp::MiqcqpInstance& inst, std::span<const double> xs) {
  Eigen::VectorXd x = to_vec(xs);
  Eigen::MatrixXd q = dense_matrix(inst.objective.Q.empty()
                                       ? miqcqp::SymSparseMatrix(inst.n)
                                       : inst.objective.Q);
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(inst.objective.linear.data(), inst.n);
  return x.dot(q * x) + a.dot(x) + inst.objective.constant;
}

inline double dense_max_violation(const miqcqp::MiqcqpInstance& inst, std::span<const double> xs) {
  Eigen::VectorXd x = to_vec(xs);
  double viol = 0.0;
  for (const auto& qc : inst.quad_constraints) {
    Eigen::MatrixXd q = dense_matrix(qc.Q);
    Eigen::VectorXd a = dense_row(qc.linear, inst.n);
    viol = std::max(viol, x.dot(q * x) + a.dot(x) - qc.rhs);
  }
  for (const auto& lc : inst.linear_constraints)
    viol = std::max(viol, dense_row(lc.terms, inst.n).dot(x) - lc.rhs);
  for (int j = 0; j < inst.n; ++j) {
    viol = std::max(viol, inst.lower[j] - x(j));
    viol = std::max(viol, x(j) - inst.upper[j]);
    if (inst.integer[j]) viol = std::max(viol, std::abs(x(j) - std::round(x(j))));
  }
  return viol;
}

/// Eigenvalue extremes through Eigen's dense symmetric solver.
inline std::pair<double, double> dense_eigen_range(const miqcqp::SymSparseMatrix& m) {
  if (m.dim() == 0) return {0.0, 0.0};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_matrix(m), Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

/// Exact optimum of the perturbed sign-constrained MIQP
///   min x^T (Q - lambda I) x + a^T x + lambda u_hat^T x_beta + lambda 1^T x_alpha
/// with binary x_alpha and x_beta >= 0, by enumerating binary assignments and
/// active sets. Requires Q_beta - lambda I positive definite.
inline Eigen::VectorXd solve_perturbed(const miqcqp::TheoremInstance& ti,
                                       const Eigen::VectorXd& u_hat, double lambda) {
  const int na = ti.n_alpha;
  const int nb = ti.n_beta();
  const Eigen::MatrixXd h = 2.0 * (ti.Q.bottomRightCorner(nb, nb) -
                                   lambda * Eigen::MatrixXd::Identity(nb, nb));
  const Eigen::MatrixXd qg = ti.Q.topRightCorner(na, nb);

  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best = Eigen::VectorXd::Zero(na + nb);
  for (std::uint32_t mask = 0; mask < (1u << na); ++mask) {
    Eigen::VectorXd xa(na);
    for (int i = 0; i < na; ++i) xa(i) = (mask >> i) & 1u ? 1.0 : 0.0;
    Eigen::VectorXd c = ti.a.tail(nb) + lambda * u_hat + 2.0 * qg.transpose() * xa;
    double alpha_part =
        xa.dot((ti.Q.topLeftCorner(na, na) - lambda * Eigen::MatrixXd::Identity(na, na)) * xa) +
        (ti.a.head(na) + lambda * Eigen::VectorXd::Ones(na)).dot(xa);

    for (std::uint32_t zset = 0; zset < (1u << nb); ++zset) {
      std::vector<int> free_idx;
      for (int i = 0; i < nb; ++i)
        if (!((zset >> i) & 1u)) free_idx.push_back(i);
      Eigen::VectorXd xb = Eigen::VectorXd::Zero(nb);
      if (!free_idx.empty()) {
        const int f = static_cast<int>(free_idx.size());
        Eigen::MatrixXd hf(f, f);
        Eigen::VectorXd cf(f);
        for (int r = 0; r < f; ++r) {
          cf(r) = c(free_idx[r]);
          for (int cidx = 0; cidx < f; ++cidx) hf(r, cidx) = h(free_idx[r], free_idx[cidx]);
        }
        Eigen::VectorXd sol = hf.ldlt().solve(-cf);
        for (int r = 0; r < f; ++r) xb(free_idx[r]) = sol(r);
      }
      bool ok = true;
      for (int i = 0; i < nb && ok; ++i)
        if (xb(i) < -1e-11) ok = false;
      Eigen::VectorXd grad = h * xb + c;
      for (int i = 0; i < nb && ok; ++i)
        if (((zset >> i) & 1u) && grad(i) < -1e-11) ok = false;
      if (!ok) continue;
      for (int i = 0; i < nb; ++i) xb(i) = std::max(0.0, xb(i));
      double val = alpha_part + 0.5 * xb.dot(h * xb) + c.dot(xb);
      if (val < best_val - 1e-15) {
        best_val = val;
        best.head(na) = xa;
        best.tail(nb) = xb;
      }
    }
  }
  return best;
}

}  // namespace oracle
