#include "miqcqp/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace miqcqp {

namespace {

Eigen::MatrixXd dense_of(const SymSparseMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.dim(), m.dim());
  for (const auto& e : m.entries()) {
    d(e.row, e.col) += e.value;
    if (e.row != e.col) d(e.col, e.row) += e.value;
  }
  return d;
}

std::pair<double, double> gershgorin(const SymSparseMatrix& m) {
  std::vector<double> diag(m.dim(), 0.0), radius(m.dim(), 0.0);
  for (const auto& e : m.entries()) {
    if (e.row == e.col) {
      diag[e.row] += e.value;
    } else {
      radius[e.row] += std::abs(e.value);
      radius[e.col] += std::abs(e.value);
    }
  }
  double lo = 0.0, hi = 0.0;
  bool first = true;
  for (int i = 0; i < m.dim(); ++i) {
    lo = first ? diag[i] - radius[i] : std::min(lo, diag[i] - radius[i]);
    hi = first ? diag[i] + radius[i] : std::max(hi, diag[i] + radius[i]);
    first = false;
  }
  return {lo, hi};
}

// One-sided Lanczos with full reorthogonalization; returns the extreme Ritz
// value towards `largest` plus its residual norm (an error radius).
struct RitzResult {
  double value = 0.0;
  double residual = 0.0;
  bool converged = false;
};

RitzResult lanczos_extreme(const SymSparseMatrix& m, bool largest, const EigenOptions& opt) {
  const int n = m.dim();
  const double scale = std::max(1.0, m.inf_norm());
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  Eigen::VectorXd v = Eigen::VectorXd::NullaryExpr(n, [&](Eigen::Index) { return unit(rng); });
  v.normalize();

  const int steps = std::min(opt.lanczos_max_iter, n);
  Eigen::MatrixXd basis(n, steps);
  std::vector<double> alpha, beta;
  Eigen::VectorXd w(n);

  RitzResult best;
  for (int j = 0; j < steps; ++j) {
    basis.col(j) = v;
    m.multiply({v.data(), static_cast<std::size_t>(n)}, {w.data(), static_cast<std::size_t>(n)});
    double a = v.dot(w);
    alpha.push_back(a);
    w -= a * v;
    if (j > 0) w -= beta.back() * basis.col(j - 1);
    // full reorthogonalization keeps the basis usable at desk sizes
    for (int t = 0; t <= j; ++t) w -= basis.col(t).dot(w) * basis.col(t);

    Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(j + 1, j + 1);
    for (int t = 0; t <= j; ++t) tri(t, t) = alpha[t];
    for (int t = 0; t + 1 <= j; ++t) {
      tri(t, t + 1) = beta[t];
      tri(t + 1, t) = beta[t];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tri);
    int pick = largest ? j : 0;
    double theta = es.eigenvalues()(pick);
    Eigen::VectorXd y = basis.leftCols(j + 1) * es.eigenvectors().col(pick);
    Eigen::VectorXd my(n);
    m.multiply({y.data(), static_cast<std::size_t>(n)}, {my.data(), static_cast<std::size_t>(n)});
    double res = (my - theta * y).norm();
    best = {theta, res, res <= opt.tol * scale};
    if (best.converged) return best;

    double b = w.norm();
    if (b <= 1e-14 * scale) {
      best.converged = true;  // invariant subspace found
      best.residual = 0.0;
      return best;
    }
    beta.push_back(b);
    v = w / b;
  }
  return best;
}

EigenExtremes extremes_of_submatrix(const SymSparseMatrix& sub, const EigenOptions& opt) {
  EigenExtremes out;
  if (sub.dim() == 0 || sub.empty()) return out;
  if (sub.dim() <= opt.dense_cutoff) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense_of(sub), Eigen::EigenvaluesOnly);
    out.min = es.eigenvalues().minCoeff();
    out.max = es.eigenvalues().maxCoeff();
    return out;
  }
  RitzResult lo = lanczos_extreme(sub, false, opt);
  RitzResult hi = lanczos_extreme(sub, true, opt);
  if (!lo.converged || !hi.converged) {
    auto [glo, ghi] = gershgorin(sub);
    out.min = glo;
    out.max = ghi;
    out.approx_fallback = true;
    return out;
  }
  out.min = lo.value - lo.residual;
  out.max = hi.value + hi.residual;
  return out;
}

}  // namespace

EigenExtremes extreme_eigenvalues(const SymSparseMatrix& m, const EigenOptions& opt) {
  std::vector<int> sup = m.support();
  return extremes_of_submatrix(m.principal_submatrix(sup), opt);
}

SpectralInfo analyze_matrix(const SymSparseMatrix& m, const std::vector<std::uint8_t>& integer,
                            const EigenOptions& opt) {
  SpectralInfo info;
  std::vector<int> sup = m.support();
  info.full = extremes_of_submatrix(m.principal_submatrix(sup), opt);

  std::vector<int> beta;
  for (int i : sup)
    if (!integer[i]) beta.push_back(i);
  info.beta_empty = beta.empty();
  if (!info.beta_empty) info.beta = extremes_of_submatrix(m.principal_submatrix(beta), opt);

  info.shift_classic = std::min(0.0, info.full.min);
  info.shift_safe = info.beta_empty
                        ? info.shift_classic
                        : std::min(2.0 * info.beta.min, info.full.min) - 1.0;
  return info;
}

std::vector<SpectralInfo> analyze_instance(const MiqcqpInstance& inst, const EigenOptions& opt) {
  std::vector<SpectralInfo> out;
  out.reserve(1 + inst.quad_constraints.size());
  out.push_back(analyze_matrix(inst.objective.Q.empty() ? SymSparseMatrix(inst.n)
                                                        : inst.objective.Q,
                               inst.integer, opt));
  for (const auto& qc : inst.quad_constraints) out.push_back(analyze_matrix(qc.Q, inst.integer, opt));
  return out;
}

const char* to_string(ShiftRule rule) {
  return rule == ShiftRule::Classic ? "classic" : "safe";
}

std::vector<double> applied_shifts(const std::vector<SpectralInfo>& info, ShiftRule rule) {
  std::vector<double> shifts;
  shifts.reserve(info.size());
  for (const auto& s : info)
    shifts.push_back(std::min(0.0, rule == ShiftRule::Classic ? s.shift_classic : s.shift_safe));
  return shifts;
}

double distance_coefficient(double lambda, double lambda_beta_min, double lambda_beta_max) {
  return (2.0 * lambda_beta_max - lambda) / (2.0 * (lambda_beta_min - lambda));
}

BoundCheck verify_bounds(const TheoremInstance& ti, const Eigen::VectorXd& u_hat,
                         double lambda, const Eigen::VectorXd& x_star, double tol) {
  const int na = ti.n_alpha;
  const int nb = ti.n_beta();
  BoundCheck out;
  out.shift = lambda;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> full(ti.Q, Eigen::EigenvaluesOnly);
  out.lambda_min = full.eigenvalues().minCoeff();
  Eigen::MatrixXd qb = ti.Q.bottomRightCorner(nb, nb);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> beta(qb, Eigen::EigenvaluesOnly);
  out.lambda_beta_min = beta.eigenvalues().minCoeff();
  out.lambda_beta_max = beta.eigenvalues().maxCoeff();

  Eigen::MatrixXd qg = ti.Q.topRightCorner(na, nb);  // Q_gamma
  Eigen::VectorXd ab = ti.a.tail(nb);

  if (na <= 20) {
    out.theta_exact = true;
    double best = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << na); ++mask) {
      Eigen::VectorXd v = ab;
      for (int i = 0; i < na; ++i)
        if (mask & (1u << i)) v += 2.0 * qg.row(i).transpose();
      best = std::max(best, v.norm());
    }
    out.theta_bar = best;
  } else {
    out.theta_exact = false;
    double bound = ab.norm();
    for (int i = 0; i < na; ++i) bound += 2.0 * qg.row(i).norm();
    out.theta_bar = bound;
  }

  Eigen::VectorXd xb = x_star.tail(nb);
  Eigen::VectorXd xa = x_star.head(na);
  out.dist_actual = (xb - u_hat).norm();
  out.norm_actual = xb.norm();

  const double denom = ti.Q.rows() == 0 ? 0.0 : out.lambda_beta_min - lambda;
  out.dist_applicable = denom > 1e-12;
  if (out.dist_applicable)
    out.dist_bound = ((2.0 * out.lambda_beta_max - lambda) * u_hat.norm() + out.theta_bar) /
                     (2.0 * denom);

  std::vector<int> beta_prime;
  for (int i = 0; i < nb; ++i)
    if (xb(i) > 1e-9) beta_prime.push_back(i);
  out.norm_applicable = !beta_prime.empty() && lambda < 0.0 &&
                        out.lambda_beta_max - lambda > 1e-12 && denom > 1e-12;
  if (out.norm_applicable) {
    Eigen::VectorXd g = 2.0 * qg.transpose() * xa + ab;
    double u_prime_sq = 0.0, omega_sq = 0.0;
    for (int i : beta_prime) {
      u_prime_sq += u_hat(i) * u_hat(i);
      omega_sq += (g(i) / lambda) * (g(i) / lambda);
    }
    const double u_prime = std::sqrt(u_prime_sq);
    out.omega = std::sqrt(omega_sq);
    out.norm_lo =
        lambda / (2.0 * (lambda - out.lambda_beta_max)) * std::abs(u_prime - out.omega);
    out.norm_hi = lambda / (2.0 * (lambda - out.lambda_beta_min)) * (u_prime + out.omega);
  }

  const double slack = tol * std::max(1.0, u_hat.norm() + out.theta_bar);
  bool ok = true;
  if (out.dist_applicable) ok = ok && out.dist_actual <= out.dist_bound + slack;
  if (out.norm_applicable)
    ok = ok && out.norm_lo - slack <= out.norm_actual && out.norm_actual <= out.norm_hi + slack;
  out.holds = ok;
  return out;
}

}  // namespace miqcqp
