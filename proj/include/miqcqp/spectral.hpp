#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "miqcqp/instance.hpp"
#include "miqcqp/sparse.hpp"

namespace miqcqp {

struct EigenOptions {
  int dense_cutoff = 64;      // dense solver up to this support size
  int lanczos_max_iter = 300;
  double tol = 1e-9;          // Lanczos residual tolerance (relative)
};

/// Enclosure of the extreme eigenvalues of the support submatrix: the true
/// minimum eigenvalue is >= min and the true maximum is <= max up to the
/// reported residual slack. approx_fallback marks a Gershgorin enclosure.
struct EigenExtremes {
  double min = 0.0;
  double max = 0.0;
  bool approx_fallback = false;
};

/// Extremes of the principal submatrix on the support of m (variables with at
/// least one entry). Empty matrices yield {0, 0}.
EigenExtremes extreme_eigenvalues(const SymSparseMatrix& m, const EigenOptions& opt = {});

struct SpectralInfo {
  EigenExtremes full;          // support submatrix
  EigenExtremes beta;          // continuous block within the support
  bool beta_empty = true;
  double shift_classic = 0.0;  // min{0, lambda_min}
  double shift_safe = 0.0;     // min{2 lambda_beta_min, lambda_min} - 1; classic when beta empty
};

SpectralInfo analyze_matrix(const SymSparseMatrix& m, const std::vector<std::uint8_t>& integer,
                            const EigenOptions& opt = {});

/// Entry 0 describes the objective; entries 1..m1 follow quad_constraints.
std::vector<SpectralInfo> analyze_instance(const MiqcqpInstance& inst,
                                           const EigenOptions& opt = {});

enum class ShiftRule { Classic, Safe };

const char* to_string(ShiftRule rule);

/// Applied diagonal shifts, one per analyzed matrix, clamped to <= 0.
std::vector<double> applied_shifts(const std::vector<SpectralInfo>& info, ShiftRule rule);

/// Dense unconstrained-but-sign MIQP used by the perturbation analysis:
///   min x^T Q x + a^T x,  x_alpha in {0,1}^{n_alpha} (leading block),
///   x_beta >= 0 (trailing block).
struct TheoremInstance {
  Eigen::MatrixXd Q;
  Eigen::VectorXd a;
  int n_alpha = 0;

  int n_beta() const { return static_cast<int>(Q.rows()) - n_alpha; }
};

/// Numeric evaluation of the perturbation bounds for a solution x_star of
///   min x^T (Q - lambda I) x + a^T x + lambda u_hat^T x_beta + lambda 1^T x_alpha.
struct BoundCheck {
  double lambda_min = 0.0;
  double lambda_beta_min = 0.0;
  double lambda_beta_max = 0.0;
  double shift = 0.0;
  double theta_bar = 0.0;
  bool theta_exact = true;     // enumerated; false means column-norm upper bound
  double omega = 0.0;

  double dist_actual = 0.0;    // ||x_beta - u_hat||
  double dist_bound = 0.0;
  bool dist_applicable = false;

  double norm_actual = 0.0;    // ||x_beta||
  double norm_lo = 0.0;
  double norm_hi = 0.0;
  bool norm_applicable = false;  // beta' nonempty

  bool holds = false;          // every applicable inequality satisfied
};

BoundCheck verify_bounds(const TheoremInstance& ti, const Eigen::VectorXd& u_hat,
                         double lambda, const Eigen::VectorXd& x_star, double tol = 1e-7);

/// Distance-bound coefficient (2 lambda_beta_max - lambda) / (2 (lambda_beta_min - lambda)).
double distance_coefficient(double lambda, double lambda_beta_min, double lambda_beta_max);

}  // namespace miqcqp
