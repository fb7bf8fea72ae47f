#pragma once

#include <span>
#include <vector>

#include "miqcqp/instance.hpp"
#include "miqcqp/model.hpp"

namespace miqcqp {

/// u-hat parameter of the approximation, one value per variable; entries at
/// integer indices are ignored. make_uhat clamps to [0, u_i].
struct UHat {
  std::vector<double> values;
};

UHat make_uhat(const MiqcqpInstance& inst, std::span<const double> raw);
UHat uhat_from_upper_bounds(const MiqcqpInstance& inst);

/// Binary expansion of one integral variable inside a model:
///   x_i = sum_h 2^h t_{ih} + offset.
struct BinaryExpansion {
  int source = -1;
  std::vector<int> bits;       // model variable indices, bit h at position h
  std::vector<double> weights; // 2^h
  double offset = 0.0;
};

/// Appends expansion bits and the linking equality for model variable i.
/// Requires integral bounds with ub > lb.
BinaryExpansion binary_expand(ModelIR& model, int i);

/// Appends H auxiliaries (h1 <= h2) with their RLT rows and an X_ii variable
/// defined by X = sum 2^{h1+h2} H (doubled weight off-diagonal). Returns the
/// X variable index.
int build_h_linearization(ModelIR& model, const BinaryExpansion& expansion);

/// Direct translation of the instance; convexity detected from eigenvalue
/// enclosures. With expand_generals, every non-binary integer variable gets a
/// binary expansion (needed by local branching distances).
ModelIR build_original(const MiqcqpInstance& inst, bool expand_generals = false);

/// Approx(u-hat): perturbed quadratics x^T (Q^k - shift_k I) x with the
/// compensating linear terms shift_k X_ii (integers) and shift_k u-hat_i x_i
/// (continuous), over the support of each Q^k. Requires a normalized instance
/// (all lower bounds zero) and shifts[k] <= 0 making every Q^k - shift_k I
/// positive semidefinite; entry 0 is the objective.
ModelIR build_approx(const NormalizedInstance& norm, const UHat& u_hat,
                     std::span<const double> shifts);

/// Approx with u-hat set to the continuous upper bounds (a relaxation).
ModelIR build_relaxation(const NormalizedInstance& norm, std::span<const double> shifts);

/// FPR1: min sum delta_i over continuous i, delta_i >= u-hat_i - x_i, subject
/// to the perturbed quadratic rows plus linear rows, bounds, integrality.
ModelIR build_fpr1(const NormalizedInstance& norm, const UHat& u_hat,
                   std::span<const double> shifts);

/// FPR2: min sum s_k with x^T Q^k x + a_k.x - s_k <= b_k, s_k >= 0.
ModelIR build_fpr2(const NormalizedInstance& norm);

/// Replaces the objective by min sum_{j in over} d_j with d_j >= |x_j - ref_j|.
ModelIR build_l1_projection(const ModelIR& region, std::span<const double> x_ref,
                            std::span<const int> over);

/// Appends k_lo <= Delta(x, x_bar) <= k_hi over the model's LBC binaries,
/// omitting a side at k_lo = 0 or k_hi = |B|.
ModelIR add_lbc(const ModelIR& model, std::span<const double> x_bar, int k_lo, int k_hi);

/// Appends Delta_r(x, x_bar) = |B| - Delta <= k.
ModelIR add_rlbc(const ModelIR& model, std::span<const double> x_bar, int k);

/// Copy with every integer/binary kind relaxed to continuous.
ModelIR relax_integrality(const ModelIR& model);

/// Completes an original-space point (integers integral) to the full model
/// variable vector: expansion bits, H products, X squares, slacks and l1
/// distances are all uniquely determined. `inst` must be the instance the
/// model was built from.
std::vector<double> lift_point(const ModelIR& model, const MiqcqpInstance& inst,
                               std::span<const double> x);

/// Local-branching distance Delta(x, x_bar) over the model's LBC binaries.
double lbc_distance(const ModelIR& model, std::span<const double> x,
                    std::span<const double> x_bar);
/// Reverse distance |B| - Delta.
double rlbc_distance(const ModelIR& model, std::span<const double> x,
                     std::span<const double> x_bar);

}  // namespace miqcqp
