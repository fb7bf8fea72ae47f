#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "miqcqp/instance.hpp"
#include "miqcqp/metrics.hpp"
#include "miqcqp/solver.hpp"
#include "miqcqp/spectral.hpp"

namespace miqcqp {

struct PumpConfig {
  double alpha = 0.5;
  /// 0 picks the per-algorithm default: 20 for the fixed-point pump, 10 for
  /// the projection pumps; the effective count is always positive.
  int max_iter = 0;
  double subproblem_time_limit_s = 10.0;
  double epsilon_improve = 1e-6;
  std::uint64_t seed = 0;
  ShiftRule shift_rule = ShiftRule::Safe;
};

enum class PumpTermination { Converged, MaxIter, TimeBudget, PeerWin };

const char* to_string(PumpTermination t);

struct PumpOutcome {
  std::optional<std::vector<double>> x_star;  // original coordinates, validated
  IncumbentTrace trace;
  int iterations = 0;
  PumpTermination terminated_by = PumpTermination::Converged;
  double objective = std::numeric_limits<double>::infinity();
};

enum class Propagation { Feasible, Infeasible, Unknown };

const char* to_string(Propagation p);

/// Interval propagation over the rows under the partial fix, iterated to a
/// fixpoint or 5 rounds. Infeasible and Feasible verdicts are sound; anything
/// uncertain is Unknown. Fixed values must lie within their bounds.
Propagation domain_propagate(const MiqcqpInstance& inst,
                             const std::vector<std::pair<int, double>>& fixes);

/// L_c: continuous variables inside the support of a matrix whose applied
/// shift under the rule is negative.
std::vector<int> continuous_perturbation_support(const MiqcqpInstance& inst, ShiftRule rule);

/// Relaxation solve plus per-variable floor/ceil flips minimizing the true
/// objective. Box-constrained problems only.
PumpOutcome random_flip(const MiqcqpInstance& inst, const PumpConfig& cfg);

/// Flips guided by domain propagation, then an l1 projection (a MILP) onto
/// the linearly constrained feasible set. Throws std::runtime_error when the
/// projection is proved infeasible (the instance itself has no feasible
/// point).
PumpOutcome random_flip_project(const MiqcqpInstance& inst, const PumpConfig& cfg);

/// Alternates flip-project rounds with the u-hat fixed-point update
/// u-hat_j := alpha u-hat_j + 2 (1 - alpha) x_j until the objective stops
/// improving by more than epsilon_improve.
PumpOutcome fixed_point_miqp(const MiqcqpInstance& inst, const PumpConfig& cfg,
                             double budget_s = std::numeric_limits<double>::infinity());

/// Alternates an l1 projection onto F(Approx(u-hat)) with an l1 projection
/// onto the original feasible set; failures relax or retarget u-hat.
PumpOutcome two_projection(const MiqcqpInstance& inst, const PumpConfig& cfg,
                           double budget_s, const CancelToken* peer = nullptr);

/// Alternates FPR1 (convex) with a locally solved FPR2 under fixed integers;
/// zero total slack on either side certifies feasibility.
PumpOutcome relaxing_projection(const MiqcqpInstance& inst, const PumpConfig& cfg,
                                double budget_s, const CancelToken* peer = nullptr);

/// Runs two_projection and relaxing_projection concurrently; the first pump
/// to finish with a solution signals the other, which stops at its next
/// subsolve boundary. Deterministic mode runs them sequentially (relaxing
/// projection first, half the budget each) for reproducible output.
PumpOutcome race_pumps(const MiqcqpInstance& inst, const PumpConfig& cfg, double budget_s,
                       bool deterministic = false);

/// Class-based routing: box-only problems use random_flip; linearly
/// constrained ones use the fixed-point pump when L_c is nonempty and
/// flip-project otherwise; quadratically constrained ones race the two
/// projection pumps.
PumpOutcome dispatch_pump(const MiqcqpInstance& inst, const PumpConfig& cfg, double budget_s,
                          bool deterministic = false);

}  // namespace miqcqp
