#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "miqcqp/instance.hpp"
#include "miqcqp/metrics.hpp"
#include "miqcqp/model.hpp"
#include "miqcqp/solver.hpp"

namespace miqcqp {

/// Ordered, contiguous Hamming-distance windows used to split an LBC
/// neighborhood into independent subproblems.
struct PartitionScheme {
  std::vector<std::pair<int, int>> ranges = {{1, 7}, {8, 13}, {14, 17}, {18, 19}};

  /// Last k_hi, or 0 for an empty scheme.
  int k_total() const { return ranges.empty() ? 0 : ranges.back().second; }

  /// Throws std::invalid_argument unless the ranges are nonempty, start at 1,
  /// are contiguous (next k_lo = previous k_hi + 1) and have k_lo <= k_hi.
  void validate() const;

  /// Scheme restricted to at most `num_binaries` flips: ranges starting past
  /// the binary count are dropped and the last kept range is clipped.
  PartitionScheme clipped(int num_binaries) const;

  /// Each window wider than one value is split in two at its midpoint.
  PartitionScheme halved() const;
};

enum class LbMode { LBC, RLBC };

/// One node of the local-branching tree: the original model plus the
/// right-branch rows accumulated so far, and the incumbent the node
/// branches around.
struct BranchNode {
  ModelIR base_model;
  std::vector<double> incumbent;  // full model-space vector
  double objective = 0.0;
  int depth = 0;
  LbMode mode = LbMode::LBC;
};

struct LbOptions {
  PartitionScheme scheme;
  bool eager_cut = false;  // cancel sibling subproblems once one improves
  std::uint64_t seed = 0;
  double subproblem_cap_s = 30.0;
  double subproblem_floor_s = 5.0;
};

/// One submodel per scheme window: base_model plus both LBC rows for the
/// window, centered on x_bar. Windows beyond the binary count are clipped
/// or dropped. Throws std::invalid_argument when the model has no LBC
/// binaries or x_bar has the wrong size.
std::vector<ModelIR> partition_neighborhood(const PartitionScheme& scheme,
                                            const ModelIR& base_model,
                                            std::span<const double> x_bar);

/// Solves base_model restricted to range.first <= Delta(x, incumbent) <=
/// range.second with a best-within-limit goal. The node incumbent is passed
/// as a warm start only when it satisfies the window itself.
SolveResult solve_subproblem(const BranchNode& node, std::pair<int, int> range,
                             double time_limit_s, std::uint64_t seed = 0,
                             CancelToken* cancel = nullptr);

/// Parallel local branching around the feasible point x0. Per tree node up
/// to `workers` partition subproblems are solved concurrently; an improving
/// incumbent appends a right-branch row and descends, exhausted windows fall
/// back to one RLBC escape round, and the loop alternates until the budget
/// runs out. The trace starts at (0, f(x0)) and records every improvement.
/// When x_best is non-null it receives the final incumbent in original
/// coordinates.
IncumbentTrace run_parallel_lb(const MiqcqpInstance& inst, std::span<const double> x0,
                               double budget_s, int workers, const LbOptions& opt = {},
                               std::vector<double>* x_best = nullptr);

const char* to_string(LbMode m);

}  // namespace miqcqp
