#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "miqcqp/instance.hpp"
#include "miqcqp/model.hpp"

namespace miqcqp {

enum class SolveGoal { ProveOptimal, FirstFeasible, BestWithinLimit };
enum class SolveStatus { Optimal, Feasible, Infeasible, TimeLimitNoSolution, Error };

const char* to_string(SolveGoal g);
const char* to_string(SolveStatus s);
SolveStatus solve_status_from_string(const std::string& s);

/// Cooperative cancellation, checked at node boundaries and inside long
/// continuous solves. Shareable across threads.
struct CancelToken {
  std::atomic<bool> flag{false};
  void cancel() { flag.store(true, std::memory_order_relaxed); }
  bool cancelled() const { return flag.load(std::memory_order_relaxed); }
};

struct SolveRequest {
  double time_limit_s = 10.0;
  SolveGoal goal = SolveGoal::ProveOptimal;
  std::vector<double> warm_start;  // full model vector; empty = none
  std::uint64_t seed = 0;
  long max_nodes = 200000;
  CancelToken* cancel = nullptr;
};

struct SolveResult {
  SolveStatus status = SolveStatus::Error;
  std::vector<double> x;  // present only for Optimal/Feasible
  double objective = std::numeric_limits<double>::infinity();
  double dual_bound = -std::numeric_limits<double>::infinity();
  double wall_time_s = 0.0;
  long nodes = 0;
  std::string message;

  bool has_solution() const {
    return status == SolveStatus::Optimal || status == SolveStatus::Feasible;
  }
};

/// Options of the first-order continuous engine (augmented Lagrangian outer
/// loop, projected gradient with Barzilai-Borwein steps inside).
struct ContinuousOptions {
  double kkt_tol = 1e-6;
  double feas_tol = 1e-7;
  int max_outer = 50;
  int max_inner = 700;
  double rho0 = 10.0;
  double rho_max = 1e10;
  std::chrono::steady_clock::time_point deadline =
      std::chrono::steady_clock::time_point::max();
  const CancelToken* cancel = nullptr;
};

struct ContinuousResult {
  std::vector<double> x;
  double objective = std::numeric_limits<double>::infinity();
  double kkt_residual = std::numeric_limits<double>::infinity();
  double max_violation = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

/// Minimizes the model over the box [lb, ub] ignoring integrality. Bounds may
/// tighten the model's own (used by branch-and-bound nodes).
ContinuousResult minimize_continuous(const ModelIR& model, std::span<const double> lb,
                                     std::span<const double> ub, std::span<const double> x0,
                                     const ContinuousOptions& opt = {});
ContinuousResult minimize_continuous(const ModelIR& model, std::span<const double> x0,
                                     const ContinuousOptions& opt = {});

/// Branch-and-bound for convex models: best-first, most-fractional branching
/// (ties by lowest index), node relaxations warm-started from the parent.
SolveResult solve_convex(const ModelIR& model, const SolveRequest& req);

/// Nonconvex models: depth-first enumeration of integer assignments without
/// bound pruning; leaves solved by multi-start local descent (relaxation
/// point, box center, seeded random). Only validated feasible incumbents are
/// accepted; exhaustion without one reports Infeasible (an enumeration-backed
/// judgment, not a certificate, since leaf solves are local).
SolveResult solve_nonconvex(const ModelIR& model, const SolveRequest& req);

/// Dispatch on the model's convexity tag, or through the external backend
/// when one is configured.
SolveResult solve_model(const ModelIR& model, const SolveRequest& req);

/// Routes every subsequent solve_model call through the subprocess adapter
/// running `command`. Set once at startup before any solves are in flight;
/// an empty command restores the internal backends.
void set_external_backend(std::string command);
const std::string& external_backend();

/// Local descent on the continuous block of an instance with every integer
/// variable pinned by `fixed` (index, value). Never returns a point worse
/// than a feasible start.
SolveResult solve_local_nlp(const MiqcqpInstance& inst,
                            const std::vector<std::pair<int, double>>& fixed,
                            std::span<const double> start, double time_limit_s);

/// Exhaustive reference: all integer assignments times a uniform grid on the
/// continuous boxes, best grid point polished by solve_local_nlp. Guards:
/// |I| <= 16, every integer range <= 8 values, n - |I| <= 3; nodes reports the
/// number of enumerated points.
SolveResult brute_force(const MiqcqpInstance& inst, int grid_points = 11);

/// Subprocess adapter: writes the model JSON, runs
///   command <model-file> <solution-file> <time-limit>
/// and parses/validates the solution file (status line, optional objective
/// line, name value pairs). Returned points are re-validated; violations
/// surface as Error.
SolveResult solve_external(const std::string& command, const ModelIR& model,
                           const SolveRequest& req);

}  // namespace miqcqp
