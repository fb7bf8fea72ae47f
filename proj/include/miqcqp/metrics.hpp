#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace miqcqp {

struct TraceEvent {
  double t = 0.0;
  double objective = 0.0;

  bool operator==(const TraceEvent&) const = default;
};

/// Ordered incumbent history of one run: times strictly increase, objectives
/// strictly improve (minimization), every time lies within [0, horizon].
struct IncumbentTrace {
  std::vector<TraceEvent> events;
  double horizon = 0.0;

  /// Appends the event when it strictly improves on the current best; nudges
  /// the time forward when needed to keep times strictly increasing and
  /// extends the horizon to cover it. Returns true when recorded.
  bool record(double t, double objective);
  bool empty() const { return events.empty(); }
  double best_objective() const;  // +inf when empty
  double first_time() const;      // time of the first event; horizon when empty
  void validate() const;          // throws std::invalid_argument when broken

  nlohmann::json to_json() const;
  static IncumbentTrace from_json(const nlohmann::json& j);

  bool operator==(const IncumbentTrace&) const = default;
};

/// Union of two histories filtered back to a strictly improving trace; the
/// horizon is the larger of the two.
IncumbentTrace merge_traces(const IncumbentTrace& a, const IncumbentTrace& b);

/// |v - v_star| / max{|v|, |v_star|} * 100; both zero yields 0.
double primal_gap(double v, double v_star);

/// Time-weighted gap: the interval before the first incumbent counts with
/// gap 1, each later interval with that incumbent's fractional gap, out to
/// the trace horizon. An empty trace yields the horizon.
double primal_integral(const IncumbentTrace& trace, double v_star);

/// exp(mean(log(v + 1))) - 1; values must be >= 0 and the list nonempty.
double shifted_geomean(std::span<const double> values);

/// True when the fractional gap (percent / 100) is below 1e-4.
bool eps_gap_hit(double gap_percent);

enum class Comparison { Same, Better, Worse, None };

const char* to_string(Comparison c);

/// Minimization sense: Same when the relative difference is within 1e-5,
/// otherwise Better iff v1 < v2. None is never returned here; callers use it
/// when one side has no value.
Comparison compare(double v1, double v2);

/// One benchmark row. Optional fields stay empty when no best-known value is
/// available; with a best-known value but no solution, the no-solution
/// convention applies (gap 100, primal integral = horizon).
struct BenchRecord {
  std::string instance;
  std::string problem_class;
  bool found = false;
  std::optional<double> objective;
  std::optional<double> best_known;
  std::optional<double> gap_percent;
  std::optional<bool> eps_hit;
  std::optional<double> primal_integral_s;
  std::optional<double> fft_s;  // time of the first feasible solution
  Comparison comparison = Comparison::None;

  nlohmann::json to_json() const;
};

/// CSV table (with header) in the column order documented in the README.
std::string bench_csv(const std::vector<BenchRecord>& records);

}  // namespace miqcqp
