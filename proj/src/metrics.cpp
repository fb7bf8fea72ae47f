#include "miqcqp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace miqcqp {

bool IncumbentTrace::record(double t, double objective) {
  if (!events.empty() && objective >= events.back().objective) return false;
  double stamp = std::max(t, 0.0);
  if (!events.empty() && stamp <= events.back().t) stamp = events.back().t + 1e-9;
  events.push_back({stamp, objective});
  horizon = std::max(horizon, stamp);
  return true;
}

double IncumbentTrace::best_objective() const {
  return events.empty() ? std::numeric_limits<double>::infinity() : events.back().objective;
}

double IncumbentTrace::first_time() const {
  return events.empty() ? horizon : events.front().t;
}

void IncumbentTrace::validate() const {
  for (size_t i = 0; i < events.size(); ++i) {
    if (events[i].t < 0.0 || events[i].t > horizon)
      throw std::invalid_argument("trace event outside [0, horizon]");
    if (i > 0 && events[i].t <= events[i - 1].t)
      throw std::invalid_argument("trace times not strictly increasing");
    if (i > 0 && events[i].objective >= events[i - 1].objective)
      throw std::invalid_argument("trace objectives not strictly improving");
  }
}

nlohmann::json IncumbentTrace::to_json() const {
  nlohmann::json evs = nlohmann::json::array();
  for (const auto& e : events) evs.push_back({{"t", e.t}, {"objective", e.objective}});
  return {{"events", evs}, {"horizon", horizon}};
}

IncumbentTrace IncumbentTrace::from_json(const nlohmann::json& j) {
  IncumbentTrace tr;
  tr.horizon = j.at("horizon").get<double>();
  for (const auto& e : j.at("events"))
    tr.events.push_back({e.at("t").get<double>(), e.at("objective").get<double>()});
  tr.validate();
  return tr;
}

IncumbentTrace merge_traces(const IncumbentTrace& a, const IncumbentTrace& b) {
  std::vector<TraceEvent> all;
  all.reserve(a.events.size() + b.events.size());
  all.insert(all.end(), a.events.begin(), a.events.end());
  all.insert(all.end(), b.events.begin(), b.events.end());
  std::sort(all.begin(), all.end(),
            [](const TraceEvent& x, const TraceEvent& y) { return x.t < y.t; });
  IncumbentTrace out;
  out.horizon = std::max(a.horizon, b.horizon);
  for (const auto& e : all) out.record(e.t, e.objective);
  out.horizon = std::max(out.horizon, std::max(a.horizon, b.horizon));
  return out;
}

double primal_gap(double v, double v_star) {
  if (v == 0.0 && v_star == 0.0) return 0.0;
  return std::abs(v - v_star) / std::max(std::abs(v), std::abs(v_star)) * 100.0;
}

double primal_integral(const IncumbentTrace& trace, double v_star) {
  const double T = trace.horizon;
  if (trace.events.empty()) return T;
  double pi = trace.events.front().t;  // implicit gap 1 before the first incumbent
  for (size_t i = 0; i < trace.events.size(); ++i) {
    double next_t = i + 1 < trace.events.size() ? trace.events[i + 1].t : T;
    double gap = primal_gap(trace.events[i].objective, v_star) / 100.0;
    pi += gap * std::max(0.0, next_t - trace.events[i].t);
  }
  return pi;
}

double shifted_geomean(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("shifted_geomean of an empty list");
  double mean_log = 0.0;
  for (double v : values) {
    if (v < 0.0) throw std::invalid_argument("shifted_geomean requires nonnegative values");
    mean_log += std::log1p(v);
  }
  mean_log /= static_cast<double>(values.size());
  return std::expm1(mean_log);
}

bool eps_gap_hit(double gap_percent) { return gap_percent / 100.0 < 1e-4; }

const char* to_string(Comparison c) {
  switch (c) {
    case Comparison::Same: return "Same";
    case Comparison::Better: return "Better";
    case Comparison::Worse: return "Worse";
    case Comparison::None: return "None";
  }
  return "?";
}

Comparison compare(double v1, double v2) {
  if (v1 == 0.0 && v2 == 0.0) return Comparison::Same;
  if (std::abs(v1 - v2) / std::max(std::abs(v1), std::abs(v2)) <= 1e-5)
    return Comparison::Same;
  return v1 < v2 ? Comparison::Better : Comparison::Worse;
}

nlohmann::json BenchRecord::to_json() const {
  nlohmann::json j;
  j["instance"] = instance;
  j["class"] = problem_class;
  j["found"] = found;
  auto put = [&](const char* key, const auto& opt) {
    if (opt.has_value())
      j[key] = *opt;
    else
      j[key] = nullptr;
  };
  put("objective", objective);
  put("best_known", best_known);
  put("gap_percent", gap_percent);
  put("eps_gap_hit", eps_hit);
  put("primal_integral", primal_integral_s);
  put("fft_s", fft_s);
  j["comparison"] = to_string(comparison);
  return j;
}

std::string bench_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  out.precision(12);
  out << "instance,class,found,objective,best_known,gap_percent,eps_gap_hit,"
         "primal_integral,fft_s,comparison\n";
  auto cell = [&](const auto& opt) -> std::string {
    if (!opt.has_value()) return "";
    std::ostringstream c;
    c.precision(12);
    c << *opt;
    return c.str();
  };
  for (const auto& r : records) {
    out << r.instance << ',' << r.problem_class << ',' << (r.found ? "true" : "false")
        << ',' << cell(r.objective) << ',' << cell(r.best_known) << ','
        << cell(r.gap_percent) << ',';
    if (r.eps_hit.has_value()) out << (*r.eps_hit ? "true" : "false");
    out << ',' << cell(r.primal_integral_s) << ',' << cell(r.fft_s) << ','
        << to_string(r.comparison) << '\n';
  }
  return out.str();
}

}  // namespace miqcqp
