// Solves a ModelIR JSON file and writes the solution-file format consumed by
// solve_external: a status line, an objective line, then one "name value"
// line per variable.

#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "miqcqp/model.hpp"
#include "miqcqp/solver.hpp"

int main(int argc, char** argv) {
  if (argc != 4) {
    std::cerr << "usage: model_solve <model.json> <solution.txt> <time-limit-s>\n";
    return 1;
  }
  try {
    std::ifstream in(argv[1]);
    if (!in.good()) throw std::runtime_error(std::string("cannot open ") + argv[1]);
    nlohmann::json j = nlohmann::json::parse(in);
    miqcqp::ModelIR model = miqcqp::ModelIR::from_json(j);

    miqcqp::SolveRequest req;
    req.time_limit_s = std::stod(argv[3]);
    req.goal = miqcqp::SolveGoal::BestWithinLimit;
    miqcqp::SolveResult res = miqcqp::solve_model(model, req);

    std::ofstream out(argv[2]);
    out.precision(17);
    out << miqcqp::to_string(res.status) << "\n";
    if (res.has_solution()) {
      out << "objective " << res.objective << "\n";
      for (int i = 0; i < model.n_vars(); ++i)
        out << model.vars[i].name << " " << res.x[i] << "\n";
    }
    if (!out.good()) throw std::runtime_error("could not write solution file");
  } catch (const std::exception& e) {
    std::cerr << "model_solve: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
