#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "miqcqp/instance.hpp"

namespace miqcqp {

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& msg)
      : std::runtime_error("qplib:" + std::to_string(line) + ": " + msg), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Reads a QPLIB-format problem. Two-sided constraint rows are split into <=
/// rows, maximization objectives are negated (and flagged on the instance),
/// duplicate matrix entries are summed. Non-fatal adjustments (dropped free
/// rows, clamped infinite bounds) are reported through `warnings` when given.
MiqcqpInstance parse_qplib(std::istream& in, std::vector<std::string>* warnings = nullptr);
MiqcqpInstance parse_qplib_file(const std::string& path, std::vector<std::string>* warnings = nullptr);

/// Writes the instance back in QPLIB format; parse(write(inst)) reproduces
/// the instance structurally.
void write_qplib(const MiqcqpInstance& inst, std::ostream& out);
void write_qplib_file(const MiqcqpInstance& inst, const std::string& path);

nlohmann::ordered_json instance_to_json(const MiqcqpInstance& inst);

}  // namespace miqcqp
