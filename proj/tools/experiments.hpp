#pragma once

#include <filesystem>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "config.hpp"

namespace shapedyn::cli {

/// One declared tolerance: passes when lower <= value <= upper (NaN fails).
struct Check {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool passed() const { return value >= lower && value <= upper; }
};

using Cell = std::variant<double, long long, std::string>;

struct Table {
  std::string name;  // file stem
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

struct RunResult {
  ExperimentKind kind = ExperimentKind::ClassicalGeodesic;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  std::vector<std::pair<std::string, double>> info;  // reported, not checked
  std::vector<Table> tables;

  bool passed() const;
};

/// Runs the pipeline named by config.kind. Library errors propagate.
RunResult run_experiment(const ExperimentConfig& config);

/// Shortest decimal that reads back to the same double.
std::string format_double(double x);

/// key=value pairs of every check and info entry on one line.
std::string summary_line(const RunResult& result);

/// Writes every table (CSV or JSON lines) and summary.json into dir.
void write_outputs(const RunResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);

}  // namespace shapedyn::cli
