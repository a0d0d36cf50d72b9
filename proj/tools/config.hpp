#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shapedyn/conformal.hpp"

namespace shapedyn::cli {

enum class ExperimentKind {
  ClassicalGeodesic,
  NewtonGauge,
  ConformalInvariance,
  QuantumEvolve,
  Equilibrium,
  GaugeInvariance,
  Potentials,
  ConditionalCheck,
  FiberCheck,
};

const char* to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(const std::string& name);
std::vector<std::string> kind_names();

enum class OutputFormat { Csv, JsonLines };

struct InitialData {
  std::string preset = "random";  // random | equilateral-triangle | explicit
  std::optional<Configuration> q;
  std::optional<Displacement> v;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::ClassicalGeodesic;
  std::uint64_t seed = 0;
  int dimension = 3;
  int particles = 3;
  std::optional<Eigen::VectorXd> masses;       // explicit masses
  std::pair<double, double> mass_range{1.0, 1.0};  // drawn from the seed when masses is absent
  ConformalFactorSpec conformal = ConformalFactorSpec::of(ConformalKind::B);
  InitialData initial;
  std::map<std::string, double> numerics;      // defaults filled in
  std::map<std::string, double> tolerances;    // defaults filled in
  OutputFormat format = OutputFormat::Csv;
  int stride = 1;

  double num(const std::string& key) const { return numerics.at(key); }
  int count(const std::string& key) const { return static_cast<int>(numerics.at(key)); }
  double tol(const std::string& key) const { return tolerances.at(key); }
};

/// Every problem found in the document, each naming the offending key.
std::vector<std::string> validate(const nlohmann::json& doc);

/// Parses a validated experiment object. Throws Error(ConfigInvalid) with the
/// joined diagnostics otherwise.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// The schema in one place: per kind, the numeric fields with their defaults
/// (NaN marks a required field) and the tolerances.
struct FieldSpec {
  std::string key;
  double fallback;
  bool integer;
  std::string help;
};
const std::vector<FieldSpec>& numeric_fields(ExperimentKind kind);
const std::vector<FieldSpec>& tolerance_fields(ExperimentKind kind);

}  // namespace shapedyn::cli
