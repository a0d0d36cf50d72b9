#pragma once

#include <stdexcept>
#include <string>

namespace shapedyn {

enum class ErrorKind {
  DimensionMismatch,
  InvalidArgument,
  CoincidentPair,
  DegenerateShape,
  SingularFactor,
  Singularity,
  NodeEncountered,
  ChartExit,
  OutOfChart,
  NonConvergence,
  InsufficientSamples,
  ZeroNorm,
  ConfigInvalid,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::CoincidentPair: return "CoincidentPair";
    case ErrorKind::DegenerateShape: return "DegenerateShape";
    case ErrorKind::SingularFactor: return "SingularFactor";
    case ErrorKind::Singularity: return "Singularity";
    case ErrorKind::NodeEncountered: return "NodeEncountered";
    case ErrorKind::ChartExit: return "ChartExit";
    case ErrorKind::OutOfChart: return "OutOfChart";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::ZeroNorm: return "ZeroNorm";
    case ErrorKind::ConfigInvalid: return "ConfigInvalid";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Integration stopped because the metric or potential blew up.
class SingularityError : public Error {
 public:
  SingularityError(double time, const std::string& message)
      : Error(ErrorKind::Singularity, message), time_(time) {}

  double time() const noexcept { return time_; }

 private:
  double time_;
};

}  // namespace shapedyn
