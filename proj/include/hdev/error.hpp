#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hdev {

enum class ErrorKind {
  // transport_graph
  BackwardTime,
  EnergyBound,
  NotNeighbor,
  InvalidTransition,
  EmptyHorizon,
  DegenerateEnergyRange,
  UnknownLocation,
  // fleet
  UnknownNode,
  Infeasible,
  // powerflow
  DimensionMismatch,
  NonConvergence,
  SingularJacobian,
  UnknownLine,
  // coopt
  LocationNotABus,
  BadTopL,
  InconsistentHorizon,
  SolverFailure,
  // qp
  NumericalBreakdown,
  // io
  SchemaError,
  InconsistentTopology,
  IoError,
  ScenarioMismatch,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace hdev
