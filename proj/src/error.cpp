#include "hdev/error.hpp"

namespace hdev {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::BackwardTime: return "BackwardTime";
    case ErrorKind::EnergyBound: return "EnergyBound";
    case ErrorKind::NotNeighbor: return "NotNeighbor";
    case ErrorKind::InvalidTransition: return "InvalidTransition";
    case ErrorKind::EmptyHorizon: return "EmptyHorizon";
    case ErrorKind::DegenerateEnergyRange: return "DegenerateEnergyRange";
    case ErrorKind::UnknownLocation: return "UnknownLocation";
    case ErrorKind::UnknownNode: return "UnknownNode";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonConvergence: return "NonConvergence";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::UnknownLine: return "UnknownLine";
    case ErrorKind::LocationNotABus: return "LocationNotABus";
    case ErrorKind::BadTopL: return "BadTopL";
    case ErrorKind::InconsistentHorizon: return "InconsistentHorizon";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InconsistentTopology: return "InconsistentTopology";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ScenarioMismatch: return "ScenarioMismatch";
  }
  return "Unknown";
}

}  // namespace hdev
