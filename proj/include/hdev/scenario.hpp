#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdev/coopt.hpp"

namespace hdev {

struct Scenario {
  std::string name;
  CaseData grid;
  TransportGraph transport;
  std::map<LocationId, StationLimit> station_limits;
  Horizon horizon;
  EnergyRange energy;
  double energy_step_kwh = 100.0;
  std::vector<FleetSpec> fleets;
  std::optional<FleetSamplerConfig> sampler;
  PenaltySpec penalty;
  double cost_weight = 1.0;
  bool enable_v2g = false;
  bool relinearize_per_step = false;
  std::uint64_t seed = 1;
  std::string digest;  // digest of the resolved configuration
};

enum class RunMode { Baseline, Coopt };

std::string_view run_mode_name(RunMode mode);

struct RunOptions {
  RunMode mode = RunMode::Coopt;
  std::optional<PenaltyKind> penalty;  // overrides the scenario
  std::optional<std::uint64_t> seed;   // overrides the scenario
  std::optional<bool> enable_v2g;
  std::optional<double> fleet_size;    // rescales every fleet to this size
  QpOptions qp;
};

struct RunResult {
  Scenario scenario;  // as run, after overrides and sampling
  RunMode mode = RunMode::Coopt;
  Schedule schedule;
  std::vector<FleetSpec> fleets;
  double seconds = 0.0;
};

// Baseline: every fleet follows baseline_schedule, then each step is
// dispatched with the induced station demand. Coopt: the joint program.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options);

}  // namespace hdev
