#pragma once

// JSON inputs (format_version "1") and CSV/JSON result bundles.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hdev/grid.hpp"
#include "hdev/scenario.hpp"
#include "hdev/transport.hpp"

namespace hdev::io {

inline constexpr std::string_view kFormatVersion = "1";

// Environment variable that replaces the directory relative input paths in a
// scenario are resolved against.
inline constexpr const char* kDataDirEnv = "HDEV_DATA_DIR";

std::string read_text(const std::filesystem::path& path);  // Error(IoError)

// 64-bit FNV-1a, lowercase hex.
std::string digest(std::string_view bytes);

// %.12g with negative zero folded to zero.
std::string format_number(double v);

// Grid cases. Loading validates records (SchemaError names the record) and
// rejects islanded buses (InconsistentTopology).
CaseData parse_case_data(std::string_view json_text);
CaseData load_case_data(const std::filesystem::path& path);
GridCase load_grid_case(const std::filesystem::path& path);
std::string case_data_to_json(const CaseData& data);

struct SolvedState {
  std::vector<double> v, theta, p, q;
};
std::optional<SolvedState> load_solved_state(const std::filesystem::path& path);

struct TransportFile {
  TransportGraph graph;
  std::map<LocationId, StationLimit> station_limits;
};
TransportFile parse_transport(std::string_view json_text);
TransportFile load_transport(const std::filesystem::path& path);
std::string transport_to_json(const TransportFile& t);

// Fleets reference buses, state-of-charge percentages and hours; these map to
// energy levels (nearest, ties up) and steps (nearest).
std::vector<FleetSpec> parse_fleets(std::string_view json_text, EnergyRange energy, double dt_hours);
std::vector<FleetSpec> load_fleets(const std::filesystem::path& path, EnergyRange energy, double dt_hours);
std::string fleets_to_json(const std::vector<FleetSpec>& fleets, EnergyRange energy, double dt_hours);

Scenario load_scenario(const std::filesystem::path& path);

// Digest of everything that defines the instance: grid, network, fleets,
// horizon, energy grid, penalty weight and top_l, cost weight and flags.
// Penalty kind and run mode are excluded so runs of one instance compare.
std::string scenario_digest(const Scenario& scenario, const std::vector<FleetSpec>& fleets);

struct VoltageRow {
  BusId bus = 0;
  double hour = 0.0;
  double v_pu = 0.0;
  double linear_v_pu = 0.0;
};

struct CongestionRow {
  LocationId bus = 0;
  double hour = 0.0;
  double vehicles_charging = 0.0;
  double x_mw = 0.0;
};

struct ArrivalRow {
  std::string fleet;
  LocationId bus = 0;
  double soc_percent = 0.0;
  double hour = 0.0;
  double vehicles = 0.0;
};

struct RouteRow {
  std::string fleet;
  LocationId from = 0;
  LocationId to = 0;
  double hour = 0.0;
  double vehicles = 0.0;
};

struct ResultsBundle {
  std::string scenario;
  std::string config_digest;
  std::string mode;
  std::string penalty;
  double penalty_weight = 0.0;
  std::size_t top_l = 0;
  std::uint64_t seed = 0;
  int steps = 0;
  double dt_hours = 1.0;
  std::vector<std::pair<std::string, double>> fleets;
  std::vector<VoltageRow> voltages;
  std::vector<CongestionRow> congestion;
  std::vector<ArrivalRow> arrivals;
  std::vector<RouteRow> routes;
  ObjectiveBreakdown objective;
  ViolationSummary violations;
  ScheduleChecks checks;
  std::vector<double> vref;  // per bus, in voltage-table bus order
};

ResultsBundle make_bundle(const RunResult& run);

// voltages.csv, congestion.csv, summary.json. Error(IoError).
void write_results(const ResultsBundle& bundle, const std::filesystem::path& dir);
// plot_data.csv in long format: series,bus,hour,value.
void write_plot_data(const ResultsBundle& bundle, const std::filesystem::path& dir);

std::string summary_json(const ResultsBundle& bundle);
std::string voltages_csv(const ResultsBundle& bundle);
std::string congestion_csv(const ResultsBundle& bundle);

// Reads a bundle written by write_results.
ResultsBundle read_results(const std::filesystem::path& dir);

struct BundleMetrics {
  std::size_t violations = 0;
  std::size_t buses_with_violation = 0;
  double worst_bus_deviation = 0.0;
  BusId worst_bus = 0;
  double sum_deviation = 0.0;
  double peak_congestion = 0.0;
  LocationId peak_station = 0;
  double generation_cost = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

BundleMetrics bundle_metrics(const ResultsBundle& bundle);

// Side-by-side report. Throws Error(ScenarioMismatch) when the digests differ.
std::string compare_report(const ResultsBundle& a, const ResultsBundle& b);

}  // namespace hdev::io
