#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "hdev/dense.hpp"

namespace hdev {

using BusId = int;

struct BusData {
  BusId id = 0;
  double pd_mw = 0.0;
  double qd_mvar = 0.0;
  double gs_mw = 0.0;    // shunt conductance at V = 1 pu
  double bs_mvar = 0.0;  // shunt susceptance at V = 1 pu
  bool avr = false;
  double vref = 1.0;  // AVR setpoint, or the nominal voltage penalized elsewhere
};

struct BranchData {
  BusId from = 0;
  BusId to = 0;
  double r = 0.0;
  double x = 0.0;
  double b = 0.0;         // total line charging
  double rate_mva = 0.0;  // 0 = unlimited
  double tap = 1.0;       // off-nominal ratio at the from end
};

struct GeneratorData {
  BusId bus = 0;
  double pg_mw = 0.0;  // scheduled output for power-flow solves
  double pmin_mw = 0.0;
  double pmax_mw = 0.0;
  double qmin_mvar = 0.0;
  double qmax_mvar = 0.0;
  // cost = c2 * P^2 + c1 * P + c0 with P in MW, $/h
  double c2 = 0.0;
  double c1 = 0.0;
  double c0 = 0.0;
};

// Branch in per unit with bus positions resolved.
struct Line {
  std::size_t from = 0;
  std::size_t to = 0;
  double g = 0.0;      // series conductance
  double b = 0.0;      // series susceptance
  double y_abs = 0.0;  // |g + jb|
  double b_charging = 0.0;
  double tap = 1.0;
  // Thermal limit on the series current, pu; infinity when unlimited.
  double i_max = std::numeric_limits<double>::infinity();
};

struct CaseData {
  double base_mva = 100.0;
  BusId slack = 0;
  double alpha_pq = 0.2;
  std::vector<BusData> buses;
  std::vector<BranchData> branches;
  std::vector<GeneratorData> generators;
};

// Validated grid model. Quantities are per unit on base_mva unless the field
// name says otherwise. The bus admittance matrix is stored densely (O(n^2)).
class GridCase {
 public:
  // Throws Error(SchemaError) for bad records and Error(InconsistentTopology)
  // for zero-impedance branches or a missing slack.
  explicit GridCase(CaseData data);

  const CaseData& data() const { return data_; }
  std::size_t bus_count() const { return data_.buses.size(); }
  std::size_t generator_count() const { return data_.generators.size(); }
  double base_mva() const { return data_.base_mva; }
  double alpha_pq() const { return data_.alpha_pq; }
  std::size_t slack() const { return slack_; }

  std::optional<std::size_t> bus_index(BusId id) const;
  const BusData& bus(std::size_t i) const { return data_.buses[i]; }
  const std::vector<Line>& lines() const { return lines_; }
  const GeneratorData& generator(std::size_t k) const { return data_.generators[k]; }
  // Bus position of each generator.
  std::size_t generator_bus(std::size_t k) const { return gen_bus_[k]; }

  // Buses with no branch path to the slack.
  const std::vector<BusId>& islanded_buses() const { return islanded_; }

  const DenseMatrix& g_matrix() const { return g_; }
  const DenseMatrix& b_matrix() const { return b_; }

  // Base demand, pu.
  std::vector<double> pd() const;
  std::vector<double> qd() const;
  // Scheduled generation summed per bus, pu.
  std::vector<double> pg_scheduled() const;

 private:
  CaseData data_;
  std::size_t slack_ = 0;
  std::vector<Line> lines_;
  std::vector<std::size_t> gen_bus_;
  std::vector<BusId> islanded_;
  DenseMatrix g_;
  DenseMatrix b_;
};

// Throws Error(InconsistentTopology) when any bus is islanded.
void require_connected(const GridCase& grid);

}  // namespace hdev
