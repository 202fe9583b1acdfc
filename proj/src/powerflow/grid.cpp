#include "hdev/grid.hpp"

#include <cmath>
#include <complex>
#include <map>
#include <string>

#include "hdev/error.hpp"

namespace hdev {

GridCase::GridCase(CaseData data) : data_(std::move(data)) {
  const std::size_t n = data_.buses.size();
  if (n == 0) throw Error(ErrorKind::SchemaError, "case has no buses");
  if (!(data_.base_mva > 0.0)) throw Error(ErrorKind::SchemaError, "baseMVA must be positive");
  if (!(data_.alpha_pq >= 0.0)) throw Error(ErrorKind::SchemaError, "alpha_pq must be nonnegative");

  std::map<BusId, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) {
    const BusData& b = data_.buses[i];
    if (!index.emplace(b.id, i).second) {
      throw Error(ErrorKind::SchemaError, "bus " + std::to_string(b.id) + " declared twice");
    }
    if (!(b.vref > 0.0)) throw Error(ErrorKind::SchemaError, "bus " + std::to_string(b.id) + ": vref must be positive");
  }
  auto it = index.find(data_.slack);
  if (it == index.end()) throw Error(ErrorKind::InconsistentTopology, "slack bus is not a bus");
  slack_ = it->second;

  g_ = DenseMatrix(n, n);
  b_ = DenseMatrix(n, n);
  std::vector<std::vector<std::size_t>> adjacency(n);
  for (std::size_t k = 0; k < data_.branches.size(); ++k) {
    const BranchData& br = data_.branches[k];
    const std::string name = "branch " + std::to_string(k) + " (" + std::to_string(br.from) +
                             "-" + std::to_string(br.to) + ")";
    auto f = index.find(br.from);
    auto t = index.find(br.to);
    if (f == index.end() || t == index.end()) {
      throw Error(ErrorKind::SchemaError, name + " references an unknown bus");
    }
    if (f->second == t->second) throw Error(ErrorKind::SchemaError, name + " is a self loop");
    if (br.r == 0.0 && br.x == 0.0) {
      throw Error(ErrorKind::InconsistentTopology, name + " has zero impedance");
    }
    if (!(br.tap > 0.0)) throw Error(ErrorKind::SchemaError, name + " has a non-positive tap");
    if (br.rate_mva < 0.0) throw Error(ErrorKind::SchemaError, name + " has a negative rating");

    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> half_charging(0.0, br.b / 2.0);
    const std::complex<double> yff = (y + half_charging) / (br.tap * br.tap);
    const std::complex<double> ytt = y + half_charging;
    const std::complex<double> yft = -y / br.tap;
    const std::size_t i = f->second, j = t->second;
    g_(i, i) += yff.real();
    b_(i, i) += yff.imag();
    g_(j, j) += ytt.real();
    b_(j, j) += ytt.imag();
    g_(i, j) += yft.real();
    b_(i, j) += yft.imag();
    g_(j, i) += yft.real();
    b_(j, i) += yft.imag();
    adjacency[i].push_back(j);
    adjacency[j].push_back(i);

    Line line;
    line.from = i;
    line.to = j;
    line.g = y.real();
    line.b = y.imag();
    line.y_abs = std::abs(y);
    line.b_charging = br.b;
    line.tap = br.tap;
    if (br.rate_mva > 0.0) line.i_max = br.rate_mva / data_.base_mva;
    lines_.push_back(line);
  }
  for (std::size_t i = 0; i < n; ++i) {
    g_(i, i) += data_.buses[i].gs_mw / data_.base_mva;
    b_(i, i) += data_.buses[i].bs_mvar / data_.base_mva;
  }

  std::vector<bool> seen(n, false);
  std::vector<std::size_t> stack{slack_};
  seen[slack_] = true;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adjacency[u]) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen[i]) islanded_.push_back(data_.buses[i].id);
  }

  for (std::size_t k = 0; k < data_.generators.size(); ++k) {
    const GeneratorData& gen = data_.generators[k];
    const std::string name = "generator " + std::to_string(k) + " at bus " + std::to_string(gen.bus);
    auto b = index.find(gen.bus);
    if (b == index.end()) throw Error(ErrorKind::SchemaError, name + " references an unknown bus");
    if (gen.pmin_mw > gen.pmax_mw) throw Error(ErrorKind::SchemaError, name + ": Pmin > Pmax");
    if (gen.qmin_mvar > gen.qmax_mvar) throw Error(ErrorKind::SchemaError, name + ": Qmin > Qmax");
    if (gen.c2 < 0.0) throw Error(ErrorKind::SchemaError, name + ": negative quadratic cost");
    gen_bus_.push_back(b->second);
  }
}

void require_connected(const GridCase& grid) {
  if (!grid.islanded_buses().empty()) {
    throw Error(ErrorKind::InconsistentTopology,
                "bus " + std::to_string(grid.islanded_buses().front()) + " is islanded");
  }
}

std::optional<std::size_t> GridCase::bus_index(BusId id) const {
  for (std::size_t i = 0; i < data_.buses.size(); ++i) {
    if (data_.buses[i].id == id) return i;
  }
  return std::nullopt;
}

std::vector<double> GridCase::pd() const {
  std::vector<double> out;
  for (const BusData& b : data_.buses) out.push_back(b.pd_mw / data_.base_mva);
  return out;
}

std::vector<double> GridCase::qd() const {
  std::vector<double> out;
  for (const BusData& b : data_.buses) out.push_back(b.qd_mvar / data_.base_mva);
  return out;
}

std::vector<double> GridCase::pg_scheduled() const {
  std::vector<double> out(bus_count(), 0.0);
  for (std::size_t k = 0; k < generator_count(); ++k) {
    out[gen_bus_[k]] += data_.generators[k].pg_mw / data_.base_mva;
  }
  return out;
}

}  // namespace hdev
