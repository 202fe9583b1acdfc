#include "hdev/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hdev/error.hpp"
#include "json.hpp"

namespace hdev::io {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  throw Error(ErrorKind::SchemaError, where + ": " + what);
}

json parse_json(std::string_view text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    schema(where, std::string("invalid JSON (") + e.what() + ")");
  }
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema(where, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) schema(where, std::string("missing field '") + key + "'");
  return *it;
}

double number(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number()) schema(where, std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema(where, std::string("field '") + key + "' must be finite");
  return d;
}

double number_or(const json& obj, const char* key, double fallback, const std::string& where) {
  return obj.contains(key) ? number(obj, key, where) : fallback;
}

int integer(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer()) schema(where, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

bool boolean_or(const json& obj, const char* key, bool fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) schema(where, std::string("field '") + key + "' must be true or false");
  return v.get<bool>();
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) schema(where, std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

const json& array(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array()) schema(where, std::string("field '") + key + "' must be an array");
  return v;
}

void check_version(const json& doc, const std::string& where) {
  const std::string v = string_field(doc, "format_version", where);
  if (v != kFormatVersion) schema(where, "unsupported format_version '" + v + "'");
}

// Rounds to 12 significant digits so serialized output is stable.
double round12(double v) {
  if (v == 0.0 || !std::isfinite(v)) return v == 0.0 ? 0.0 : v;
  return std::strtod(format_number(v).c_str(), nullptr);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::IoError, "failed writing " + path.string());
}

fs::path resolve(const fs::path& base, const std::string& rel) {
  fs::path p(rel);
  if (p.is_absolute()) return p;
  if (const char* env = std::getenv(kDataDirEnv); env && *env) return fs::path(env) / p;
  return base / p;
}

}  // namespace

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string digest(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

// ---- grid ------------------------------------------------------------------

CaseData parse_case_data(std::string_view text) {
  const json doc = parse_json(text, "grid case");
  check_version(doc, "grid case");
  CaseData c;
  c.base_mva = number(doc, "baseMVA", "grid case");
  c.slack = integer(doc, "slack", "grid case");
  c.alpha_pq = number_or(doc, "alpha_pq", 0.2, "grid case");
  const json& buses = array(doc, "buses", "grid case");
  for (std::size_t k = 0; k < buses.size(); ++k) {
    const std::string where = "bus record " + std::to_string(k);
    const json& b = buses[k];
    BusData bus;
    bus.id = integer(b, "id", where);
    bus.pd_mw = number_or(b, "pd_mw", 0.0, where);
    bus.qd_mvar = number_or(b, "qd_mvar", 0.0, where);
    bus.gs_mw = number_or(b, "gs_mw", 0.0, where);
    bus.bs_mvar = number_or(b, "bs_mvar", 0.0, where);
    bus.avr = boolean_or(b, "avr", false, where);
    bus.vref = number_or(b, "vref", 1.0, where);
    c.buses.push_back(bus);
  }
  const json& branches = array(doc, "branches", "grid case");
  for (std::size_t k = 0; k < branches.size(); ++k) {
    const std::string where = "branch record " + std::to_string(k);
    const json& b = branches[k];
    BranchData br;
    br.from = integer(b, "from", where);
    br.to = integer(b, "to", where);
    br.r = number(b, "r", where);
    br.x = number(b, "x", where);
    br.b = number_or(b, "b", 0.0, where);
    br.rate_mva = number_or(b, "rate_mva", 0.0, where);
    br.tap = number_or(b, "tap", 1.0, where);
    if (br.r < 0.0) schema(where, "negative resistance");
    c.branches.push_back(br);
  }
  const json& gens = array(doc, "generators", "grid case");
  for (std::size_t k = 0; k < gens.size(); ++k) {
    const std::string where = "generator record " + std::to_string(k);
    const json& g = gens[k];
    GeneratorData gen;
    gen.bus = integer(g, "bus", where);
    gen.pg_mw = number_or(g, "pg_mw", 0.0, where);
    gen.pmin_mw = number(g, "pmin_mw", where);
    gen.pmax_mw = number(g, "pmax_mw", where);
    gen.qmin_mvar = number(g, "qmin_mvar", where);
    gen.qmax_mvar = number(g, "qmax_mvar", where);
    const json& cost = array(g, "cost", where);
    if (cost.size() != 3) schema(where, "cost must list [c2, c1, c0]");
    for (const json& v : cost) {
      if (!v.is_number()) schema(where, "cost entries must be numbers");
    }
    gen.c2 = cost[0].get<double>();
    gen.c1 = cost[1].get<double>();
    gen.c0 = cost[2].get<double>();
    c.generators.push_back(gen);
  }
  return c;
}

CaseData load_case_data(const fs::path& path) { return parse_case_data(read_text(path)); }

GridCase load_grid_case(const fs::path& path) {
  GridCase grid(load_case_data(path));
  require_connected(grid);
  return grid;
}

std::string case_data_to_json(const CaseData& c) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["baseMVA"] = c.base_mva;
  doc["slack"] = c.slack;
  doc["alpha_pq"] = c.alpha_pq;
  doc["buses"] = json::array();
  for (const BusData& b : c.buses) {
    doc["buses"].push_back({{"id", b.id}, {"pd_mw", b.pd_mw}, {"qd_mvar", b.qd_mvar}, {"gs_mw", b.gs_mw},
                            {"bs_mvar", b.bs_mvar}, {"avr", b.avr}, {"vref", b.vref}});
  }
  doc["branches"] = json::array();
  for (const BranchData& b : c.branches) {
    doc["branches"].push_back({{"from", b.from}, {"to", b.to}, {"r", b.r}, {"x", b.x}, {"b", b.b},
                               {"rate_mva", b.rate_mva}, {"tap", b.tap}});
  }
  doc["generators"] = json::array();
  for (const GeneratorData& g : c.generators) {
    doc["generators"].push_back({{"bus", g.bus}, {"pg_mw", g.pg_mw}, {"pmin_mw", g.pmin_mw},
                                 {"pmax_mw", g.pmax_mw}, {"qmin_mvar", g.qmin_mvar},
                                 {"qmax_mvar", g.qmax_mvar}, {"cost", {g.c2, g.c1, g.c0}}});
  }
  return doc.dump(1) + "\n";
}

std::optional<SolvedState> load_solved_state(const fs::path& path) {
  const json doc = parse_json(read_text(path), "grid case");
  if (!doc.contains("solved_state")) return std::nullopt;
  const json& s = doc.at("solved_state");
  SolvedState out;
  auto vec = [&](const char* key, std::vector<double>& dst) {
    for (const json& v : array(s, key, "solved_state")) {
      if (!v.is_number()) schema("solved_state", std::string(key) + " entries must be numbers");
      dst.push_back(v.get<double>());
    }
  };
  vec("v_pu", out.v);
  vec("theta_rad", out.theta);
  vec("p_pu", out.p);
  vec("q_pu", out.q);
  return out;
}

// ---- transport -------------------------------------------------------------

TransportFile parse_transport(std::string_view text) {
  const json doc = parse_json(text, "transport network");
  check_version(doc, "transport network");
  std::vector<LocationId> locations;
  for (const json& v : array(doc, "locations", "transport network")) {
    if (!v.is_number_integer()) schema("transport network", "location ids must be integers");
    locations.push_back(v.get<int>());
  }
  std::vector<Road> roads;
  const json& rs = array(doc, "roads", "transport network");
  for (std::size_t k = 0; k < rs.size(); ++k) {
    const std::string where = "road record " + std::to_string(k);
    roads.push_back({integer(rs[k], "from", where), integer(rs[k], "to", where),
                     integer(rs[k], "travel_steps", where), number(rs[k], "km", where)});
  }
  TransportFile out;
  std::vector<LocationId> stations;
  if (doc.contains("stations")) {
    const json& ss = array(doc, "stations", "transport network");
    for (std::size_t k = 0; k < ss.size(); ++k) {
      const std::string where = "station record " + std::to_string(k);
      const LocationId loc = integer(ss[k], "location", where);
      StationLimit lim;
      lim.min_mw = number_or(ss[k], "min_mw", 0.0, where);
      lim.max_mw = number_or(ss[k], "max_mw", std::numeric_limits<double>::infinity(), where);
      if (lim.min_mw > lim.max_mw) schema(where, "min_mw exceeds max_mw");
      if (std::find(stations.begin(), stations.end(), loc) != stations.end()) {
        schema(where, "duplicate station " + std::to_string(loc));
      }
      stations.push_back(loc);
      if (ss[k].contains("min_mw") || ss[k].contains("max_mw")) out.station_limits[loc] = lim;
    }
    if (stations.empty()) schema("transport network", "stations list is empty");
  }
  out.graph = TransportGraph(locations, roads, stations);
  return out;
}

TransportFile load_transport(const fs::path& path) { return parse_transport(read_text(path)); }

std::string transport_to_json(const TransportFile& t) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["locations"] = std::vector<int>(t.graph.locations().begin(), t.graph.locations().end());
  doc["roads"] = json::array();
  for (const Road& r : t.graph.roads()) {
    doc["roads"].push_back({{"from", r.from}, {"to", r.to}, {"travel_steps", r.travel_steps}, {"km", r.km}});
  }
  doc["stations"] = json::array();
  for (LocationId s : t.graph.stations()) {
    json entry{{"location", s}};
    if (auto it = t.station_limits.find(s); it != t.station_limits.end()) {
      entry["min_mw"] = it->second.min_mw;
      if (std::isfinite(it->second.max_mw)) entry["max_mw"] = it->second.max_mw;
    }
    doc["stations"].push_back(entry);
  }
  return doc.dump(1) + "\n";
}

// ---- fleets ----------------------------------------------------------------

std::vector<FleetSpec> parse_fleets(std::string_view text, EnergyRange energy, double dt_hours) {
  const json doc = parse_json(text, "fleet file");
  check_version(doc, "fleet file");
  std::vector<FleetSpec> out;
  const json& fleets = array(doc, "fleets", "fleet file");
  for (std::size_t k = 0; k < fleets.size(); ++k) {
    const std::string where = "fleet record " + std::to_string(k);
    const json& f = fleets[k];
    FleetSpec spec;
    spec.id = string_field(f, "id", where);
    spec.size = number(f, "size", where);
    if (spec.size < 0.0) schema(where, "size must be nonnegative");
    auto entries = [&](const char* key, std::map<ExpandedNode, double>& dst) {
      const json& list = array(f, key, where);
      for (std::size_t j = 0; j < list.size(); ++j) {
        const std::string w = where + " " + key + "[" + std::to_string(j) + "]";
        const double soc = number(list[j], "soc_percent", w);
        const double hour = number(list[j], "hour", w);
        const double count = number(list[j], "count", w);
        if (soc < 0.0 || soc > 100.0) schema(w, "soc_percent outside [0, 100]");
        if (hour < 0.0) schema(w, "negative hour");
        if (count < 0.0) schema(w, "negative count");
        const ExpandedNode node{integer(list[j], "bus", w), soc_percent_to_level(soc, energy),
                                hour_to_step(hour, dt_hours)};
        dst[node] += count;
      }
    };
    entries("inject", spec.criteria.injections);
    entries("withdraw", spec.criteria.withdrawals);
    validate_fleet(spec);
    out.push_back(std::move(spec));
  }
  return out;
}

std::vector<FleetSpec> load_fleets(const fs::path& path, EnergyRange energy, double dt_hours) {
  return parse_fleets(read_text(path), energy, dt_hours);
}

std::string fleets_to_json(const std::vector<FleetSpec>& fleets, EnergyRange energy, double dt_hours) {
  const double span = static_cast<double>(energy.max - energy.min);
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["fleets"] = json::array();
  for (const FleetSpec& f : fleets) {
    auto entries = [&](const std::map<ExpandedNode, double>& src) {
      json list = json::array();
      for (const auto& [node, count] : src) {
        list.push_back({{"bus", node.location},
                        {"soc_percent", round12(100.0 * (node.energy - energy.min) / span)},
                        {"hour", round12(node.time * dt_hours)},
                        {"count", count}});
      }
      return list;
    };
    doc["fleets"].push_back({{"id", f.id}, {"size", f.size}, {"inject", entries(f.criteria.injections)},
                             {"withdraw", entries(f.criteria.withdrawals)}});
  }
  return doc.dump(1) + "\n";
}

// ---- scenario --------------------------------------------------------------

Scenario load_scenario(const fs::path& path) {
  const json doc = parse_json(read_text(path), "scenario");
  check_version(doc, "scenario");
  const fs::path base = path.parent_path();
  Scenario sc;
  sc.name = string_field(doc, "name", "scenario");
  const json& horizon = field(doc, "horizon", "scenario");
  sc.horizon.steps = integer(horizon, "steps", "scenario horizon");
  sc.horizon.dt_hours = number(horizon, "dt_hours", "scenario horizon");
  const json& energy = field(doc, "energy", "scenario");
  const int levels = integer(energy, "levels", "scenario energy");
  if (levels < 2) schema("scenario energy", "levels must be at least 2");
  sc.energy = {0, levels - 1};
  sc.energy_step_kwh = number(energy, "step_kwh", "scenario energy");

  sc.grid = load_case_data(resolve(base, string_field(doc, "grid", "scenario")));
  TransportFile tf = load_transport(resolve(base, string_field(doc, "transport", "scenario")));
  sc.transport = std::move(tf.graph);
  sc.station_limits = std::move(tf.station_limits);
  if (doc.contains("fleets")) {
    sc.fleets = load_fleets(resolve(base, string_field(doc, "fleets", "scenario")), sc.energy,
                            sc.horizon.dt_hours);
  }

  if (doc.contains("penalty")) {
    const json& p = doc.at("penalty");
    const std::string kind = string_field(p, "kind", "scenario penalty");
    auto parsed = parse_penalty_kind(kind);
    if (!parsed) schema("scenario penalty", "unknown kind '" + kind + "'");
    sc.penalty.kind = *parsed;
    sc.penalty.weight = number(p, "weight", "scenario penalty");
    if (sc.penalty.weight < 0.0) schema("scenario penalty", "weight must be nonnegative");
    if (p.contains("top_l")) {
      const int top = integer(p, "top_l", "scenario penalty");
      if (top < 0) schema("scenario penalty", "top_l must be positive");
      sc.penalty.top_l = static_cast<std::size_t>(top);
    }
    if (p.contains("vref")) {
      for (const json& v : array(p, "vref", "scenario penalty")) {
        if (!v.is_number()) schema("scenario penalty", "vref entries must be numbers");
        sc.penalty.vref.push_back(v.get<double>());
      }
    }
  }
  sc.cost_weight = number_or(doc, "cost_weight", 1.0, "scenario");
  if (doc.contains("flags")) {
    const json& f = doc.at("flags");
    sc.enable_v2g = boolean_or(f, "enable_v2g", false, "scenario flags");
    sc.relinearize_per_step = boolean_or(f, "relinearize_per_step", false, "scenario flags");
  }
  if (doc.contains("seed")) {
    const json& s = doc.at("seed");
    if (!s.is_number_unsigned()) schema("scenario", "seed must be a nonnegative integer");
    sc.seed = s.get<std::uint64_t>();
  }
  if (doc.contains("sampler")) {
    const json& s = doc.at("sampler");
    const std::string w = "scenario sampler";
    FleetSamplerConfig cfg;
    cfg.fleets = integer(s, "fleets", w);
    cfg.size = number(s, "size", w);
    cfg.earliest_start_step = hour_to_step(number(s, "earliest_start_hour", w), sc.horizon.dt_hours);
    cfg.latest_start_step = hour_to_step(number(s, "latest_start_hour", w), sc.horizon.dt_hours);
    cfg.min_trip_steps = hour_to_step(number(s, "min_trip_hours", w), sc.horizon.dt_hours);
    cfg.max_trip_steps = hour_to_step(number(s, "max_trip_hours", w), sc.horizon.dt_hours);
    cfg.min_start_level = soc_percent_to_level(number(s, "min_start_soc_percent", w), sc.energy);
    cfg.max_start_level = soc_percent_to_level(number(s, "max_start_soc_percent", w), sc.energy);
    cfg.min_end_level = soc_percent_to_level(number(s, "min_end_soc_percent", w), sc.energy);
    cfg.max_end_level = soc_percent_to_level(number(s, "max_end_soc_percent", w), sc.energy);
    sc.sampler = cfg;
  }
  sc.digest = scenario_digest(sc, sc.fleets);
  return sc;
}

std::string scenario_digest(const Scenario& sc, const std::vector<FleetSpec>& fleets) {
  std::string text = case_data_to_json(sc.grid);
  text += transport_to_json({sc.transport, sc.station_limits});
  text += fleets_to_json(fleets, sc.energy, sc.horizon.dt_hours);
  json rest{{"steps", sc.horizon.steps},
            {"dt_hours", sc.horizon.dt_hours},
            {"levels", sc.energy.count()},
            {"step_kwh", sc.energy_step_kwh},
            {"weight", sc.penalty.weight},
            {"top_l", sc.penalty.top_l},
            {"vref", sc.penalty.vref},
            {"cost_weight", sc.cost_weight},
            {"enable_v2g", sc.enable_v2g},
            {"relinearize_per_step", sc.relinearize_per_step},
            {"seed", sc.seed}};
  text += rest.dump();
  return digest(text);
}

// ---- results ---------------------------------------------------------------

ResultsBundle make_bundle(const RunResult& run) {
  const Scenario& sc = run.scenario;
  const Schedule& s = run.schedule;
  ResultsBundle b;
  b.scenario = sc.name;
  b.config_digest = scenario_digest(sc, run.fleets);
  b.mode = std::string(run_mode_name(run.mode));
  b.penalty = std::string(penalty_kind_name(sc.penalty.kind));
  b.penalty_weight = sc.penalty.weight;
  b.top_l = sc.penalty.top_l == 0 ? sc.grid.buses.size() : sc.penalty.top_l;
  b.seed = sc.seed;
  b.steps = s.steps;
  b.dt_hours = s.dt_hours;
  for (const FleetSpec& f : run.fleets) b.fleets.emplace_back(f.id, f.size);

  const GridCase grid(sc.grid);
  b.vref = sc.penalty.vref.empty() ? default_vref(grid) : sc.penalty.vref;
  for (std::size_t i = 0; i < s.bus_ids.size(); ++i) {
    for (int t = 0; t < s.steps; ++t) {
      const StepResult& st = s.per_step[static_cast<std::size_t>(t)];
      b.voltages.push_back({s.bus_ids[i], t * s.dt_hours, st.v[i], st.v_linear[i]});
    }
  }
  for (std::size_t k = 0; k < s.stations.size(); ++k) {
    for (int t = 0; t < s.steps; ++t) {
      const StepResult& st = s.per_step[static_cast<std::size_t>(t)];
      auto snap = [](double v) { return std::abs(v) < 1e-9 ? 0.0 : v; };
      b.congestion.push_back({s.stations[k], t * s.dt_hours, snap(st.vehicles_charging[k]), snap(st.x_mw[k])});
    }
  }
  const ExpandedGraph g = build_expanded_graph(sc.transport, sc.energy, sc.horizon, sc.energy_step_kwh);
  const double span = static_cast<double>(sc.energy.max - sc.energy.min);
  for (std::size_t h = 0; h < run.fleets.size() && h < s.flows.departures.size(); ++h) {
    for (const auto& [node, v] : s.flows.departures[h]) {
      if (v <= 1e-6) continue;
      b.arrivals.push_back({run.fleets[h].id, node.location, 100.0 * (node.energy - sc.energy.min) / span,
                            node.time * s.dt_hours, v});
    }
    std::map<std::pair<int, std::pair<LocationId, LocationId>>, double> legs;
    for (ArcId a = 0; a < g.arcs().size(); ++a) {
      const Arc& arc = g.arcs()[a];
      const double v = s.flows.lambda[h][a];
      if (arc.kind != ArcKind::Driving || v <= 1e-6) continue;
      legs[{arc.tail.time, {arc.tail.location, arc.head.location}}] += v;
    }
    for (const auto& [key, v] : legs) {
      b.routes.push_back({run.fleets[h].id, key.second.first, key.second.second, key.first * s.dt_hours, v});
    }
  }
  b.objective = s.objective;
  b.violations = s.violations;
  b.checks = s.checks;
  return b;
}

std::string voltages_csv(const ResultsBundle& b) {
  std::string out = "bus,hour,v_pu,linear_v_pu\n";
  for (const VoltageRow& r : b.voltages) {
    out += std::to_string(r.bus) + "," + format_number(r.hour) + "," + format_number(r.v_pu) + "," +
           format_number(r.linear_v_pu) + "\n";
  }
  return out;
}

std::string congestion_csv(const ResultsBundle& b) {
  std::string out = "bus,hour,vehicles_charging,x_mw\n";
  for (const CongestionRow& r : b.congestion) {
    out += std::to_string(r.bus) + "," + format_number(r.hour) + "," + format_number(r.vehicles_charging) +
           "," + format_number(r.x_mw) + "\n";
  }
  return out;
}

std::string summary_json(const ResultsBundle& b) {
  json doc;
  doc["format_version"] = kFormatVersion;
  doc["scenario"] = b.scenario;
  doc["config_digest"] = b.config_digest;
  doc["mode"] = b.mode;
  doc["penalty"] = {{"kind", b.penalty}, {"weight", round12(b.penalty_weight)}, {"top_l", b.top_l}};
  doc["seed"] = b.seed;
  doc["steps"] = b.steps;
  doc["dt_hours"] = round12(b.dt_hours);
  doc["fleets"] = json::array();
  for (const auto& [id, size] : b.fleets) doc["fleets"].push_back({{"id", id}, {"size", round12(size)}});
  doc["vref"] = json::array();
  for (double v : b.vref) doc["vref"].push_back(round12(v));
  doc["objective"] = {{"generation_cost", round12(b.objective.generation_cost)},
                      {"penalty", round12(b.objective.penalty)},
                      {"penalty_nonlinear", round12(b.objective.penalty_nonlinear)},
                      {"total", round12(b.objective.total)},
                      {"solver_objective", round12(b.objective.solver_objective)}};
  doc["violations"] = {{"count", b.violations.count},
                       {"count_linear", b.violations.count_linear},
                       {"buses_with_violation", b.violations.buses_with_violation},
                       {"max_deviation", round12(b.violations.max_deviation)},
                       {"max_deviation_linear", round12(b.violations.max_deviation_linear)},
                       {"sum_deviation_linear", round12(b.violations.sum_deviation_linear)}};
  doc["checks"] = {{"primal_residual", round12(b.checks.primal_residual)},
                   {"coupling_residual_mw", round12(b.checks.coupling_residual_mw)},
                   {"flow_balance_residual", round12(b.checks.flow_balance_residual)},
                   {"flexibility_residual", round12(b.checks.flexibility_residual)},
                   {"min_flow", round12(b.checks.min_flow)},
                   {"bound_violation", round12(b.checks.bound_violation)}};
  doc["arrivals"] = json::array();
  for (const ArrivalRow& a : b.arrivals) {
    doc["arrivals"].push_back({{"fleet", a.fleet}, {"bus", a.bus}, {"soc_percent", round12(a.soc_percent)},
                               {"hour", round12(a.hour)}, {"vehicles", round12(a.vehicles)}});
  }
  doc["routes"] = json::array();
  for (const RouteRow& r : b.routes) {
    doc["routes"].push_back({{"fleet", r.fleet}, {"from", r.from}, {"to", r.to}, {"hour", round12(r.hour)},
                             {"vehicles", round12(r.vehicles)}});
  }
  return doc.dump(1) + "\n";
}

void write_results(const ResultsBundle& b, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "voltages.csv", voltages_csv(b));
  write_file(dir / "congestion.csv", congestion_csv(b));
  write_file(dir / "summary.json", summary_json(b));
}

void write_plot_data(const ResultsBundle& b, const fs::path& dir) {
  std::string out = "series,bus,hour,value\n";
  auto row = [&](const char* series, int bus, double hour, double v) {
    out += std::string(series) + "," + std::to_string(bus) + "," + format_number(hour) + "," +
           format_number(v) + "\n";
  };
  std::map<BusId, double> vref;
  std::vector<BusId> order;
  for (const VoltageRow& r : b.voltages) {
    if (vref.find(r.bus) == vref.end()) {
      vref[r.bus] = b.vref.at(order.size());
      order.push_back(r.bus);
    }
  }
  for (const VoltageRow& r : b.voltages) row("v_pu", r.bus, r.hour, r.v_pu);
  for (const VoltageRow& r : b.voltages) row("v_deviation_pu", r.bus, r.hour, r.v_pu - vref[r.bus]);
  for (const CongestionRow& r : b.congestion) row("vehicles_charging", r.bus, r.hour, r.vehicles_charging);
  for (const CongestionRow& r : b.congestion) row("x_mw", r.bus, r.hour, r.x_mw);
  std::error_code ec;
  fs::create_directories(dir, ec);
  write_file(dir / "plot_data.csv", out);
}

ResultsBundle read_results(const fs::path& dir) {
  ResultsBundle b;
  const json doc = parse_json(read_text(dir / "summary.json"), "summary.json");
  check_version(doc, "summary.json");
  b.scenario = string_field(doc, "scenario", "summary.json");
  b.config_digest = string_field(doc, "config_digest", "summary.json");
  b.mode = string_field(doc, "mode", "summary.json");
  const json& pen = field(doc, "penalty", "summary.json");
  b.penalty = string_field(pen, "kind", "summary.json penalty");
  b.penalty_weight = number(pen, "weight", "summary.json penalty");
  b.top_l = static_cast<std::size_t>(integer(pen, "top_l", "summary.json penalty"));
  b.steps = integer(doc, "steps", "summary.json");
  b.dt_hours = number(doc, "dt_hours", "summary.json");
  for (const json& v : array(doc, "vref", "summary.json")) b.vref.push_back(v.get<double>());
  const json& o = field(doc, "objective", "summary.json");
  b.objective.generation_cost = number(o, "generation_cost", "objective");
  b.objective.penalty = number(o, "penalty", "objective");
  b.objective.penalty_nonlinear = number(o, "penalty_nonlinear", "objective");
  b.objective.total = number(o, "total", "objective");
  b.objective.solver_objective = number(o, "solver_objective", "objective");
  const json& v = field(doc, "violations", "summary.json");
  b.violations.count = static_cast<std::size_t>(integer(v, "count", "violations"));
  b.violations.count_linear = static_cast<std::size_t>(integer(v, "count_linear", "violations"));
  b.violations.buses_with_violation = static_cast<std::size_t>(integer(v, "buses_with_violation", "violations"));
  b.violations.max_deviation = number(v, "max_deviation", "violations");
  b.violations.max_deviation_linear = number(v, "max_deviation_linear", "violations");
  b.violations.sum_deviation_linear = number(v, "sum_deviation_linear", "violations");
  for (const json& r : array(doc, "routes", "summary.json")) {
    b.routes.push_back({string_field(r, "fleet", "route"), integer(r, "from", "route"), integer(r, "to", "route"),
                        number(r, "hour", "route"), number(r, "vehicles", "route")});
  }
  for (const json& r : array(doc, "arrivals", "summary.json")) {
    b.arrivals.push_back({string_field(r, "fleet", "arrival"), integer(r, "bus", "arrival"),
                          number(r, "soc_percent", "arrival"), number(r, "hour", "arrival"),
                          number(r, "vehicles", "arrival")});
  }

  auto csv_rows = [&](const char* name) {
    std::istringstream in(read_text(dir / name));
    std::string line;
    std::vector<std::vector<std::string>> rows;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::vector<std::string> cells;
      std::stringstream ls(line);
      std::string cell;
      while (std::getline(ls, cell, ',')) cells.push_back(cell);
      if (cells.size() != 4) schema(name, "expected 4 columns in '" + line + "'");
      rows.push_back(std::move(cells));
    }
    return rows;
  };
  for (const auto& c : csv_rows("voltages.csv")) {
    b.voltages.push_back({std::stoi(c[0]), std::stod(c[1]), std::stod(c[2]), std::stod(c[3])});
  }
  for (const auto& c : csv_rows("congestion.csv")) {
    b.congestion.push_back({std::stoi(c[0]), std::stod(c[1]), std::stod(c[2]), std::stod(c[3])});
  }
  return b;
}

BundleMetrics bundle_metrics(const ResultsBundle& b) {
  BundleMetrics m;
  std::map<BusId, bool> violated;
  std::map<BusId, std::size_t> position;
  for (const VoltageRow& r : b.voltages) {
    if (position.find(r.bus) == position.end()) {
      const std::size_t k = position.size();
      position[r.bus] = k;
    }
    const double vref = position[r.bus] < b.vref.size() ? b.vref[position[r.bus]] : 1.0;
    const double dev = std::abs(r.v_pu - vref);
    const bool out = outside_band(r.v_pu);
    if (out) ++m.violations;
    violated[r.bus] = violated[r.bus] || out;
    m.sum_deviation += dev;
    if (dev > m.worst_bus_deviation) {
      m.worst_bus_deviation = dev;
      m.worst_bus = r.bus;
    }
  }
  for (const auto& [bus, v] : violated) m.buses_with_violation += v ? 1 : 0;
  for (const CongestionRow& r : b.congestion) {
    if (r.vehicles_charging > m.peak_congestion) {
      m.peak_congestion = r.vehicles_charging;
      m.peak_station = r.bus;
    }
  }
  m.generation_cost = b.objective.generation_cost;
  m.penalty = b.objective.penalty;
  m.total = b.objective.total;
  return m;
}

std::string compare_report(const ResultsBundle& a, const ResultsBundle& b) {
  if (a.config_digest != b.config_digest) {
    throw Error(ErrorKind::ScenarioMismatch, "bundles come from different scenarios (" + a.config_digest +
                                                 " vs " + b.config_digest + ")");
  }
  const BundleMetrics ma = bundle_metrics(a), mb = bundle_metrics(b);
  std::ostringstream out;
  out << "scenario " << a.scenario << " (" << a.config_digest << ")\n";
  out << "a: " << a.mode << "/" << a.penalty << "   b: " << b.mode << "/" << b.penalty << "\n";
  out << std::left << std::setw(26) << "metric" << std::right << std::setw(18) << "a" << std::setw(18) << "b"
      << std::setw(18) << "b-a" << "\n";
  auto line = [&](const char* name, double va, double vb) {
    out << std::left << std::setw(26) << name << std::right << std::setw(18) << format_number(va)
        << std::setw(18) << format_number(vb) << std::setw(18) << format_number(vb - va) << "\n";
  };
  line("violations", static_cast<double>(ma.violations), static_cast<double>(mb.violations));
  line("buses-with-violation", static_cast<double>(ma.buses_with_violation),
       static_cast<double>(mb.buses_with_violation));
  line("worst-bus deviation", ma.worst_bus_deviation, mb.worst_bus_deviation);
  line("worst bus", ma.worst_bus, mb.worst_bus);
  line("sum deviation", ma.sum_deviation, mb.sum_deviation);
  line("peak congestion", ma.peak_congestion, mb.peak_congestion);
  line("peak station", ma.peak_station, mb.peak_station);
  line("generation cost", ma.generation_cost, mb.generation_cost);
  line("penalty", ma.penalty, mb.penalty);
  line("total objective", ma.total, mb.total);

  // Per-bus violation counts for the spatial contrast.
  std::map<BusId, std::pair<int, int>> per_bus;
  auto tally = [&](const ResultsBundle& r, bool first) {
    for (const VoltageRow& v : r.voltages) {
      auto& slot = per_bus[v.bus];
      if (outside_band(v.v_pu)) (first ? slot.first : slot.second) += 1;
    }
  };
  tally(a, true);
  tally(b, false);
  out << "per-bus violations (bus: a b)\n";
  for (const auto& [bus, c] : per_bus) {
    if (c.first || c.second) out << "  " << bus << ": " << c.first << " " << c.second << "\n";
  }
  return out.str();
}

}  // namespace hdev::io
