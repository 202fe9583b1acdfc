#include <algorithm>
#include <cstdlib>
#include <sstream>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "hdev/error.hpp"
#include "hdev/io.hpp"
#include "json.hpp"

using namespace hdev;
namespace fs = std::filesystem;

namespace {

fs::path fixture(const char* name) { return fs::path(HDEV_FIXTURES) / name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hdev_test_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string file_digest(const fs::path& p) { return io::digest(io::read_text(p)); }

}  // namespace

TEST_CASE("bundled 24-bus case") {
  const CaseData c = io::load_case_data(fixture("ieee24.json"));
  CHECK(c.buses.size() == 24);
  CHECK(c.branches.size() == 38);
  CHECK(c.generators.size() == 33);
  const GridCase grid = io::load_grid_case(fixture("ieee24.json"));
  // Derived admittances are consistent with r and x.
  for (const BranchData& b : c.branches) {
    if (b.tap != 1.0) continue;
    const std::size_t i = *grid.bus_index(b.from), j = *grid.bus_index(b.to);
    double g = 0.0, bb = 0.0;
    for (const BranchData& o : c.branches) {
      if ((o.from == b.from && o.to == b.to) || (o.from == b.to && o.to == b.from)) {
        const double oz2 = o.r * o.r + o.x * o.x;
        g -= o.r / oz2 / o.tap;
        bb += o.x / oz2 / o.tap;
      }
    }
    CAPTURE(b.from);
    CAPTURE(b.to);
    CHECK(grid.g_matrix()(i, j) == doctest::Approx(g).epsilon(1e-12));
    CHECK(grid.b_matrix()(i, j) == doctest::Approx(bb).epsilon(1e-12));
  }
  const auto solved = io::load_solved_state(fixture("ieee24.json"));
  REQUIRE(solved);
  CHECK(solved->v.size() == 24);
}

TEST_CASE("round trips keep the digest") {
  const CaseData c = io::load_case_data(fixture("ieee24.json"));
  const std::string once = io::case_data_to_json(c);
  const std::string twice = io::case_data_to_json(io::parse_case_data(once));
  CHECK(io::digest(once) == io::digest(twice));

  const io::TransportFile t = io::load_transport(fixture("transport_ieee24.json"));
  const std::string t1 = io::transport_to_json(t);
  CHECK(io::digest(t1) == io::digest(io::transport_to_json(io::parse_transport(t1))));

  io::TransportFile limited = t;
  limited.station_limits[4] = {0.0, 50.0};
  const std::string t2 = io::transport_to_json(limited);
  const io::TransportFile back = io::parse_transport(t2);
  CHECK(back.station_limits.at(4).max_mw == 50.0);
  CHECK(io::digest(t2) == io::digest(io::transport_to_json(back)));

  const EnergyRange e{0, 8};
  const auto fleets = io::load_fleets(fixture("fleet_case_study.json"), e, 0.5);
  REQUIRE(fleets.size() == 1);
  CHECK(fleets[0].criteria.injections.begin()->first == ExpandedNode{1, 4, 2});
  CHECK(fleets[0].criteria.withdrawals.begin()->first == ExpandedNode{22, 2, 14});
  const std::string f1 = io::fleets_to_json(fleets, e, 0.5);
  CHECK(io::digest(f1) == io::digest(io::fleets_to_json(io::parse_fleets(f1, e, 0.5), e, 0.5)));
}

TEST_CASE("scenario loading and the data directory override") {
  const Scenario sc = io::load_scenario(fixture("scenario_case_study.json"));
  CHECK(sc.name == "case-study");
  CHECK(sc.horizon.steps == 15);
  CHECK(sc.energy.count() == 9);
  CHECK(sc.penalty.kind == PenaltyKind::L1);
  CHECK(sc.fleets.size() == 1);
  CHECK(sc.digest == io::scenario_digest(sc, sc.fleets));

  const fs::path dir = scratch("env");
  fs::copy_file(fixture("scenario_case_study.json"), dir / "s.json");
  CHECK_THROWS(io::load_scenario(dir / "s.json"));
  ::setenv(io::kDataDirEnv, HDEV_FIXTURES, 1);
  const Scenario moved = io::load_scenario(dir / "s.json");
  ::unsetenv(io::kDataDirEnv);
  CHECK(moved.digest == sc.digest);
}

TEST_CASE("malformed inputs are rejected with a named error") {
  const fs::path dir = fs::path(HDEV_TEST_DATA) / "malformed";
  const auto manifest = nlohmann::json::parse(io::read_text(dir / "manifest.json"));
  REQUIRE(manifest.size() >= 30);
  for (const auto& entry : manifest) {
    const std::string file = entry.at("file");
    const std::string loader = entry.at("loader");
    const std::string expected = entry.at("error");
    CAPTURE(file);
    const fs::path path = dir / file;
    std::string got = "none";
    try {
      if (loader == "grid") {
        io::load_grid_case(path);
      } else if (loader == "transport") {
        io::load_transport(path);
      } else if (loader == "fleets") {
        io::load_fleets(path, {0, 2}, 1.0);
      } else {
        io::load_scenario(path);
      }
    } catch (const Error& e) {
      got = std::string(error_kind_name(e.kind()));
      CHECK(std::string(e.what()).size() > got.size() + 2);
    }
    CHECK(got == expected);
  }
}

TEST_CASE("error messages name the offending record") {
  try {
    io::parse_case_data(R"({"format_version":"1","baseMVA":100,"slack":1,
      "buses":[{"id":1},{"id":2,"pd_mw":"x"}],"branches":[],"generators":[]})");
    FAIL("expected SchemaError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SchemaError);
    CHECK(std::string(e.what()).find("bus record 1") != std::string::npos);
    CHECK(std::string(e.what()).find("pd_mw") != std::string::npos);
  }
}

TEST_CASE("a one-row bundle writes one voltage row") {
  io::ResultsBundle b;
  b.scenario = "tiny";
  b.config_digest = "0";
  b.mode = "coopt";
  b.penalty = "l1";
  b.steps = 1;
  b.voltages.push_back({1, 0.0, 1.0, 1.0});
  b.vref = {1.0};
  const fs::path dir = scratch("tiny");
  io::write_results(b, dir);
  const std::string csv = io::read_text(dir / "voltages.csv");
  CHECK(csv == "bus,hour,v_pu,linear_v_pu\n1,0,1,1\n");
  CHECK(fs::exists(dir / "congestion.csv"));
  CHECK(fs::exists(dir / "summary.json"));
}

TEST_CASE("number formatting") {
  CHECK(io::format_number(-0.0) == "0");
  CHECK(io::format_number(0.1 + 0.2) == "0.3");
  CHECK(io::format_number(1.0 / 3.0) == "0.333333333333");
  CHECK(io::format_number(225.0) == "225");
}

TEST_CASE("24-bus 7-hour run writes 168 rows, reruns are byte-identical and compare to zero") {
  Scenario sc = io::load_scenario(fixture("scenario_zero_fleet.json"));
  sc.horizon = {7, 1.0};
  RunOptions opts;
  opts.mode = RunMode::Coopt;
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  io::write_results(io::make_bundle(run_scenario(sc, opts)), a);
  io::write_results(io::make_bundle(run_scenario(sc, opts)), b);
  const std::string csv = io::read_text(a / "voltages.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 169);
  for (const char* f : {"voltages.csv", "congestion.csv", "summary.json"}) {
    CAPTURE(f);
    CHECK(file_digest(a / f) == file_digest(b / f));
  }
  CHECK(io::read_text(a / "summary.json").find("seconds") == std::string::npos);

  const io::ResultsBundle ra = io::read_results(a);
  CHECK(ra.voltages.size() == 168);
  const std::string report = io::compare_report(ra, io::read_results(b));
  CHECK(report.find("buses-with-violation") != std::string::npos);
  CHECK(report.find("worst-bus deviation") != std::string::npos);
  std::istringstream lines(report);
  std::string line;
  int metric_rows = 0;
  while (std::getline(lines, line)) {
    if (line.rfind("violations", 0) == 0 || line.rfind("sum deviation", 0) == 0 ||
        line.rfind("generation cost", 0) == 0 || line.rfind("total objective", 0) == 0) {
      ++metric_rows;
      CHECK(line.substr(line.size() - 2) == " 0");
    }
  }
  CHECK(metric_rows == 4);

  Scenario other = sc;
  other.horizon = {6, 1.0};
  const fs::path c = scratch("run_c");
  io::write_results(io::make_bundle(run_scenario(other, opts)), c);
  try {
    io::compare_report(ra, io::read_results(c));
    FAIL("expected ScenarioMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ScenarioMismatch);
  }
}

TEST_CASE("plot data is long format") {
  io::ResultsBundle b;
  b.voltages = {{1, 0.0, 0.97, 0.98}, {2, 0.0, 1.01, 1.0}};
  b.congestion = {{1, 0.0, 3.0, 0.45}};
  b.vref = {1.0, 1.0};
  const fs::path dir = scratch("plot");
  io::write_plot_data(b, dir);
  const std::string csv = io::read_text(dir / "plot_data.csv");
  CHECK(csv.rfind("series,bus,hour,value\n", 0) == 0);
  CHECK(csv.find("v_deviation_pu,1,0,-0.03\n") != std::string::npos);
  CHECK(csv.find("x_mw,1,0,0.45\n") != std::string::npos);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 2 + 2 + 1 + 1);
}
