// hdev: power flow, scenario runs and bundle comparison.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "hdev/io.hpp"
#include "hdev/powerflow.hpp"
#include "hdev/scenario.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace hdev;

namespace {

int exit_code(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::Infeasible:
    case ErrorKind::NonConvergence:
    case ErrorKind::SingularJacobian:
    case ErrorKind::SolverFailure:
    case ErrorKind::NumericalBreakdown:
      return 1;
    default:
      return 2;
  }
}

int cmd_powerflow(const fs::path& path, bool as_json) {
  const GridCase grid = io::load_grid_case(path);
  const OperatingPoint op = solve_operating_point(grid);
  if (as_json) {
    nlohmann::json doc;
    doc["format_version"] = io::kFormatVersion;
    doc["case"] = path.filename().string();
    doc["iterations"] = op.iterations;
    doc["residual"] = op.residual;
    doc["buses"] = nlohmann::json::array();
    for (std::size_t i = 0; i < grid.bus_count(); ++i) {
      doc["buses"].push_back({{"id", grid.bus(i).id},
                              {"v_pu", op.v0[i]},
                              {"theta_rad", op.theta0[i]},
                              {"p_pu", op.p0[i]},
                              {"q_pu", op.q0[i]}});
    }
    std::cout << doc.dump(1) << "\n";
    return 0;
  }
  std::printf("%6s %12s %12s %12s %12s\n", "bus", "v_pu", "theta_rad", "p_pu", "q_pu");
  for (std::size_t i = 0; i < grid.bus_count(); ++i) {
    std::printf("%6d %12.6f %12.6f %12.6f %12.6f\n", grid.bus(i).id, op.v0[i], op.theta0[i], op.p0[i],
                op.q0[i]);
  }
  std::printf("iterations %d residual %.3e\n", op.iterations, op.residual);
  return 0;
}

struct RunArgs {
  std::string scenario;
  std::string mode = "coopt";
  std::string penalty;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool all_penalties = false;
  bool plot_data = false;
  bool v2g = false;
  std::optional<double> fleet_size;
};

void report(const RunResult& r, const fs::path& dir) {
  const io::ResultsBundle b = io::make_bundle(r);
  const auto& v = b.violations;
  std::printf("%s %s/%s: violations %zu (linear %zu), buses %zu, max |V-Vref| %.4f, cost %.2f, penalty %.4g, "
              "%.2fs -> %s\n",
              b.scenario.c_str(), b.mode.c_str(), b.penalty.c_str(), v.count, v.count_linear,
              v.buses_with_violation, v.max_deviation, b.objective.generation_cost, b.objective.penalty,
              r.seconds, dir.string().c_str());
}

int cmd_run(const RunArgs& args) {
  const Scenario sc = io::load_scenario(args.scenario);
  RunOptions base;
  base.mode = args.mode == "baseline" ? RunMode::Baseline : RunMode::Coopt;
  base.seed = args.seed;
  if (args.v2g) base.enable_v2g = true;
  base.fleet_size = args.fleet_size;
  const fs::path out = args.out.empty() ? fs::path("results") / (sc.name + "-" + args.mode) : fs::path(args.out);

  std::vector<PenaltyKind> kinds;
  if (args.all_penalties) {
    kinds = {PenaltyKind::L1, PenaltyKind::L2, PenaltyKind::Linf};
  } else if (!args.penalty.empty()) {
    kinds = {*parse_penalty_kind(args.penalty)};
  } else {
    kinds = {sc.penalty.kind};
  }

  std::vector<std::future<RunResult>> jobs;
  for (PenaltyKind k : kinds) {
    RunOptions o = base;
    o.penalty = k;
    jobs.push_back(std::async(args.all_penalties ? std::launch::async : std::launch::deferred,
                              [&sc, o] { return run_scenario(sc, o); }));
  }
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const RunResult r = jobs[j].get();
    const fs::path dir = args.all_penalties ? out / std::string(penalty_kind_name(kinds[j])) : out;
    const io::ResultsBundle b = io::make_bundle(r);
    io::write_results(b, dir);
    if (args.plot_data) io::write_plot_data(b, dir);
    report(r, dir);
  }
  return 0;
}

int cmd_compare(const fs::path& a, const fs::path& b, const std::string& out) {
  const std::string text = io::compare_report(io::read_results(a), io::read_results(b));
  std::cout << text;
  const fs::path dest = out.empty() ? b / "compare.txt" : fs::path(out);
  std::ofstream f(dest);
  if (!f) throw Error(ErrorKind::IoError, "cannot write " + dest.string());
  f << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heavy-duty EV fleet and power grid co-optimization"};
  app.require_subcommand(1);

  std::string case_path;
  bool as_json = false;
  auto* pf = app.add_subcommand("powerflow", "Solve the base-case power flow");
  pf->add_option("case", case_path, "Grid case JSON")->required();
  pf->add_flag("--json", as_json, "Machine-readable output");

  RunArgs run;
  auto* rn = app.add_subcommand("run", "Run a scenario and write a result bundle");
  rn->add_option("scenario", run.scenario, "Scenario JSON")->required();
  rn->add_option("--mode", run.mode, "baseline or coopt")->check(CLI::IsMember({"baseline", "coopt"}));
  rn->add_option("--penalty", run.penalty, "l1, l2 or linf")->check(CLI::IsMember({"l1", "l2", "linf"}));
  rn->add_option("--seed", run.seed, "Override the scenario seed");
  rn->add_option("--out", run.out, "Output directory");
  rn->add_flag("--all-penalties", run.all_penalties, "Solve l1, l2 and linf concurrently into <out>/<kind>");
  rn->add_flag("--emit-plot-data", run.plot_data, "Also write plot_data.csv");
  rn->add_flag("--enable-v2g", run.v2g, "Allow discharging arcs");
  rn->add_option("--fleet-size", run.fleet_size, "Rescale every fleet to N vehicles");

  std::string dir_a, dir_b, cmp_out;
  auto* cmp = app.add_subcommand("compare", "Compare two result bundles of one scenario");
  cmp->add_option("a", dir_a, "First bundle directory")->required();
  cmp->add_option("b", dir_b, "Second bundle directory")->required();
  cmp->add_option("--out", cmp_out, "Report path (default <b>/compare.txt)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*pf) return cmd_powerflow(case_path, as_json);
    if (*rn) return cmd_run(run);
    if (*cmp) return cmd_compare(dir_a, dir_b, cmp_out);
  } catch (const Error& e) {
    std::cerr << "hdev: " << e.what() << "\n";
    return exit_code(e);
  } catch (const std::exception& e) {
    std::cerr << "hdev: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
