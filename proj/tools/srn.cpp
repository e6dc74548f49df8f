#include <iostream>

#include <CLI11.hpp>

#include "srn/cli.hpp"

int main(int argc, char ** argv)
{
  CLI::App app{"srn: STL missions with control barrier functions for socially responsible navigation"};
  app.require_subcommand(1);

  srn::cli::RunOptions run_opt;
  std::uint64_t seed = 0;
  auto * run = app.add_subcommand("run", "simulate a scenario and export trace.csv, margins.csv, summary.json");
  run->add_option("scenario", run_opt.scenario_path, "scenario file")->required();
  auto * seed_opt = run->add_option("--seed", seed, "override the scenario seed");
  run->add_option("-o,--output", run_opt.output_dir, "output directory")->capture_default_str();

  srn::cli::MonitorOptions mon_opt;
  std::string mission;
  std::string scenario;
  auto * monitor = app.add_subcommand("monitor", "evaluate a mission on an exported trace");
  monitor->add_option("trace", mon_opt.trace_path, "trace.csv")->required();
  auto * mission_opt = monitor->add_option("--mission", mission, "inline STL mission");
  auto * scenario_opt = monitor->add_option("--scenario", scenario, "scenario providing names, mission and v_max");

  srn::cli::SweepOptions sweep_opt;
  std::string sweep_out;
  auto * sweep = app.add_subcommand("sweep", "run a parameter grid over numeric scenario keys");
  sweep->add_option("scenario", sweep_opt.scenario_path, "scenario file")->required();
  sweep->add_option("--grid", sweep_opt.grid, "KEY=v1,v2,... (repeatable; cartesian product)");
  auto * sweep_out_opt = sweep->add_option("-o,--output", sweep_out, "write the table here instead of stdout");
  sweep->add_option("-j,--jobs", sweep_opt.jobs, "concurrent runs (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : srn::cli::kExitUsage;
  }

  if (*run) {
    if (*seed_opt) { run_opt.seed = seed; }
    return srn::cli::cmd_run(run_opt, std::cout, std::cerr);
  }
  if (*monitor) {
    if (*mission_opt) { mon_opt.mission = mission; }
    if (*scenario_opt) { mon_opt.scenario_path = scenario; }
    return srn::cli::cmd_monitor(mon_opt, std::cout, std::cerr);
  }
  if (*sweep_out_opt) { sweep_opt.output_path = sweep_out; }
  return srn::cli::cmd_sweep(sweep_opt, std::cout, std::cerr);
}
