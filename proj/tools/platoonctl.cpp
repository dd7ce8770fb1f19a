// platoonctl: plan, simulate, schedule, and sweep mixed-traffic scenarios.

#include <CLI11.hpp>
#include <iostream>
#include <string>

#include "platoon/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Mixed-traffic platoon formation and intersection coordination"};
  app.require_subcommand(1);

  std::string scenario_path;
  platoon::cli::Options opt;
  std::string values_csv;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("scenario", scenario_path, "Scenario config (JSON)")->required();
    cmd->add_option("--out-dir", opt.out_dir, "Output directory (default: $PLATOONCTL_OUT_DIR or ./out)");
  };

  CLI::App* plan = app.add_subcommand("plan", "Synthesize the platoon-formation plan");
  add_common(plan);
  double tau_t_arg = 0.0;
  plan->add_option("--tau-t", tau_t_arg, "Requested transition duration [s]");
  plan->add_flag("--minimize", opt.minimize, "Use the minimum feasible transition duration");

  CLI::App* simulate = app.add_subcommand("simulate", "Run a scenario and write trajectory artifacts");
  add_common(simulate);
  double dt_arg = 0.0, horizon_arg = 0.0, tol_v_arg = 0.0, window_arg = 0.0;
  simulate->add_option("--dt", dt_arg, "Integration step [s]");
  simulate->add_option("--horizon", horizon_arg, "Simulation horizon [s]");
  simulate->add_option("--tau-t", tau_t_arg, "Override formation transition duration [s]");
  simulate->add_flag("--minimize", opt.minimize, "Use the minimum feasible transition duration");
  simulate->add_option("--tol-v", tol_v_arg, "Formed-platoon speed tolerance [m/s]");
  simulate->add_option("--window", window_arg, "Formed-platoon verification window [s]");

  CLI::App* schedule = app.add_subcommand("schedule", "Coordinate platoons through the intersection");
  add_common(schedule);
  schedule->add_option("--dt", dt_arg, "Integration step [s]");
  schedule->add_option("--horizon", horizon_arg, "Simulation horizon [s]");

  CLI::App* sweep = app.add_subcommand("sweep", "Run a one-parameter study");
  add_common(sweep);
  sweep->add_option("--param", opt.param, "Parameter: alpha | eta | tau_t | delta2")->required();
  sweep->add_option("--values", values_csv, "Comma-separated values")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : platoon::cli::kConfigError;
  }

  auto seen = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };
  CLI::App* active = app.get_subcommands().front();
  if (seen(active, "--dt")) opt.dt = dt_arg;
  if (seen(active, "--horizon")) opt.horizon = horizon_arg;
  if (active->get_option_no_throw("--tau-t") != nullptr && seen(active, "--tau-t"))
    opt.tau_t = tau_t_arg;
  if (active->get_option_no_throw("--tol-v") != nullptr && seen(active, "--tol-v"))
    opt.tol_v = tol_v_arg;
  if (active->get_option_no_throw("--window") != nullptr && seen(active, "--window"))
    opt.window = window_arg;

  if (!values_csv.empty()) {
    std::size_t pos = 0;
    while (pos <= values_csv.size()) {
      const std::size_t comma = values_csv.find(',', pos);
      const std::string token = values_csv.substr(
          pos, comma == std::string::npos ? std::string::npos : comma - pos);
      if (!token.empty()) {
        try {
          opt.values.push_back(std::stod(token));
        } catch (const std::exception&) {
          std::cerr << "error: bad sweep value '" << token << "'\n";
          return platoon::cli::kConfigError;
        }
      }
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }

  if (plan->parsed()) return platoon::cli::run_plan(scenario_path, opt, std::cout, std::cerr);
  if (simulate->parsed())
    return platoon::cli::run_simulate(scenario_path, opt, std::cout, std::cerr);
  if (schedule->parsed())
    return platoon::cli::run_schedule(scenario_path, opt, std::cout, std::cerr);
  return platoon::cli::run_sweep(scenario_path, opt, std::cout, std::cerr);
}
