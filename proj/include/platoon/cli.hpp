#ifndef PLATOON_CLI_HPP
#define PLATOON_CLI_HPP

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "platoon/scenario_json.hpp"

namespace platoon::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kOk = 0,
  kConfigError = 2,
  kInfeasible = 3,
  kUnsafe = 4,
  kSolverError = 5,
};

[[nodiscard]] inline const char* status_name(int code) {
  switch (code) {
    case kOk: return "ok";
    case kConfigError: return "config_error";
    case kInfeasible: return "infeasible";
    case kUnsafe: return "unsafe";
    case kSolverError: return "solver_error";
  }
  return "error";
}

struct Options {
  std::optional<double> dt;
  std::optional<double> horizon;
  std::optional<double> tau_t;
  bool minimize = false;
  std::optional<double> tol_v;
  std::optional<double> window;
  std::string out_dir;  // empty: env PLATOONCTL_OUT_DIR, then "./out"
  std::string param;
  std::vector<double> values;
};

[[nodiscard]] inline fs::path resolve_out_dir(const Options& opt) {
  if (!opt.out_dir.empty()) return opt.out_dir;
  if (const char* env = std::getenv("PLATOONCTL_OUT_DIR"); env != nullptr && *env != '\0')
    return env;
  return "out";
}

/// %.9g rendering keeps CSV output byte-stable across runs.
[[nodiscard]] inline std::string format_number(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline void write_text_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ScenarioError("cannot write " + path.string());
  out << content;
}

[[nodiscard]] inline std::string trajectories_csv(const TrajectoryLog& log) {
  std::ostringstream os;
  os << "t,vehicle_id,role,p,v,u_applied,u_raw,delta,spacing,mode\n";
  if (log.vehicles.empty()) return os.str();
  const std::size_t n = log.vehicles.front().samples.size();
  for (std::size_t k = 0; k < n; ++k) {
    for (const VehicleLog& veh : log.vehicles) {
      const SampleRow& r = veh.samples[k];
      os << format_number(r.t) << ',' << veh.id << ',' << to_string(veh.role) << ','
         << format_number(r.p) << ',' << format_number(r.v) << ','
         << format_number(r.u_applied) << ',' << format_number(r.u_raw) << ','
         << format_number(r.delta) << ',' << format_number(r.spacing) << ','
         << to_string(r.mode) << '\n';
    }
  }
  return os.str();
}

struct RunReport {
  std::string command;
  json scenario_echo;
  int exit_code = kOk;
  std::string note;
  json body = json::object();
  std::vector<std::string> outputs;

  [[nodiscard]] json to_json() const {
    json doc = {{"command", command},
                {"status", status_name(exit_code)},
                {"exit_code", exit_code},
                {"note", note},
                {"outputs", outputs}};
    if (!scenario_echo.is_null()) doc["scenario"] = scenario_echo;
    for (const auto& [k, v] : body.items()) doc[k] = v;
    return doc;
  }
};

inline int finish(RunReport& report, const fs::path& out_dir, std::ostream& err) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!ec) {
    report.outputs.push_back((out_dir / "report.json").string());
    write_text_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
  }
  if (report.exit_code != kOk) err << "error: " << report.note << "\n";
  return report.exit_code;
}

[[nodiscard]] inline std::optional<Scenario> load_scenario(const std::string& path,
                                                           const Options& opt, RunReport& report) {
  std::ifstream in(path);
  if (!in) {
    report.exit_code = kConfigError;
    report.note = "cannot open scenario file: " + path;
    return std::nullopt;
  }
  json doc;
  try {
    in >> doc;
    Scenario s = parse_scenario(doc);
    if (opt.dt) s.sim.dt = *opt.dt;
    if (opt.horizon) s.sim.horizon = *opt.horizon;
    if (opt.tau_t) {
      s.formation.tau_t = *opt.tau_t;
      s.formation.minimize = false;
    }
    if (opt.minimize) s.formation.minimize = true;
    if (opt.tol_v) s.formation.tol_v = *opt.tol_v;
    if (opt.window) s.formation.window = *opt.window;
    s = validate_scenario(s);
    report.scenario_echo = scenario_to_json(s);
    return s;
  } catch (const std::exception& e) {
    report.exit_code = kConfigError;
    report.note = e.what();
    return std::nullopt;
  }
}

/// `plan`: synthesize and report the formation plan, assuming the steady
/// buffer-zone cruise so that entry gaps equal the configured initial gaps.
inline int run_plan(const std::string& scenario_path, const Options& opt, std::ostream& out,
                    std::ostream& err) {
  RunReport report;
  report.command = "plan";
  const fs::path out_dir = resolve_out_dir(opt);

  auto maybe = load_scenario(scenario_path, opt, report);
  if (!maybe) return finish(report, out_dir, err);
  const Scenario& s = *maybe;
  if (s.kind != ScenarioKind::PlatoonFormation) {
    report.exit_code = kConfigError;
    report.note = "wrong scenario kind: plan needs a platoon-formation scenario";
    return finish(report, out_dir, err);
  }

  const double t_c = s.road.buffer_length / s.vehicles.front().initial.speed;
  std::vector<VehicleState> states;
  for (const auto& v : s.vehicles) {
    VehicleState st = v.initial;
    st.position += st.speed * t_c;
    st.time = t_c;
    states.push_back(st);
  }
  const PlatoonPlan plan = formation_plan(s, states, t_c, s.formation);
  report.body["plan"] = plan_to_json(plan);
  if (!plan.feasible) {
    report.exit_code = kInfeasible;
    report.note = plan.reason;
  } else {
    out << report.body["plan"].dump(2) << "\n";
  }
  return finish(report, out_dir, err);
}

inline int simulate_into(const Scenario& s, RunReport& report, const fs::path& out_dir) {
  const SimResult result = run_scenario(s);
  const SafetyReport safety = safety_monitor(result.log, s);
  const Metrics metrics = compute_metrics(result.log, s);

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_text_file(out_dir / "trajectories.csv", trajectories_csv(result.log));
  write_text_file(out_dir / "events.json", events_to_json(result.log).dump(2) + "\n");
  write_text_file(out_dir / "metrics.json", metrics_to_json(metrics).dump(2) + "\n");
  report.outputs = {(out_dir / "trajectories.csv").string(), (out_dir / "events.json").string(),
                    (out_dir / "metrics.json").string()};

  report.body["metrics"] = metrics_to_json(metrics);
  report.body["violations"] = safety_to_json(safety);
  if (result.plan) report.body["plan"] = plan_to_json(*result.plan);
  if (result.formation)
    report.body["formation_check"] = {{"formed", result.formation->formed},
                                      {"report", result.formation->report}};
  if (s.kind == ScenarioKind::Intersection) {
    report.body["schedule"] = schedule_to_json(result.schedule);
    write_text_file(out_dir / "schedule.json", schedule_to_json(result.schedule).dump(2) + "\n");
    report.outputs.push_back((out_dir / "schedule.json").string());
  }

  if (!safety.clean()) {
    report.exit_code = kUnsafe;
    report.note = "safety violations recorded";
  } else if (!result.feasible) {
    report.exit_code = kInfeasible;
    report.note = result.note;
  }
  return report.exit_code;
}

inline int run_simulate(const std::string& scenario_path, const Options& opt, std::ostream& out,
                        std::ostream& err) {
  RunReport report;
  report.command = "simulate";
  const fs::path out_dir = resolve_out_dir(opt);
  auto maybe = load_scenario(scenario_path, opt, report);
  if (!maybe) return finish(report, out_dir, err);
  try {
    simulate_into(*maybe, report, out_dir);
  } catch (const InfeasibleError& e) {
    report.exit_code = kInfeasible;
    report.note = e.what();
  } catch (const DomainError& e) {
    report.exit_code = kSolverError;
    report.note = e.what();
  }
  if (report.exit_code == kOk)
    out << "simulate: ok"
        << (report.body.contains("metrics") && report.body["metrics"].contains("formation_time")
                ? " (formation_time " +
                      format_number(report.body["metrics"]["formation_time"].get<double>()) + " s)"
                : "")
        << "\n";
  return finish(report, out_dir, err);
}

inline int run_schedule(const std::string& scenario_path, const Options& opt, std::ostream& out,
                        std::ostream& err) {
  RunReport report;
  report.command = "schedule";
  const fs::path out_dir = resolve_out_dir(opt);
  auto maybe = load_scenario(scenario_path, opt, report);
  if (!maybe) return finish(report, out_dir, err);
  if (maybe->kind != ScenarioKind::Intersection) {
    report.exit_code = kConfigError;
    report.note = "wrong scenario kind: schedule needs an intersection scenario";
    return finish(report, out_dir, err);
  }
  try {
    simulate_into(*maybe, report, out_dir);
  } catch (const InfeasibleError& e) {
    report.exit_code = kInfeasible;
    report.note = e.what();
  } catch (const DomainError& e) {
    report.exit_code = kSolverError;
    report.note = e.what();
  }
  if (report.exit_code == kOk && report.body.contains("schedule"))
    out << report.body["schedule"].dump(2) << "\n";
  return finish(report, out_dir, err);
}

inline int run_sweep(const std::string& scenario_path, const Options& opt, std::ostream& out,
                     std::ostream& err) {
  static const std::set<std::string> kParams = {"alpha", "eta", "tau_t", "delta2"};
  RunReport report;
  report.command = "sweep";
  const fs::path out_dir = resolve_out_dir(opt);

  if (kParams.count(opt.param) == 0) {
    report.exit_code = kConfigError;
    report.note = opt.param.empty() ? "missing --param" : "unknown sweep parameter: " + opt.param;
    return finish(report, out_dir, err);
  }
  if (opt.values.empty()) {
    report.exit_code = kConfigError;
    report.note = "empty sweep value list";
    return finish(report, out_dir, err);
  }
  auto maybe = load_scenario(scenario_path, opt, report);
  if (!maybe) return finish(report, out_dir, err);

  std::ostringstream summary;
  summary << "param,value,status,u_p,formation_time,total_energy,min_bumper_gap\n";
  json runs = json::array();
  for (double value : opt.values) {
    Scenario s = *maybe;
    s.validated = false;
    if (opt.param == "alpha") {
      for (auto& v : s.vehicles)
        if (v.driver) v.driver->alpha = value;
    } else if (opt.param == "eta") {
      for (auto& v : s.vehicles)
        if (v.driver) {
          v.driver->eta = value;
          v.driver->eta_bar = std::max(v.driver->eta_bar, value);
        }
    } else if (opt.param == "tau_t") {
      s.formation.tau_t = value;
      s.formation.minimize = false;
    } else {  // delta2: reposition the first follower to open the given gap
      if (s.vehicles.size() < 2 || !s.vehicles[1].driver) {
        report.exit_code = kConfigError;
        report.note = "delta2 sweep needs a trailing HDV";
        return finish(report, out_dir, err);
      }
      const auto& lead = s.vehicles[0].initial;
      auto& follower = s.vehicles[1];
      follower.initial.position =
          lead.position - value -
          following_spacing(follower.initial.speed, *follower.driver) - s.vehicle_length();
    }

    RunReport sub;
    sub.command = "simulate";
    const fs::path sub_dir = out_dir / (opt.param + "_" + format_number(value));
    try {
      s = validate_scenario(s);
      sub.scenario_echo = scenario_to_json(s);
      simulate_into(s, sub, sub_dir);
    } catch (const InfeasibleError& e) {
      sub.exit_code = kInfeasible;
      sub.note = e.what();
    } catch (const std::exception& e) {
      sub.exit_code = kConfigError;
      sub.note = e.what();
    }
    std::error_code ec;
    fs::create_directories(sub_dir, ec);
    write_text_file(sub_dir / "report.json", sub.to_json().dump(2) + "\n");

    const json& body = sub.body;
    const std::string u_p =
        body.contains("plan") ? format_number(body["plan"]["u_p"].get<double>()) : "";
    std::string formation_time, energy, min_gap;
    if (body.contains("metrics")) {
      const json& m = body["metrics"];
      if (m.contains("formation_time"))
        formation_time = format_number(m["formation_time"].get<double>());
      double total = 0.0, worst_gap = kInf;
      for (const json& v : m["vehicles"]) {
        total += v["control_energy"].get<double>();
        if (v.contains("min_bumper_gap"))
          worst_gap = std::min(worst_gap, v["min_bumper_gap"].get<double>());
      }
      energy = format_number(total);
      if (worst_gap < kInf) min_gap = format_number(worst_gap);
    }
    summary << opt.param << ',' << format_number(value) << ',' << status_name(sub.exit_code) << ','
            << u_p << ',' << formation_time << ',' << energy << ',' << min_gap << '\n';
    runs.push_back({{"value", value},
                    {"status", status_name(sub.exit_code)},
                    {"dir", sub_dir.string()}});
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  write_text_file(out_dir / "summary.csv", summary.str());
  report.outputs.push_back((out_dir / "summary.csv").string());
  report.body["runs"] = runs;
  out << summary.str();
  return finish(report, out_dir, err);
}

}  // namespace platoon::cli

#endif  // PLATOON_CLI_HPP
