#ifndef PLATOON_SCENARIO_JSON_HPP
#define PLATOON_SCENARIO_JSON_HPP

#include <json.hpp>
#include <set>
#include <string>
#include <vector>

#include "platoon/core.hpp"
#include "platoon/formation.hpp"
#include "platoon/scheduler.hpp"
#include "platoon/sim.hpp"

namespace platoon {

using json = nlohmann::json;

namespace detail {

inline void require_keys(const json& obj, const std::string& where,
                         const std::set<std::string>& required,
                         const std::set<std::string>& optional = {}) {
  if (!obj.is_object()) throw ScenarioError(where + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (required.count(key) == 0 && optional.count(key) == 0)
      throw ScenarioError(where + ": unknown key '" + key + "'");
  }
  for (const auto& key : required)
    if (!obj.contains(key)) throw ScenarioError(where + ": missing key '" + key + "'");
}

inline double num(const json& obj, const std::string& key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ScenarioError(where + "." + key + ": expected a number");
  return v.get<double>();
}

inline VehicleLimits parse_limits(const json& obj, const std::string& where) {
  require_keys(obj, where, {"v_min", "v_max", "u_min", "u_max"});
  VehicleLimits lim;
  lim.v_min = num(obj, "v_min", where);
  lim.v_max = num(obj, "v_max", where);
  lim.u_min = num(obj, "u_min", where);
  lim.u_max = num(obj, "u_max", where);
  return lim;
}

inline DriverParams parse_driver(const json& obj, const std::string& where) {
  require_keys(obj, where, {"alpha", "rho", "s0", "eta", "eta_bar", "tau_r"});
  DriverParams d;
  d.alpha = num(obj, "alpha", where);
  d.rho = num(obj, "rho", where);
  d.s0 = num(obj, "s0", where);
  d.eta = num(obj, "eta", where);
  d.eta_bar = num(obj, "eta_bar", where);
  d.tau_r = num(obj, "tau_r", where);
  return d;
}

}  // namespace detail

/// Parses the scenario document. Unknown keys are errors; scenario-level
/// "limits" and "driver" provide per-vehicle defaults.
[[nodiscard]] inline Scenario parse_scenario(const json& doc) {
  using detail::num;
  detail::require_keys(doc, "scenario", {"kind", "geometry", "vehicles", "sim"},
                       {"limits", "driver", "formation"});

  Scenario s;
  const std::string kind = doc.at("kind").get<std::string>();
  if (kind == "platoon-formation") {
    s.kind = ScenarioKind::PlatoonFormation;
  } else if (kind == "intersection") {
    s.kind = ScenarioKind::Intersection;
  } else {
    throw ScenarioError("kind must be 'platoon-formation' or 'intersection'");
  }

  const json& geo = doc.at("geometry");
  if (s.kind == ScenarioKind::PlatoonFormation) {
    detail::require_keys(geo, "geometry", {"buffer_length", "control_length", "vehicle_length"});
    s.road.buffer_length = num(geo, "buffer_length", "geometry");
    s.road.control_length = num(geo, "control_length", "geometry");
    s.road.vehicle_length = num(geo, "vehicle_length", "geometry");
  } else {
    detail::require_keys(geo, "geometry",
                         {"control_distance", "merging_side", "vehicle_length", "paths"});
    s.intersection.control_distance = num(geo, "control_distance", "geometry");
    s.intersection.merging_side = num(geo, "merging_side", "geometry");
    s.intersection.vehicle_length = num(geo, "vehicle_length", "geometry");
    for (const json& p : geo.at("paths")) {
      detail::require_keys(p, "geometry.paths[]", {"id"}, {"conflicts"});
      ApproachPath path;
      path.id = p.at("id").get<std::string>();
      if (p.contains("conflicts"))
        for (const json& c : p.at("conflicts")) path.conflicts.insert(c.get<std::string>());
      s.intersection.paths.push_back(std::move(path));
    }
  }

  std::optional<VehicleLimits> default_limits;
  std::optional<DriverParams> default_driver;
  if (doc.contains("limits")) default_limits = detail::parse_limits(doc.at("limits"), "limits");
  if (doc.contains("driver")) default_driver = detail::parse_driver(doc.at("driver"), "driver");

  for (const json& v : doc.at("vehicles")) {
    detail::require_keys(v, "vehicles[]", {"id", "role", "position", "speed"},
                         {"limits", "driver", "path"});
    VehicleSpec spec;
    spec.id = v.at("id").get<int>();
    const std::string role = v.at("role").get<std::string>();
    if (role == "CAV") {
      spec.role = Role::CAV;
    } else if (role == "HDV") {
      spec.role = Role::HDV;
    } else {
      throw ScenarioError("vehicles[].role must be 'CAV' or 'HDV'");
    }
    spec.initial.position = num(v, "position", "vehicles[]");
    spec.initial.speed = num(v, "speed", "vehicles[]");
    if (v.contains("limits")) {
      spec.limits = detail::parse_limits(v.at("limits"), "vehicles[].limits");
    } else if (default_limits) {
      spec.limits = *default_limits;
    } else {
      throw ScenarioError("vehicle " + std::to_string(spec.id) +
                          ": no limits given and no scenario default");
    }
    if (v.contains("driver")) {
      spec.driver = detail::parse_driver(v.at("driver"), "vehicles[].driver");
    } else if (spec.role == Role::HDV) {
      if (!default_driver)
        throw ScenarioError("vehicle " + std::to_string(spec.id) +
                            ": HDV without driver parameters");
      spec.driver = default_driver;
    }
    if (v.contains("path")) spec.path = v.at("path").get<std::string>();
    s.vehicles.push_back(std::move(spec));
  }

  const json& sim = doc.at("sim");
  detail::require_keys(sim, "sim", {"dt", "horizon"});
  s.sim.dt = num(sim, "dt", "sim");
  s.sim.horizon = num(sim, "horizon", "sim");

  if (doc.contains("formation")) {
    const json& f = doc.at("formation");
    detail::require_keys(f, "formation", {},
                         {"tau_t", "minimize", "tol_v", "tol_delta", "window", "check_margin"});
    if (f.contains("minimize")) s.formation.minimize = f.at("minimize").get<bool>();
    if (f.contains("tau_t")) s.formation.tau_t = num(f, "tau_t", "formation");
    if (f.contains("tol_v")) s.formation.tol_v = num(f, "tol_v", "formation");
    if (f.contains("tol_delta")) s.formation.tol_delta = num(f, "tol_delta", "formation");
    if (f.contains("window")) s.formation.window = num(f, "window", "formation");
    if (f.contains("check_margin")) s.formation.check_margin = num(f, "check_margin", "formation");
  }
  return s;
}

[[nodiscard]] inline json limits_to_json(const VehicleLimits& lim) {
  return {{"v_min", lim.v_min}, {"v_max", lim.v_max}, {"u_min", lim.u_min}, {"u_max", lim.u_max}};
}

[[nodiscard]] inline json driver_to_json(const DriverParams& d) {
  return {{"alpha", d.alpha}, {"rho", d.rho},         {"s0", d.s0},
          {"eta", d.eta},     {"eta_bar", d.eta_bar}, {"tau_r", d.tau_r}};
}

[[nodiscard]] inline json scenario_to_json(const Scenario& s) {
  json doc;
  doc["kind"] = s.kind == ScenarioKind::PlatoonFormation ? "platoon-formation" : "intersection";
  if (s.kind == ScenarioKind::PlatoonFormation) {
    doc["geometry"] = {{"buffer_length", s.road.buffer_length},
                       {"control_length", s.road.control_length},
                       {"vehicle_length", s.road.vehicle_length}};
    doc["formation"] = {{"minimize", s.formation.minimize}, {"tau_t", s.formation.tau_t},
                        {"tol_v", s.formation.tol_v},       {"tol_delta", s.formation.tol_delta},
                        {"window", s.formation.window},     {"check_margin", s.formation.check_margin}};
  } else {
    json paths = json::array();
    for (const auto& p : s.intersection.paths)
      paths.push_back({{"id", p.id}, {"conflicts", p.conflicts}});
    doc["geometry"] = {{"control_distance", s.intersection.control_distance},
                       {"merging_side", s.intersection.merging_side},
                       {"vehicle_length", s.intersection.vehicle_length},
                       {"paths", paths}};
  }
  json vehicles = json::array();
  for (const auto& v : s.vehicles) {
    json jv = {{"id", v.id},
               {"role", v.role == Role::CAV ? "CAV" : "HDV"},
               {"position", v.initial.position},
               {"speed", v.initial.speed},
               {"limits", limits_to_json(v.limits)}};
    if (v.driver) jv["driver"] = driver_to_json(*v.driver);
    if (!v.path.empty()) jv["path"] = v.path;
    vehicles.push_back(std::move(jv));
  }
  doc["vehicles"] = vehicles;
  doc["sim"] = {{"dt", s.sim.dt}, {"horizon", s.sim.horizon}};
  return doc;
}

[[nodiscard]] inline json plan_to_json(const PlatoonPlan& plan) {
  return {{"feasible", plan.feasible},
          {"reason", plan.reason},
          {"u_p", plan.u_p},
          {"tau_t", plan.tau_t},
          {"tau_s", plan.tau_s},
          {"t_c", plan.t_c},
          {"t_s", plan.t_s},
          {"t_p", plan.t_p},
          {"governing_gap", plan.governing_gap},
          {"v1_entry", plan.v1_entry},
          {"v_transition_end", plan.v_transition_end},
          {"tau_window", {plan.tau_lb, plan.tau_ub}}};
}

[[nodiscard]] inline json trajectory_to_json(const CubicTrajectory& c) {
  return {{"phi", {c.phi3, c.phi2, c.phi1, c.phi0}}, {"t0", c.t0}, {"tf", c.tf}};
}

[[nodiscard]] inline json schedule_to_json(const CrossingSchedule& schedule) {
  json entries = json::array();
  for (const auto& e : schedule.entries) {
    entries.push_back({{"vehicle", e.vehicle_id},
                       {"path", e.path},
                       {"t0", e.t0},
                       {"v0", e.v0},
                       {"u0", e.u0},
                       {"t_m", e.t_m},
                       {"t_f", e.t_f},
                       {"t_last_f", e.t_last_f},
                       {"trajectory", trajectory_to_json(e.traj)},
                       {"active_constraints", e.active_constraints},
                       {"kkt_residual", e.kkt.max_residual()},
                       {"pushed", e.pushed}});
  }
  return {{"entries", entries}};
}

[[nodiscard]] inline json metrics_to_json(const Metrics& m) {
  json vehicles = json::array();
  for (const auto& v : m.vehicles) {
    json jv = {{"id", v.id}, {"control_energy", v.control_energy}};
    if (v.travel_time) jv["travel_time"] = *v.travel_time;
    if (v.min_bumper_gap) jv["min_bumper_gap"] = *v.min_bumper_gap;
    vehicles.push_back(std::move(jv));
  }
  json out = {{"vehicles", vehicles}};
  if (m.formation_time) out["formation_time"] = *m.formation_time;
  return out;
}

[[nodiscard]] inline json events_to_json(const TrajectoryLog& log) {
  json events = json::array();
  for (const auto& e : log.events)
    events.push_back({{"type", e.type}, {"vehicle", e.vehicle}, {"t", e.t}});
  return events;
}

[[nodiscard]] inline json safety_to_json(const SafetyReport& report) {
  json rear = json::array();
  for (const auto& v : report.rear_end)
    rear.push_back({{"t", v.t}, {"vehicle", v.vehicle}, {"gap", v.gap}});
  json lateral = json::array();
  for (const auto& v : report.lateral)
    lateral.push_back({{"t", v.t}, {"vehicle_a", v.vehicle_a}, {"vehicle_b", v.vehicle_b}});
  return {{"rear_end", rear}, {"lateral", lateral}};
}

}  // namespace platoon

#endif  // PLATOON_SCENARIO_JSON_HPP
