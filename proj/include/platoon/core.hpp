#ifndef PLATOON_CORE_HPP
#define PLATOON_CORE_HPP

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace platoon {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Raised when a scenario or configuration violates a structural invariant.
class ScenarioError : public std::runtime_error {
public:
  explicit ScenarioError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a planning/solver routine is handed inputs outside its domain.
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& what) : std::runtime_error(what) {}
};

/// Kinematic state of one vehicle at one instant. Positions are front-bumper
/// positions, measured along the lane from the scenario origin.
struct VehicleState {
  double position = 0.0;  // m
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2
  double time = 0.0;      // s
};

/// Roadway speed band and per-vehicle actuation limits.
struct VehicleLimits {
  double v_min = 0.1;   // m/s, > 0
  double v_max = 30.0;  // m/s
  double u_min = -3.0;  // m/s^2, < 0
  double u_max = 3.0;   // m/s^2, > 0

  [[nodiscard]] double clamp_speed(double v) const {
    return std::min(std::max(v, v_min), v_max);
  }
  [[nodiscard]] double clamp_accel(double u) const {
    return std::min(std::max(u, u_min), u_max);
  }
};

/// Behavioral parameters of a human-driven vehicle: car-following gain,
/// desired time gap, standstill distance, perception delay and its known
/// upper bound, and the response time of the following law (given a priori).
struct DriverParams {
  double alpha = 0.5;    // 1/s
  double rho = 0.5;      // s
  double s0 = 2.0;       // m
  double eta = 0.3;      // s
  double eta_bar = 0.4;  // s
  double tau_r = 5.6;    // s
};

enum class Role { CAV, HDV };

[[nodiscard]] inline const char* to_string(Role r) {
  return r == Role::CAV ? "CAV" : "HDV";
}

/// Single-lane formation roadway: buffer zone [0, L_b) where trailing-vehicle
/// states are observed, then control zone [L_b, L_b + L_c).
struct RoadGeometry {
  double buffer_length = 100.0;   // L_b, m
  double control_length = 400.0;  // L_c, m
  double vehicle_length = 4.0;    // l_c, m

  [[nodiscard]] double total_length() const { return buffer_length + control_length; }
};

/// One approach path through the intersection. Positions on a path are
/// measured from its control-zone entry; the merging zone occupies
/// [control_distance, control_distance + merging_side].
struct ApproachPath {
  std::string id;
  std::set<std::string> conflicts;
};

struct IntersectionGeometry {
  double control_distance = 250.0;  // S_c, m
  double merging_side = 20.0;       // S_m, m
  double vehicle_length = 4.0;      // l_c, m
  std::vector<ApproachPath> paths;

  [[nodiscard]] double merging_entry() const { return control_distance; }
  [[nodiscard]] double merging_exit() const { return control_distance + merging_side; }

  [[nodiscard]] const ApproachPath* find_path(const std::string& id) const {
    for (const auto& p : paths)
      if (p.id == id) return &p;
    return nullptr;
  }
  [[nodiscard]] bool conflicting(const std::string& a, const std::string& b) const {
    const ApproachPath* pa = find_path(a);
    return pa != nullptr && pa->conflicts.count(b) > 0;
  }
};

enum class ScenarioKind { PlatoonFormation, Intersection };

struct VehicleSpec {
  int id = 0;
  Role role = Role::HDV;
  VehicleState initial;
  VehicleLimits limits;
  std::optional<DriverParams> driver;  // required for HDVs
  std::string path;                    // intersection scenarios only
};

struct SimParams {
  double dt = 0.01;       // s
  double horizon = 60.0;  // s
};

/// How the formation planner picks the transition duration.
struct FormationRequest {
  bool minimize = false;    // use the feasibility lower bound
  double tau_t = 0.0;       // requested transition duration when !minimize
  double tol_v = 0.1;       // formed-platoon speed tolerance, m/s
  double tol_delta = 0.05;  // formed-platoon gap-constancy tolerance, m
  double window = 5.0;      // verification window, s
  double check_margin = 0.0;  // verification starts at t_p + margin, s
};

/// A full scenario: geometry, the ordered vehicle list (leader first along a
/// lane), and integration parameters. Deterministic by construction.
struct Scenario {
  ScenarioKind kind = ScenarioKind::PlatoonFormation;
  RoadGeometry road;                  // formation scenarios
  IntersectionGeometry intersection;  // intersection scenarios
  std::vector<VehicleSpec> vehicles;
  SimParams sim;
  FormationRequest formation;

  bool validated = false;

  [[nodiscard]] std::size_t vehicle_count() const { return vehicles.size(); }
  [[nodiscard]] double vehicle_length() const {
    return kind == ScenarioKind::PlatoonFormation ? road.vehicle_length
                                                  : intersection.vehicle_length;
  }

  /// Index of the same-lane predecessor of vehicle i, or -1 for a leader.
  /// Ordering within a path follows the vehicle list (leader first).
  [[nodiscard]] int predecessor(std::size_t i) const {
    if (kind == ScenarioKind::PlatoonFormation)
      return i == 0 ? -1 : static_cast<int>(i) - 1;
    for (int j = static_cast<int>(i) - 1; j >= 0; --j)
      if (vehicles[static_cast<std::size_t>(j)].path == vehicles[i].path) return j;
    return -1;
  }
};

namespace detail {

inline void validate_limits(const VehicleLimits& lim, int vehicle_id) {
  const std::string tag = "vehicle " + std::to_string(vehicle_id) + ": ";
  if (!(lim.v_min > 0.0)) throw ScenarioError(tag + "v_min must be > 0");
  if (!(lim.v_min < lim.v_max)) throw ScenarioError(tag + "v_min must be < v_max");
  if (!(lim.u_min < 0.0)) throw ScenarioError(tag + "u_min must be < 0");
  if (!(lim.u_max > 0.0)) throw ScenarioError(tag + "u_max must be > 0");
}

inline void validate_driver(const DriverParams& d, int vehicle_id) {
  const std::string tag = "vehicle " + std::to_string(vehicle_id) + ": ";
  if (!(d.alpha > 0.0)) throw ScenarioError(tag + "alpha must be > 0");
  if (d.rho < 0.0) throw ScenarioError(tag + "rho must be >= 0");
  if (!(d.s0 > 0.0)) throw ScenarioError(tag + "s0 must be > 0");
  if (d.eta < 0.0) throw ScenarioError(tag + "eta must be >= 0");
  if (d.eta > d.eta_bar) throw ScenarioError(tag + "eta exceeds eta_bar");
  if (!(d.tau_r > 0.0)) throw ScenarioError(tag + "tau_r must be > 0");
}

}  // namespace detail

/// Checks every structural invariant and returns the scenario with derived
/// flags set. Idempotent: a validated scenario passes through unchanged.
inline Scenario validate_scenario(Scenario s) {
  if (s.validated) return s;

  if (!(s.sim.dt > 0.0)) throw ScenarioError("sim.dt must be > 0");
  if (!(s.sim.horizon > 0.0)) throw ScenarioError("sim.horizon must be > 0");
  if (s.vehicles.empty()) throw ScenarioError("scenario has no vehicles");

  if (s.kind == ScenarioKind::PlatoonFormation) {
    if (!(s.road.buffer_length > 0.0)) throw ScenarioError("buffer length must be > 0");
    if (!(s.road.control_length > 0.0)) throw ScenarioError("control length must be > 0");
    if (!(s.road.vehicle_length > 0.0)) throw ScenarioError("vehicle length must be > 0");
    if (s.vehicles.front().role != Role::CAV)
      throw ScenarioError("formation scenario must be led by a CAV");
    for (std::size_t i = 1; i < s.vehicles.size(); ++i)
      if (s.vehicles[i].role == Role::CAV)
        throw ScenarioError("formation scenario admits exactly one CAV (the leader)");
  } else {
    if (!(s.intersection.control_distance > 0.0)) throw ScenarioError("S_c must be > 0");
    if (!(s.intersection.merging_side > 0.0)) throw ScenarioError("S_m must be > 0");
    if (!(s.intersection.vehicle_length > 0.0)) throw ScenarioError("vehicle length must be > 0");
    if (s.intersection.paths.empty()) throw ScenarioError("intersection has no paths");
    for (const auto& p : s.intersection.paths) {
      if (p.conflicts.count(p.id) > 0)
        throw ScenarioError("path " + p.id + " conflicts with itself");
      for (const auto& c : p.conflicts) {
        const ApproachPath* other = s.intersection.find_path(c);
        if (other == nullptr)
          throw ScenarioError("path " + p.id + " conflicts with unknown path " + c);
        if (other->conflicts.count(p.id) == 0)
          throw ScenarioError("conflict relation not symmetric between " + p.id + " and " + c);
      }
    }
  }

  std::set<int> ids;
  std::map<std::string, int> lane_leader;  // path -> last seen index on that lane
  for (std::size_t i = 0; i < s.vehicles.size(); ++i) {
    const VehicleSpec& v = s.vehicles[i];
    if (!ids.insert(v.id).second)
      throw ScenarioError("duplicate vehicle id " + std::to_string(v.id));
    detail::validate_limits(v.limits, v.id);
    if (v.role == Role::HDV) {
      if (!v.driver)
        throw ScenarioError("vehicle " + std::to_string(v.id) + ": HDV without driver parameters");
      detail::validate_driver(*v.driver, v.id);
    } else if (v.driver) {
      detail::validate_driver(*v.driver, v.id);
    }
    if (v.initial.speed < 0.0)
      throw ScenarioError("vehicle " + std::to_string(v.id) + ": negative initial speed");

    if (s.kind == ScenarioKind::Intersection) {
      if (s.intersection.find_path(v.path) == nullptr)
        throw ScenarioError("vehicle " + std::to_string(v.id) + ": unknown path '" + v.path + "'");
      if (v.role == Role::HDV) {
        bool led = false;
        for (std::size_t j = 0; j < i; ++j)
          if (s.vehicles[j].path == v.path && s.vehicles[j].role == Role::CAV) led = true;
        if (!led)
          throw ScenarioError("vehicle " + std::to_string(v.id) + ": HDV with no CAV ahead on path " + v.path);
      }
    }

    const int pred = s.predecessor(i);
    if (pred >= 0) {
      const VehicleSpec& p = s.vehicles[static_cast<std::size_t>(pred)];
      if (p.initial.position == v.initial.position)
        throw ScenarioError("overlapping positions: vehicles " + std::to_string(p.id) +
                            " and " + std::to_string(v.id));
      if (p.initial.position < v.initial.position)
        throw ScenarioError("vehicle order violates leader-first positions: vehicles " +
                            std::to_string(p.id) + " and " + std::to_string(v.id));
      const double gap = p.initial.position - v.initial.position - s.vehicle_length();
      if (gap <= 0.0)
        throw ScenarioError("non-positive initial bumper gap between vehicles " +
                            std::to_string(p.id) + " and " + std::to_string(v.id));
    }
  }

  if (s.kind == ScenarioKind::PlatoonFormation && !s.formation.minimize &&
      !(s.formation.tau_t > 0.0))
    throw ScenarioError("formation.tau_t must be > 0 (or set formation.minimize)");

  s.validated = true;
  return s;
}

}  // namespace platoon

#endif  // PLATOON_CORE_HPP
