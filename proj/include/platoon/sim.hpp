#ifndef PLATOON_SIM_HPP
#define PLATOON_SIM_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "platoon/car_following.hpp"
#include "platoon/core.hpp"
#include "platoon/formation.hpp"
#include "platoon/log.hpp"
#include "platoon/scheduler.hpp"
#include "platoon/trajectory.hpp"

namespace platoon {

/// Time-ordered (t, p, v) samples of one vehicle, kept just long enough to
/// answer perception-delay lookups. Queries before the first sample return
/// the initial state (pre-history rule).
class HistoryBuffer {
public:
  HistoryBuffer() = default;
  HistoryBuffer(double span, const VehicleState& initial) : span_(span) {
    samples_.push_back({initial.time, initial.position, initial.speed});
  }

  void append(double t, double p, double v) {
    samples_.push_back({t, p, v});
    while (samples_.size() > 2 && samples_.front().t < t - span_ - 1e-12)
      samples_.pop_front();
  }

  [[nodiscard]] double current_time() const { return samples_.back().t; }

  [[nodiscard]] VehicleState lookup(double t_query) const {
    if (t_query > samples_.back().t + 1e-12)
      throw DomainError("lookup_delayed: query beyond current time");
    VehicleState out;
    out.time = t_query;
    if (t_query <= samples_.front().t) {
      out.position = samples_.front().p;
      out.speed = samples_.front().v;
      return out;
    }
    for (std::size_t i = samples_.size() - 1; i > 0; --i) {
      const Sample& hi = samples_[i];
      const Sample& lo = samples_[i - 1];
      if (t_query >= lo.t - 1e-15 && t_query <= hi.t + 1e-15) {
        const double w = (hi.t > lo.t) ? (t_query - lo.t) / (hi.t - lo.t) : 0.0;
        out.position = lo.p + w * (hi.p - lo.p);
        out.speed = lo.v + w * (hi.v - lo.v);
        return out;
      }
    }
    out.position = samples_.front().p;
    out.speed = samples_.front().v;
    return out;
  }

private:
  struct Sample {
    double t, p, v;
  };
  double span_ = 1.0;
  std::deque<Sample> samples_;
};

[[nodiscard]] inline VehicleState lookup_delayed(const HistoryBuffer& buf, double t_query) {
  return buf.lookup(t_query);
}

namespace detail {

enum class CavPhase { Approach, PlanControl, TrajectoryControl, Exited };

struct SimVehicle {
  const VehicleSpec* spec = nullptr;
  double p = 0.0;
  double v = 0.0;
  double v_next = 0.0;
  double u_cmd = 0.0;  // commanded accel after actuation clamp
  double u_eff = 0.0;  // realized accel after the speed clamp
  double u_raw = 0.0;  // pre-clamp car-following value
  int predecessor = -1;
  std::optional<DriverParams> effective_driver;  // CAV fallback for free-flow phases
  HistoryBuffer history;
  CavPhase phase = CavPhase::Approach;
  bool entered = false;
  std::optional<CubicTrajectory> traj;  // intersection control
};

}  // namespace detail

/// Aggregated per-run quantities derived from the log.
struct VehicleMetrics {
  int id = 0;
  std::optional<double> travel_time;  // time to reach the roadway end, s
  double control_energy = 0.0;        // half the squared-control integral
  std::optional<double> min_bumper_gap;
};

struct Metrics {
  std::vector<VehicleMetrics> vehicles;
  std::optional<double> formation_time;  // t_p - t_c when both events exist
};

struct RearEndViolation {
  double t = 0.0;
  int vehicle = 0;  // follower
  double gap = 0.0;
};

struct LateralViolation {
  double t = 0.0;
  int vehicle_a = 0;
  int vehicle_b = 0;
};

struct SafetyReport {
  std::vector<RearEndViolation> rear_end;
  std::vector<LateralViolation> lateral;

  [[nodiscard]] bool clean() const { return rear_end.empty() && lateral.empty(); }
};

struct SimResult {
  TrajectoryLog log;
  std::optional<PlatoonPlan> plan;           // formation runs
  std::optional<FormationCheck> formation;   // formation runs, when checkable
  CrossingSchedule schedule;                 // intersection runs
  bool feasible = true;
  std::string note;
};

namespace detail {

inline double ovm_control(const std::vector<SimVehicle>& world, std::size_t i, double t,
                          double vehicle_length, double* raw_out) {
  const SimVehicle& veh = world[i];
  const DriverParams& d = veh.spec->role == Role::HDV ? *veh.spec->driver
                                                      : *veh.effective_driver;
  const double t_delayed = t - d.eta;
  const VehicleState self = veh.history.lookup(t_delayed);
  DelayedInputs in;
  in.speed = self.speed;
  in.spacing = following_spacing(self.speed, d);
  if (veh.predecessor >= 0) {
    const VehicleState pred =
        world[static_cast<std::size_t>(veh.predecessor)].history.lookup(t_delayed);
    in.delta = pred.position - self.position - in.spacing - vehicle_length;
  } else {
    in.delta = kInf;
  }
  const double raw = hdv_acceleration_raw(in, d, veh.spec->limits.v_max);
  if (raw_out != nullptr) *raw_out = raw;
  return veh.spec->limits.clamp_accel(raw);
}

}  // namespace detail

/// Runs a validated scenario to its horizon on the fixed grid. Formation
/// runs synthesize the leader plan at control-zone entry; intersection runs
/// commit crossing schedules through the sequential coordinator as each
/// leader reaches its control-zone entry. Infeasibility is flagged on the
/// result and the log still covers the whole horizon.
[[nodiscard]] inline SimResult run_scenario(const Scenario& scenario_in) {
  const Scenario scenario = validate_scenario(scenario_in);
  const double dt = scenario.sim.dt;
  const std::size_t steps = static_cast<std::size_t>(std::llround(scenario.sim.horizon / dt));
  const double l_c = scenario.vehicle_length();
  const bool formation_kind = scenario.kind == ScenarioKind::PlatoonFormation;

  SimResult result;
  result.log.dt = dt;

  std::vector<detail::SimVehicle> world(scenario.vehicles.size());
  double max_eta_bar = 0.0;
  for (std::size_t i = 0; i < world.size(); ++i) {
    detail::SimVehicle& veh = world[i];
    veh.spec = &scenario.vehicles[i];
    veh.p = veh.spec->initial.position;
    veh.v = veh.spec->initial.speed;
    veh.predecessor = scenario.predecessor(i);
    if (veh.spec->driver) max_eta_bar = std::max(max_eta_bar, veh.spec->driver->eta_bar);
    VehicleLog vl;
    vl.id = veh.spec->id;
    vl.role = veh.spec->role;
    vl.path = veh.spec->path;
    vl.samples.reserve(steps + 1);
    result.log.vehicles.push_back(std::move(vl));
  }
  for (std::size_t i = 0; i < world.size(); ++i) {
    detail::SimVehicle& veh = world[i];
    if (veh.spec->role == Role::CAV) {
      if (veh.spec->driver) {
        veh.effective_driver = veh.spec->driver;
      } else {
        for (std::size_t j = i + 1; j < world.size(); ++j)
          if (scenario.predecessor(j) == static_cast<int>(i) ||
              scenario.vehicles[j].path == veh.spec->path) {
            if (scenario.vehicles[j].driver) veh.effective_driver = scenario.vehicles[j].driver;
            break;
          }
      }
    }
    VehicleState init = veh.spec->initial;
    init.time = 0.0;
    veh.history = HistoryBuffer(max_eta_bar + 2.0 * dt, init);
  }

  std::optional<PlatoonPlan> plan;
  std::vector<bool> gap_closed(world.size(), false);
  std::vector<bool> merging_entered(world.size(), false), merging_exited(world.size(), false);
  bool ts_marked = false, tp_marked = false, tf_marked = false;

  const double entry_boundary = formation_kind ? scenario.road.buffer_length : 0.0;
  const double exit_boundary = formation_kind ? scenario.road.total_length()
                                              : scenario.intersection.merging_exit();

  if (formation_kind)
    result.log.events.push_back({"buffer_entry", scenario.vehicles.front().id, 0.0});

  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = static_cast<double>(k) * dt;

    // Zone events and control-mode transitions, on the first grid sample at
    // or after each crossing.
    for (std::size_t i = 0; i < world.size(); ++i) {
      detail::SimVehicle& veh = world[i];
      if (veh.spec->role == Role::CAV && !veh.entered && veh.p >= entry_boundary) {
        veh.entered = true;
        result.log.events.push_back({"control_zone_entry", veh.spec->id, t});
        if (formation_kind) {
          std::vector<VehicleState> states;
          for (const auto& w : world) states.push_back({w.p, w.v, w.u_applied, t});
          plan = formation_plan(scenario, states, t, scenario.formation);
          result.plan = plan;
          if (!plan->feasible) {
            result.feasible = false;
            result.note = plan->reason;
            veh.phase = detail::CavPhase::Approach;
          } else {
            veh.phase = detail::CavPhase::PlanControl;
          }
        } else {
          Arrival arr;
          arr.vehicle_id = veh.spec->id;
          arr.path = veh.spec->path;
          arr.t0 = t;
          arr.v0 = veh.v;
          arr.u0 = veh.u_applied;
          arr.limits = veh.spec->limits;
          double s0_ref = veh.spec->driver ? veh.spec->driver->s0 : 0.0;
          for (std::size_t j = i + 1; j < world.size(); ++j) {
            if (scenario.vehicles[j].role != Role::HDV) break;
            if (scenario.vehicles[j].path != veh.spec->path) continue;
            arr.followers.push_back(*scenario.vehicles[j].driver);
            if (s0_ref == 0.0) s0_ref = scenario.vehicles[j].driver->s0;
          }
          arr.rear_gap = (s0_ref > 0.0 ? s0_ref : 2.0) + l_c;
          try {
            const ScheduleEntry& entry = schedule_arrival(result.schedule, scenario.intersection,
                                                          arr, scenario.sim.horizon);
            veh.traj = entry.traj;
            veh.phase = detail::CavPhase::TrajectoryControl;
          } catch (const DomainError& e) {
            result.feasible = false;
            result.note = e.what();
            veh.phase = detail::CavPhase::Approach;
          }
        }
      }
      if (!merging_entered[i] && !formation_kind &&
          veh.p >= scenario.intersection.merging_entry()) {
        merging_entered[i] = true;
        result.log.events.push_back({"merging_entry", veh.spec->id, t});
      }
      if (!merging_exited[i] && !formation_kind &&
          veh.p - l_c >= scenario.intersection.merging_exit()) {
        merging_exited[i] = true;
        result.log.events.push_back({"merging_exit", veh.spec->id, t});
      }
      if (veh.spec->role == Role::CAV && veh.phase != detail::CavPhase::Exited &&
          veh.entered && veh.p >= exit_boundary) {
        veh.phase = detail::CavPhase::Exited;
        if (formation_kind && !tf_marked) {
          tf_marked = true;
          result.log.events.push_back({"control_zone_exit", veh.spec->id, t});
        }
      }
    }
    if (plan && plan->feasible) {
      if (!ts_marked && t >= plan->t_s) {
        ts_marked = true;
        result.log.events.push_back({"transition_end", scenario.vehicles.front().id, t});
      }
      if (!tp_marked && t >= plan->t_p) {
        tp_marked = true;
        result.log.events.push_back({"formation", scenario.vehicles.front().id, t});
      }
    }

    // Controls at the current time.
    for (std::size_t i = 0; i < world.size(); ++i) {
      detail::SimVehicle& veh = world[i];
      if (veh.spec->role == Role::HDV) {
        veh.u_cmd = detail::ovm_control(world, i, t, l_c, &veh.u_raw);
        continue;
      }
      switch (veh.phase) {
        case detail::CavPhase::PlanControl:
          veh.u_raw = cav_control(t, *plan);
          veh.u_cmd = veh.u_raw;
          break;
        case detail::CavPhase::TrajectoryControl:
          if (t <= veh.traj->tf) {
            veh.u_raw = veh.traj->control(t);
            veh.u_cmd = veh.u_raw;
            break;
          }
          veh.phase = detail::CavPhase::Exited;
          [[fallthrough]];
        case detail::CavPhase::Approach:
        case detail::CavPhase::Exited:
          if (veh.effective_driver) {
            veh.u_cmd = detail::ovm_control(world, i, t, l_c, &veh.u_raw);
          } else {
            veh.u_raw = 0.0;
            veh.u_cmd = 0.0;
          }
          break;
      }
    }

    // Semi-implicit update staged first so the logged applied control is the
    // realized acceleration after the speed clamp. Vehicles already in the
    // admissible band never drop below v_min; slower ones may speed up into
    // it but never reverse.
    for (detail::SimVehicle& veh : world) {
      const VehicleLimits& lim = veh.spec->limits;
      double v_new = veh.v + veh.u_cmd * dt;
      const double floor = (veh.v >= lim.v_min) ? lim.v_min : 0.0;
      v_new = std::min(std::max(v_new, floor), lim.v_max);
      veh.v_next = v_new;
      veh.u_eff = (v_new - veh.v) / dt;
    }

    // Log rows at time t.
    for (std::size_t i = 0; i < world.size(); ++i) {
      const detail::SimVehicle& veh = world[i];
      SampleRow row;
      row.t = t;
      row.p = veh.p;
      row.v = veh.v;
      row.u_applied = veh.u_eff;
      row.u_raw = veh.u_raw;
      const DriverParams* d = veh.spec->driver ? &*veh.spec->driver
                              : veh.effective_driver ? &*veh.effective_driver
                                                     : nullptr;
      row.spacing = d != nullptr ? following_spacing(veh.v, *d) : 0.0;
      if (veh.predecessor >= 0 && d != nullptr) {
        const detail::SimVehicle& pred = world[static_cast<std::size_t>(veh.predecessor)];
        row.delta = pred.p - veh.p - row.spacing - l_c;
      } else {
        row.delta = kInf;
      }
      row.mode = classify_mode(row.delta);
      result.log.vehicles[i].samples.push_back(row);
      if (!gap_closed[i] && veh.predecessor >= 0 && row.delta <= 0.0) {
        gap_closed[i] = true;
        result.log.events.push_back({"gap_closed", veh.spec->id, t});
      }
    }

    if (k < steps) {
      for (detail::SimVehicle& veh : world) {
        veh.v = veh.v_next;
        veh.p += veh.v * dt;
        veh.history.append(t + dt, veh.p, veh.v);
      }
    }
  }

  if (formation_kind && plan && plan->feasible) {
    const FormationRequest& req = scenario.formation;
    if (plan->t_p + req.window <= scenario.sim.horizon + 1e-9) {
      result.formation = check_platoon_formed(result.log, plan->t_p, req.tol_v, req.tol_delta,
                                              req.window);
      if (!result.formation->formed) {
        result.feasible = false;
        result.note = "platoon not formed: " + result.formation->report;
      }
    } else {
      result.feasible = false;
      result.note = "not formed within horizon";
    }
  }
  return result;
}

/// Scans a completed log for rear-end contacts (bumper-to-bumper gap <= 0
/// against the same-lane predecessor) and, for intersection runs, lateral
/// conflicts (two vehicles on conflicting paths with their bodies inside the
/// merging zone at the same sample).
[[nodiscard]] inline SafetyReport safety_monitor(const TrajectoryLog& log,
                                                 const Scenario& scenario) {
  SafetyReport report;
  const double l_c = scenario.vehicle_length();
  if (log.vehicles.empty()) return report;
  const std::size_t n_samples = log.vehicles.front().samples.size();

  for (std::size_t i = 0; i < log.vehicles.size(); ++i) {
    const int pred = scenario.predecessor(i);
    if (pred < 0) continue;
    const auto& self = log.vehicles[i].samples;
    const auto& ahead = log.vehicles[static_cast<std::size_t>(pred)].samples;
    for (std::size_t k = 0; k < n_samples; ++k) {
      const double gap = ahead[k].p - self[k].p - l_c;
      if (gap <= 0.0)
        report.rear_end.push_back({self[k].t, log.vehicles[i].id, gap});
    }
  }

  if (scenario.kind == ScenarioKind::Intersection) {
    const double z_lo = scenario.intersection.merging_entry();
    const double z_hi = scenario.intersection.merging_exit();
    for (std::size_t k = 0; k < n_samples; ++k) {
      for (std::size_t a = 0; a < log.vehicles.size(); ++a) {
        const double pa = log.vehicles[a].samples[k].p;
        const bool in_a = pa > z_lo && pa - l_c < z_hi;
        if (!in_a) continue;
        for (std::size_t b = a + 1; b < log.vehicles.size(); ++b) {
          if (!scenario.intersection.conflicting(log.vehicles[a].path, log.vehicles[b].path))
            continue;
          const double pb = log.vehicles[b].samples[k].p;
          if (pb > z_lo && pb - l_c < z_hi)
            report.lateral.push_back(
                {log.vehicles[a].samples[k].t, log.vehicles[a].id, log.vehicles[b].id});
        }
      }
    }
  }
  return report;
}

/// Trapezoidal control energy, zone travel times, and minimum bumper gaps.
/// Metrics whose defining events never happened are reported absent.
[[nodiscard]] inline Metrics compute_metrics(const TrajectoryLog& log, const Scenario& scenario) {
  Metrics metrics;
  const double l_c = scenario.vehicle_length();
  const double end_position = scenario.kind == ScenarioKind::PlatoonFormation
                                  ? scenario.road.total_length()
                                  : scenario.intersection.merging_exit();

  for (std::size_t i = 0; i < log.vehicles.size(); ++i) {
    const VehicleLog& veh = log.vehicles[i];
    VehicleMetrics m;
    m.id = veh.id;

    double energy = 0.0;
    for (std::size_t k = 0; k + 1 < veh.samples.size(); ++k) {
      const double ua = veh.samples[k].u_applied, ub = veh.samples[k + 1].u_applied;
      energy += 0.25 * (ua * ua + ub * ub) * log.dt;
    }
    m.control_energy = energy;

    for (const SampleRow& row : veh.samples)
      if (row.p >= end_position) {
        m.travel_time = row.t - veh.samples.front().t;
        break;
      }

    const int pred = scenario.predecessor(i);
    if (pred >= 0) {
      double worst = kInf;
      const auto& ahead = log.vehicles[static_cast<std::size_t>(pred)].samples;
      for (std::size_t k = 0; k < veh.samples.size(); ++k)
        worst = std::min(worst, ahead[k].p - veh.samples[k].p - l_c);
      m.min_bumper_gap = worst;
    }
    metrics.vehicles.push_back(std::move(m));
  }

  const auto t_c = log.event_time("control_zone_entry");
  const auto t_p = log.event_time("formation");
  if (t_c && t_p) metrics.formation_time = *t_p - *t_c;
  return metrics;
}

}  // namespace platoon

#endif  // PLATOON_SIM_HPP
