#ifndef PLATOON_FORMATION_HPP
#define PLATOON_FORMATION_HPP

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "platoon/car_following.hpp"
#include "platoon/core.hpp"
#include "platoon/log.hpp"

namespace platoon {

/// Synthesized leader control for forming a platoon with the trailing
/// vehicles: constant deceleration u_p over [t_c, t_s], zero afterwards,
/// with the stabilization interval [t_s, t_p] left to the followers.
struct PlatoonPlan {
  double u_p = 0.0;    // m/s^2, in [u_min, 0)
  double tau_t = 0.0;  // transition duration, s
  double tau_s = 0.0;  // stabilization duration eta_bar + tau_r, s
  double t_c = 0.0;    // control-zone entry, s
  double t_s = 0.0;    // transition end = t_c + tau_t
  double t_p = 0.0;    // formation time = t_s + tau_s

  double governing_gap = 0.0;  // gap the transition relation was solved for, m
  double v1_entry = 0.0;       // leader speed at t_c, m/s
  double v_transition_end = 0.0;
  double tau_lb = 0.0;  // feasible transition-duration window
  double tau_ub = 0.0;

  bool feasible = false;
  std::string reason;  // empty when feasible
};

/// Transition relation 2*delta + u_p * tau^2 = 0 solved for the control.
[[nodiscard]] inline double solve_transition_control(double delta2_tc, double tau_t) {
  if (!(delta2_tc > 0.0))
    throw DomainError("already coupled, no transition control required");
  if (!(tau_t > 0.0)) throw DomainError("transition duration must be positive");
  return -2.0 * delta2_tc / (tau_t * tau_t);
}

/// Transition relation solved for the duration.
[[nodiscard]] inline double solve_transition_duration(double delta2_tc, double u_p) {
  if (!(delta2_tc > 0.0))
    throw DomainError("already coupled, no transition control required");
  if (u_p >= 0.0)
    throw DomainError("infeasible: platoon formation requires deceleration");
  return std::sqrt(-2.0 * delta2_tc / u_p);
}

/// Smallest admissible transition duration: the deceleration bound and the
/// minimum-speed bound, max of the two.
[[nodiscard]] inline double min_feasible_transition(double delta2_tc, const VehicleLimits& lim,
                                                    double v1_tc) {
  if (!(delta2_tc > 0.0))
    throw DomainError("already coupled, no transition control required");
  if (v1_tc <= lim.v_min) throw DomainError("no feasible deceleration window");
  const double by_control = std::sqrt(-2.0 * delta2_tc / lim.u_min);
  const double by_speed = 2.0 * delta2_tc / (v1_tc - lim.v_min);
  return std::max(by_control, by_speed);
}

/// Largest transition duration keeping the leader inside the control zone
/// through t_p: distance(tau) = v1*tau - delta + (v1 - 2*delta/tau)*tau_s
/// is increasing in tau; solve distance = L_c.
[[nodiscard]] inline double max_transition_for_zone(double delta, double v1_tc, double tau_s,
                                                    double control_length) {
  // v1*tau^2 + (v1*tau_s - delta - L_c)*tau - 2*delta*tau_s = 0, unique
  // positive root (the constant term is non-positive).
  const double a = v1_tc;
  const double b = v1_tc * tau_s - delta - control_length;
  const double c = -2.0 * delta * tau_s;
  const double disc = b * b - 4.0 * a * c;
  return (-b + std::sqrt(std::max(0.0, disc))) / (2.0 * a);
}

/// Leader control value under a committed plan.
[[nodiscard]] inline double cav_control(double t, const PlatoonPlan& plan) {
  return (t >= plan.t_c && t <= plan.t_s) ? plan.u_p : 0.0;
}

/// Cumulative platoon gap: leader-to-tail span minus the desired spacings and
/// vehicle lengths of every follower. Equals the sum of individual gaps.
[[nodiscard]] inline double cumulative_gap(const std::vector<VehicleState>& states,
                                           const std::vector<DriverParams>& follower_params,
                                           double vehicle_length) {
  if (states.size() < 2) throw DomainError("cumulative_gap: need at least two vehicles");
  if (follower_params.size() + 1 != states.size())
    throw DomainError("cumulative_gap: one parameter set per follower required");
  double sum = states.front().position - states.back().position;
  for (std::size_t j = 1; j < states.size(); ++j)
    sum -= following_spacing(states[j].speed, follower_params[j - 1]) + vehicle_length;
  return sum;
}

namespace detail {

/// The transition relation is exact for one trailing vehicle. With more, the
/// leader must absorb the worst pending chain of gaps (partial sums of
/// delta_j), which reduces to delta_2 for a single follower and to the
/// cumulative gap when every trailing gap is open.
[[nodiscard]] inline double governing_gap(const std::vector<double>& deltas) {
  double chain = 0.0, worst = -kInf;
  for (double d : deltas) {
    chain += d;
    worst = std::max(worst, chain);
  }
  return worst;
}

}  // namespace detail

/// Synthesizes the leader's formation plan from the vehicle states observed
/// at control-zone entry. Infeasibility is reported in the returned verdict
/// rather than thrown, so callers can log and surface the reason.
[[nodiscard]] inline PlatoonPlan formation_plan(const Scenario& scenario,
                                                const std::vector<VehicleState>& at_entry,
                                                double t_c, const FormationRequest& request) {
  constexpr double kEntrySpeedTol = 1e-3;  // m/s, buffer-zone steady-state check

  PlatoonPlan plan;
  plan.t_c = t_c;

  const std::size_t n = scenario.vehicles.size();
  if (at_entry.size() != n) throw DomainError("formation_plan: state/spec size mismatch");
  if (n < 2) {
    plan.reason = "no trailing vehicles to platoon";
    return plan;
  }

  const VehicleLimits& lim = scenario.vehicles.front().limits;
  plan.v1_entry = at_entry.front().speed;

  // Entry conditions: every vehicle cruising at v_max, tail gap still open.
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(at_entry[i].speed - lim.v_max) > kEntrySpeedTol) {
      std::ostringstream os;
      os << "entry conditions violated: vehicle " << scenario.vehicles[i].id
         << " not at v_max";
      plan.reason = os.str();
      return plan;
    }
  }

  std::vector<double> deltas;
  for (std::size_t i = 1; i < n; ++i) {
    deltas.push_back(platoon_gap(at_entry[i - 1].position, at_entry[i].position,
                                 at_entry[i].speed, *scenario.vehicles[i].driver,
                                 scenario.vehicle_length()));
  }
  if (deltas.back() <= 0.0) {
    plan.reason = "entry conditions violated: tail gap already closed";
    return plan;
  }
  plan.governing_gap = detail::governing_gap(deltas);
  if (plan.governing_gap <= 0.0) {
    plan.reason = "already coupled";
    return plan;
  }

  double tau_s = 0.0;
  for (std::size_t i = 1; i < n; ++i)
    tau_s = std::max(tau_s, scenario.vehicles[i].driver->eta_bar +
                                scenario.vehicles[i].driver->tau_r);
  plan.tau_s = tau_s;

  double tau_lb = 0.0;
  try {
    tau_lb = min_feasible_transition(plan.governing_gap, lim, plan.v1_entry);
  } catch (const DomainError& e) {
    plan.reason = e.what();
    return plan;
  }
  plan.tau_lb = tau_lb;
  plan.tau_ub = max_transition_for_zone(plan.governing_gap, plan.v1_entry, tau_s,
                                        scenario.road.control_length);
  if (plan.tau_ub < plan.tau_lb - 1e-12) {
    plan.reason = "no transition duration satisfies both the feasibility bound "
                  "and the control-zone length";
    return plan;
  }

  plan.tau_t = request.minimize ? tau_lb : request.tau_t;
  plan.u_p = solve_transition_control(plan.governing_gap, plan.tau_t);
  plan.t_s = plan.t_c + plan.tau_t;
  plan.t_p = plan.t_s + plan.tau_s;
  plan.v_transition_end = plan.v1_entry + plan.u_p * plan.tau_t;

  constexpr double kTol = 1e-9;
  if (plan.u_p < lim.u_min - kTol) {
    plan.reason = "transition control exceeds deceleration limit";
    return plan;
  }
  if (plan.v_transition_end < lim.v_min - kTol) {
    plan.reason = "leader speed would drop below v_min";
    return plan;
  }
  const double travel = plan.v1_entry * plan.tau_t - plan.governing_gap +
                        plan.v_transition_end * plan.tau_s;
  if (travel > scenario.road.control_length + kTol) {
    plan.reason = "formation would complete beyond the control zone";
    return plan;
  }

  plan.feasible = true;
  return plan;
}

struct FormationCheck {
  bool formed = false;
  std::string report;
};

/// Verifies the formed-platoon conditions over [t_from, t_from + window]:
/// follower speeds within tol_v of the leader, every gap non-positive, and
/// every gap constant to within tol_delta of its window mean.
[[nodiscard]] inline FormationCheck check_platoon_formed(const TrajectoryLog& log, double t_from,
                                                         double tol_v, double tol_delta,
                                                         double window) {
  FormationCheck out;
  if (log.vehicles.empty() || log.vehicles.front().samples.empty())
    throw DomainError("check_platoon_formed: empty log");
  if (t_from + window > log.end_time() + 1e-9)
    throw DomainError("check_platoon_formed: window exceeds log horizon");

  const std::size_t lo = log.index_at(t_from);
  const std::size_t hi = log.index_at(t_from + window);
  const VehicleLog& leader = log.vehicles.front();

  std::ostringstream os;
  bool ok = true;
  for (std::size_t vi = 1; vi < log.vehicles.size(); ++vi) {
    const VehicleLog& veh = log.vehicles[vi];
    double worst_dv = 0.0, worst_delta = -kInf;
    double mean = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      worst_dv = std::max(worst_dv, std::abs(veh.samples[k].v - leader.samples[k].v));
      worst_delta = std::max(worst_delta, veh.samples[k].delta);
      mean += veh.samples[k].delta;
    }
    mean /= static_cast<double>(hi - lo + 1);
    double worst_dev = 0.0;
    for (std::size_t k = lo; k <= hi; ++k)
      worst_dev = std::max(worst_dev, std::abs(veh.samples[k].delta - mean));

    if (worst_dv > tol_v) {
      ok = false;
      os << "vehicle " << veh.id << ": speed deviates from leader by " << worst_dv << " m/s; ";
    }
    if (worst_delta > 1e-12) {
      ok = false;
      os << "vehicle " << veh.id << ": gap positive (" << worst_delta << " m); ";
    }
    if (worst_dev > tol_delta) {
      ok = false;
      os << "vehicle " << veh.id << ": gap drifts by " << worst_dev << " m; ";
    }
  }
  out.formed = ok;
  out.report = ok ? "platoon formed" : os.str();
  return out;
}

}  // namespace platoon

#endif  // PLATOON_FORMATION_HPP
