#ifndef PLATOON_SCHEDULER_HPP
#define PLATOON_SCHEDULER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "platoon/core.hpp"
#include "platoon/trajectory.hpp"

namespace platoon {

/// Rigid-chain model of a committed predecessor platoon on the same lane:
/// tail position = leader position - (rho_sum * leader speed + fixed_sum).
struct PredecessorTrack {
  CubicTrajectory leader;
  double rho_sum = 0.0;    // sum of follower time gaps, s
  double fixed_sum = 0.0;  // sum of follower (s0 + l_c), m

  [[nodiscard]] double tail_position(double t) const {
    return leader.position(t) - (rho_sum * leader.speed(t) + fixed_sum);
  }
};

/// Data defining one upper-level solve. Positions are measured from the
/// control-zone entry of the vehicle's own path: p_m is the merging-zone
/// entry (S_c) and p_f its exit (S_c + S_m).
struct UpperLevelProblem {
  double t0 = 0.0;
  double v0 = 0.0;
  double u0 = 0.0;  // entry acceleration, recorded for the schedule report
  double p_m = 0.0;
  double p_f = 0.0;
  double t_slot = -kInf;   // earliest admissible merging-zone entry
  double t_clear = -kInf;  // earliest admissible merging-zone exit
  VehicleLimits limits;
  std::optional<PredecessorTrack> predecessor;
  double rear_gap = 6.0;  // s0 + l_c safety margin against the predecessor
};

using DecisionVector = Eigen::Matrix<double, 6, 1>;  // (phi3..phi0, t_m, t_f)

/// The five equality and seven inequality residuals of the upper-level
/// problem over x = (phi3, phi2, phi1, phi0, t_m, t_f), with gradients in
/// closed form. Feasible means h = 0 and g <= 0.
struct ConstraintSet {
  UpperLevelProblem data;

  static constexpr std::array<const char*, 5> equality_names = {
      "position_entry", "speed_entry", "position_merging", "position_exit",
      "control_exit"};
  static constexpr std::array<const char*, 7> inequality_names = {
      "speed_upper", "speed_lower", "control_upper", "control_lower",
      "rear_end", "merging_not_early", "exit_clearance"};

  [[nodiscard]] static CubicTrajectory cubic_of(const DecisionVector& x, double t0) {
    return CubicTrajectory{x[0], x[1], x[2], x[3], t0, x[5]};
  }

  [[nodiscard]] double equality(int r, const DecisionVector& x) const {
    const CubicTrajectory c = cubic_of(x, data.t0);
    switch (r) {
      case 0: return c.position(data.t0);
      case 1: return c.speed(data.t0) - data.v0;
      case 2: return c.position(x[4]) - data.p_m;
      case 3: return c.position(x[5]) - data.p_f;
      case 4: return c.control(x[5]);
    }
    throw DomainError("equality index out of range");
  }

  [[nodiscard]] DecisionVector equality_gradient(int r, const DecisionVector& x) const {
    const CubicTrajectory c = cubic_of(x, data.t0);
    DecisionVector g = DecisionVector::Zero();
    auto poly_grad = [&](double t) {
      g[0] = t * t * t;
      g[1] = t * t;
      g[2] = t;
      g[3] = 1.0;
    };
    switch (r) {
      case 0: poly_grad(data.t0); return g;
      case 1:
        g[0] = 3.0 * data.t0 * data.t0;
        g[1] = 2.0 * data.t0;
        g[2] = 1.0;
        return g;
      case 2: poly_grad(x[4]); g[4] = c.speed(x[4]); return g;
      case 3: poly_grad(x[5]); g[5] = c.speed(x[5]); return g;
      case 4:
        g[0] = 6.0 * x[5];
        g[1] = 2.0;
        g[5] = 6.0 * x[0];
        return g;
    }
    throw DomainError("equality index out of range");
  }

  /// Time of the speed extremum used by the speed-band residuals.
  [[nodiscard]] double speed_extremum_time(const DecisionVector& x, bool maximum) const {
    const CubicTrajectory c = cubic_of(x, data.t0);
    double best_t = data.t0;
    double best_v = c.speed(data.t0);
    auto consider = [&](double t) {
      const double v = c.speed(t);
      if (maximum ? v > best_v : v < best_v) {
        best_v = v;
        best_t = t;
      }
    };
    consider(x[5]);
    if (x[0] != 0.0) {
      const double tv = -x[1] / (3.0 * x[0]);
      if (tv > data.t0 && tv < x[5]) consider(tv);
    }
    return best_t;
  }

  static constexpr int kRearGrid = 64;

  [[nodiscard]] double rear_end_residual(const DecisionVector& x, double* arg_t = nullptr) const {
    if (!data.predecessor) return -kInf;
    const PredecessorTrack& pred = *data.predecessor;
    const double lo = std::max(data.t0, pred.leader.t0);
    const double hi = std::min(x[5], pred.leader.tf);
    if (hi <= lo) return -kInf;
    const CubicTrajectory c = cubic_of(x, data.t0);
    double worst = -kInf, worst_t = lo;
    for (int k = 0; k < kRearGrid; ++k) {
      const double t = lo + (hi - lo) * k / (kRearGrid - 1);
      const double r = data.rear_gap + c.position(t) - pred.tail_position(t);
      if (r > worst) {
        worst = r;
        worst_t = t;
      }
    }
    if (arg_t != nullptr) *arg_t = worst_t;
    return worst;
  }

  [[nodiscard]] double inequality(int m, const DecisionVector& x) const {
    const CubicTrajectory c = cubic_of(x, data.t0);
    switch (m) {
      case 0: return c.speed(speed_extremum_time(x, true)) - data.limits.v_max;
      case 1: return data.limits.v_min - c.speed(speed_extremum_time(x, false));
      case 2: return std::max(c.control(data.t0), c.control(x[5])) - data.limits.u_max;
      case 3: return data.limits.u_min - std::min(c.control(data.t0), c.control(x[5]));
      case 4: return rear_end_residual(x);
      case 5: return data.t_slot - x[4];
      case 6: return data.t_clear - x[5];
    }
    throw DomainError("inequality index out of range");
  }

  [[nodiscard]] DecisionVector inequality_gradient(int m, const DecisionVector& x) const {
    const CubicTrajectory c = cubic_of(x, data.t0);
    DecisionVector g = DecisionVector::Zero();
    auto speed_grad = [&](double t, double sign) {
      g[0] = sign * 3.0 * t * t;
      g[1] = sign * 2.0 * t;
      g[2] = sign;
      // Envelope: dv/dt = 0 at an interior extremum; u(t_f) at the endpoint.
      if (t == x[5]) g[5] = sign * c.control(t);
    };
    auto control_grad = [&](double t, double sign) {
      g[0] = sign * 6.0 * t;
      g[1] = sign * 2.0;
      if (t == x[5]) g[5] = sign * 6.0 * x[0];
    };
    switch (m) {
      case 0: speed_grad(speed_extremum_time(x, true), 1.0); return g;
      case 1: speed_grad(speed_extremum_time(x, false), -1.0); return g;
      case 2: {
        const double t = c.control(data.t0) >= c.control(x[5]) ? data.t0 : x[5];
        control_grad(t, 1.0);
        return g;
      }
      case 3: {
        const double t = c.control(data.t0) <= c.control(x[5]) ? data.t0 : x[5];
        control_grad(t, -1.0);
        return g;
      }
      case 4: {
        double t = data.t0;
        if (rear_end_residual(x, &t) == -kInf) return g;
        g[0] = t * t * t;
        g[1] = t * t;
        g[2] = t;
        g[3] = 1.0;
        return g;
      }
      case 5: g[4] = -1.0; return g;
      case 6: g[5] = -1.0; return g;
    }
    throw DomainError("inequality index out of range");
  }
};

/// Builds the constraint set for one arriving vehicle. t_m is the earliest
/// admissible merging-entry time handed down by the coordinator slot; the
/// realized merging time is a decision variable bounded below by it.
[[nodiscard]] inline ConstraintSet build_constraints(double t0, double v0, double u0,
                                                     double t_m, double p_m, double p_f,
                                                     const VehicleLimits& limits,
                                                     std::optional<PredecessorTrack> predecessor,
                                                     double rear_gap, double t_clear = -kInf) {
  if (!(p_m > 0.0) || !(p_f > p_m)) throw DomainError("geometry inconsistency: need 0 < p_m < p_f");
  if (t_m > t0 || t_m == -kInf) {
    // admissible: slot in the future or unconstrained
  } else {
    throw DomainError("geometry inconsistency: slot time precedes entry");
  }
  ConstraintSet cs;
  cs.data.t0 = t0;
  cs.data.v0 = v0;
  cs.data.u0 = u0;
  cs.data.p_m = p_m;
  cs.data.p_f = p_f;
  cs.data.t_slot = t_m;
  cs.data.t_clear = t_clear;
  cs.data.limits = limits;
  cs.data.predecessor = std::move(predecessor);
  cs.data.rear_gap = rear_gap;
  return cs;
}

/// Exit time of the trajectory encoded by x (the objective of the upper
/// level): the Cardano-inverted time at the merging-zone exit position.
[[nodiscard]] inline double objective_f(const CubicTrajectory& traj, double p_f) {
  return time_at_position(traj, p_f);
}

struct KktReport {
  double stationarity = 0.0;
  double primal_equality = 0.0;
  double primal_inequality = 0.0;
  double complementarity = 0.0;

  [[nodiscard]] double max_residual() const {
    return std::max({stationarity, primal_equality, primal_inequality, complementarity});
  }
};

struct UpperSolution {
  CubicTrajectory traj;
  double t_m = 0.0;
  double t_f = 0.0;
  KktReport kkt;
  std::vector<std::string> active;
  Eigen::VectorXd multipliers;  // equality then active inequality multipliers
  int iterations = 0;
};

class InfeasibleError : public DomainError {
public:
  explicit InfeasibleError(const std::string& what) : DomainError(what) {}
};

namespace detail {

/// Transversal cubic through (t0: p=0, v0) reaching p_f at t_f with zero
/// terminal control, as raw coefficients (no window checks).
inline CubicTrajectory transversal_cubic(double t0, double v0, double p_f, double t_f) {
  const double T = t_f - t0;
  const double D = p_f - v0 * T;
  return from_shifted(t0, -D / (2.0 * T * T * T), 1.5 * D / (T * T), v0, 0.0, t0, t_f);
}

}  // namespace detail

/// Minimizes the control-zone exit time over the one-parameter family of
/// transversal cubics cut out by the equality constraints. Every inequality
/// relaxes as the exit time grows except the deceleration-side pair, which
/// caps it; the optimum is the largest lower critical point, certified by a
/// KKT check with multipliers recovered by least squares. Throws
/// InfeasibleError when the floors exceed the caps.
[[nodiscard]] inline UpperSolution solve_upper(const std::optional<CubicTrajectory>& initial_guess,
                                               const ConstraintSet& cs) {
  constexpr int kMaxIter = 500;
  constexpr double kTol = 1e-12;
  const UpperLevelProblem& d = cs.data;
  const VehicleLimits& lim = d.limits;
  if (!(d.v0 >= lim.v_min - 1e-9) || !(d.v0 <= lim.v_max + 1e-9))
    throw InfeasibleError("entry speed outside the admissible band");

  const double t0 = d.t0, v0 = d.v0, p_f = d.p_f;

  // Hard floor: cannot beat top speed over the whole distance.
  double t_f = t0 + p_f / lim.v_max;

  // Closed-form floors from the accelerating-side constraints.
  if (lim.v_max > v0) {
    const double T_vmax = 3.0 * p_f / (2.0 * lim.v_max + v0);  // v(t_f) = v_max
    t_f = std::max(t_f, t0 + T_vmax);
  }
  {
    // u(t0) = u_max: u_max*T^2 + 3 v0 T - 3 p_f = 0.
    const double disc = 9.0 * v0 * v0 + 12.0 * lim.u_max * p_f;
    const double T_umax = (-3.0 * v0 + std::sqrt(disc)) / (2.0 * lim.u_max);
    t_f = std::max(t_f, t0 + T_umax);
  }
  if (d.t_clear > -kInf) t_f = std::max(t_f, d.t_clear);

  auto residual_at = [&](int m, double tf_cand) {
    DecisionVector x;
    const CubicTrajectory c = detail::transversal_cubic(t0, v0, p_f, tf_cand);
    x << c.phi3, c.phi2, c.phi1, c.phi0, 0.0, tf_cand;
    if (m == 5) {
      // merging-entry residual needs the realized merging time
      x[4] = time_at_position(c, d.p_m);
    }
    return cs.inequality(m, x);
  };

  int iterations = 0;
  // Monotone floors without closed forms: merging slot and rear end.
  for (int m : {5, 4}) {
    if (m == 5 && !(d.t_slot > -kInf)) continue;
    if (m == 4 && !d.predecessor) continue;
    if (residual_at(m, t_f) <= kTol) continue;
    double lo = t_f, hi = t_f;
    double step = std::max(1.0, 0.05 * (t_f - t0));
    while (residual_at(m, hi) > 0.0) {
      lo = hi;
      hi += step;
      step *= 2.0;
      if (++iterations > kMaxIter)
        throw InfeasibleError("iteration cap exceeded while bracketing a feasible exit time");
    }
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (residual_at(m, mid) > 0.0 ? lo : hi) = mid;
    }
    t_f = std::max(t_f, hi);
  }

  // Deceleration-side caps.
  const double T = t_f - t0;
  const double T_vmin = 3.0 * p_f / (2.0 * lim.v_min + v0);  // v(t_f) = v_min
  if (T > T_vmin + 1e-9)
    throw InfeasibleError("infeasible constraint set: required exit time drives speed below v_min");
  {
    // u(t0) >= u_min excludes an interval of exit times when the entry
    // deceleration would have to exceed the bound.
    const double disc = 9.0 * v0 * v0 + 12.0 * lim.u_min * p_f;
    if (disc >= 0.0) {
      const double r1 = (-3.0 * v0 + std::sqrt(disc)) / (2.0 * lim.u_min);
      const double r2 = (-3.0 * v0 - std::sqrt(disc)) / (2.0 * lim.u_min);
      const double Tlo = std::min(r1, r2), Thi = std::max(r1, r2);
      if (T > Tlo + 1e-9 && T < Thi - 1e-9) {
        if (Thi > T_vmin + 1e-9)
          throw InfeasibleError("infeasible constraint set: deceleration and speed floors conflict");
        t_f = t0 + Thi;
      }
    }
  }

  (void)initial_guess;  // the reduction supersedes the seed; kept for the call contract

  const CubicTrajectory traj = detail::transversal_cubic(t0, v0, p_f, t_f);
  UpperSolution sol;
  sol.traj = traj;
  sol.t_f = t_f;
  sol.t_m = time_at_position(traj, d.p_m);
  sol.iterations = iterations;

  DecisionVector x;
  x << traj.phi3, traj.phi2, traj.phi1, traj.phi0, sol.t_m, sol.t_f;

  // Active set and KKT certificate.
  constexpr double kActiveTol = 1e-7;
  std::vector<int> active;
  KktReport kkt;
  for (int r = 0; r < 5; ++r)
    kkt.primal_equality = std::max(kkt.primal_equality, std::abs(cs.equality(r, x)));
  for (int m = 0; m < 7; ++m) {
    const double g = cs.inequality(m, x);
    kkt.primal_inequality = std::max(kkt.primal_inequality, g);
    if (std::abs(g) <= kActiveTol) {
      active.push_back(m);
      sol.active.emplace_back(ConstraintSet::inequality_names[static_cast<std::size_t>(m)]);
    }
  }

  const int cols = 5 + static_cast<int>(active.size());
  Eigen::MatrixXd J(6, cols);
  for (int r = 0; r < 5; ++r) J.col(r) = cs.equality_gradient(r, x);
  for (std::size_t k = 0; k < active.size(); ++k)
    J.col(5 + static_cast<int>(k)) = cs.inequality_gradient(active[k], x);
  DecisionVector grad_f = DecisionVector::Zero();
  grad_f[5] = 1.0;

  Eigen::VectorXd mult = J.colPivHouseholderQr().solve(-grad_f);
  // Multipliers of inequalities must be non-negative; tiny negatives are
  // numerical noise on weakly-active constraints.
  for (int k = 5; k < cols; ++k)
    if (mult[k] < 0.0 && mult[k] > -1e-9) mult[k] = 0.0;
  sol.multipliers = mult;

  const Eigen::VectorXd stat = grad_f + J * mult;
  kkt.stationarity = stat.cwiseAbs().maxCoeff();
  for (std::size_t k = 0; k < active.size(); ++k)
    kkt.complementarity = std::max(
        kkt.complementarity, std::abs(mult[5 + static_cast<int>(k)] *
                                      cs.inequality(active[k], x)));
  sol.kkt = kkt;
  return sol;
}

/// One committed crossing. Entries never change after commitment.
struct ScheduleEntry {
  int vehicle_id = 0;
  std::string path;
  double t0 = 0.0;
  double v0 = 0.0;
  double u0 = 0.0;
  double t_m = 0.0;       // merging-zone entry
  double t_f = 0.0;       // merging-zone (= control-zone) exit of the leader
  double t_last_f = 0.0;  // estimated merging-zone exit of the platoon tail
  CubicTrajectory traj;
  std::vector<std::string> active_constraints;
  KktReport kkt;
  double rho_sum = 0.0;
  double fixed_sum = 0.0;
  bool pushed = false;  // slot search had to delay the merging entry
};

struct CrossingSchedule {
  std::vector<ScheduleEntry> entries;

  [[nodiscard]] const ScheduleEntry* last_on_path(const std::string& path) const {
    for (auto it = entries.rbegin(); it != entries.rend(); ++it)
      if (it->path == path) return &*it;
    return nullptr;
  }
};

/// Rigid-chain estimate of when the platoon tail exits the merging zone: the
/// leader exit time plus the platoon extent traversed at the exit speed.
[[nodiscard]] inline double estimate_platoon_exit(const CubicTrajectory& leader_traj,
                                                  double t_f_leader,
                                                  const std::vector<DriverParams>& followers,
                                                  double vehicle_length) {
  if (followers.empty()) return t_f_leader;
  const double v_exit = leader_traj.speed(t_f_leader);
  if (!(v_exit > 0.0)) throw DomainError("estimate_platoon_exit: non-positive exit speed");
  double extent = 0.0;
  for (const DriverParams& d : followers)
    extent += following_spacing(v_exit, d) + vehicle_length;
  return t_f_leader + extent / v_exit;
}

struct Arrival {
  int vehicle_id = 0;
  std::string path;
  double t0 = 0.0;
  double v0 = 0.0;
  double u0 = 0.0;
  VehicleLimits limits;
  std::vector<DriverParams> followers;
  double rear_gap = 6.0;  // s0 + l_c
};

/// Sequential coordinator protocol: process arrivals in control-zone entry
/// order, search the earliest merging slot whose occupancy window avoids all
/// committed conflicting windows, solve the upper level, and commit.
inline const ScheduleEntry& schedule_arrival(CrossingSchedule& schedule,
                                             const IntersectionGeometry& geo,
                                             const Arrival& arrival, double horizon) {
  constexpr double kSlotStep = 0.1;
  if (!schedule.entries.empty() && arrival.t0 < schedule.entries.back().t0 - 1e-12)
    throw DomainError("schedule_arrival: arrivals must be processed in entry order");

  const double p_m = geo.merging_entry();
  const double p_f = geo.merging_exit();

  std::optional<PredecessorTrack> pred;
  if (const ScheduleEntry* prev = schedule.last_on_path(arrival.path)) {
    pred = PredecessorTrack{prev->traj, prev->rho_sum, prev->fixed_sum};
  }

  auto solve_with_slot = [&](double t_slot) {
    const ConstraintSet cs =
        build_constraints(arrival.t0, arrival.v0, arrival.u0, t_slot, p_m, p_f, arrival.limits,
                          pred, arrival.rear_gap,
                          t_slot > -kInf ? t_slot + geo.merging_side / arrival.limits.v_max
                                         : -kInf);
    return solve_upper(std::nullopt, cs);
  };

  // Unconstrained optimum first, then advance the slot until the estimated
  // occupancy window clears every committed conflicting window.
  UpperSolution sol = solve_with_slot(-kInf);
  const double t_m_opt = sol.t_m;
  bool pushed = false;
  for (int k = 0;; ++k) {
    const double cand = t_m_opt + kSlotStep * k;
    if (cand > arrival.t0 + horizon)
      throw InfeasibleError("schedule_arrival: no feasible merging slot within horizon");
    if (k > 0) {
      sol = solve_with_slot(cand);
      pushed = true;
    }
    const double t_last =
        estimate_platoon_exit(sol.traj, sol.t_f, arrival.followers, geo.vehicle_length);
    bool overlap = false;
    for (const ScheduleEntry& e : schedule.entries) {
      if (!geo.conflicting(arrival.path, e.path)) continue;
      if (sol.t_m < e.t_last_f && e.t_m < t_last) {
        overlap = true;
        break;
      }
    }
    if (!overlap) {
      ScheduleEntry entry;
      entry.vehicle_id = arrival.vehicle_id;
      entry.path = arrival.path;
      entry.t0 = arrival.t0;
      entry.v0 = arrival.v0;
      entry.u0 = arrival.u0;
      entry.t_m = sol.t_m;
      entry.t_f = sol.t_f;
      entry.t_last_f = t_last;
      entry.traj = sol.traj;
      entry.active_constraints = sol.active;
      entry.kkt = sol.kkt;
      entry.pushed = pushed;
      for (const DriverParams& dp : arrival.followers) {
        entry.rho_sum += dp.rho;
        entry.fixed_sum += dp.s0 + geo.vehicle_length;
      }
      schedule.entries.push_back(entry);
      return schedule.entries.back();
    }
  }
}

}  // namespace platoon

#endif  // PLATOON_SCHEDULER_HPP
