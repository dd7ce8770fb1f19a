#ifndef PLATOON_TRAJECTORY_HPP
#define PLATOON_TRAJECTORY_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "platoon/core.hpp"

namespace platoon {

/// Cubic position trajectory p(t) = phi3*t^3 + phi2*t^2 + phi1*t + phi0,
/// valid on [t0, tf]. Speed must stay positive on the window so that the
/// position map is invertible; phi3 may be zero only for (near-)cruise
/// solutions, which the inversion handles by a quadratic/linear fallback.
struct CubicTrajectory {
  double phi3 = 0.0;
  double phi2 = 0.0;
  double phi1 = 0.0;
  double phi0 = 0.0;
  double t0 = 0.0;
  double tf = 0.0;

  [[nodiscard]] double position(double t) const {
    return ((phi3 * t + phi2) * t + phi1) * t + phi0;
  }
  [[nodiscard]] double speed(double t) const {
    return (3.0 * phi3 * t + 2.0 * phi2) * t + phi1;
  }
  [[nodiscard]] double control(double t) const { return 6.0 * phi3 * t + 2.0 * phi2; }
};

struct TrajectorySample {
  double position = 0.0;
  double speed = 0.0;
  double control = 0.0;
};

/// Position/speed/control at time t. t must lie inside the validity window.
[[nodiscard]] inline TrajectorySample eval(const CubicTrajectory& c, double t) {
  const double slack = 1e-9 * std::max(1.0, c.tf - c.t0);
  if (t < c.t0 - slack || t > c.tf + slack)
    throw DomainError("eval: t outside trajectory window");
  return {c.position(t), c.speed(t), c.control(t)};
}

namespace detail {

/// Expands coefficients of a3*(t-ts)^3 + a2*(t-ts)^2 + a1*(t-ts) + a0 into
/// absolute-time form.
inline CubicTrajectory from_shifted(double ts, double a3, double a2, double a1, double a0,
                                    double t0, double tf) {
  CubicTrajectory c;
  c.phi3 = a3;
  c.phi2 = a2 - 3.0 * a3 * ts;
  c.phi1 = a1 - 2.0 * a2 * ts + 3.0 * a3 * ts * ts;
  c.phi0 = a0 - a1 * ts + a2 * ts * ts - a3 * ts * ts * ts;
  c.t0 = t0;
  c.tf = tf;
  return c;
}

}  // namespace detail

/// Energy-optimal (squared-control) trajectory through p(t0)=p0, v(t0)=v0,
/// p(tf)=pf with zero terminal control (free terminal speed). Passing
/// terminal_speed instead pins v(tf) and drops the zero-control condition.
/// The resulting control is affine in time.
[[nodiscard]] inline CubicTrajectory solve_unconstrained(
    double t0, double v0, double p0, double tf, double pf,
    std::optional<double> terminal_speed = std::nullopt) {
  const double T = tf - t0;
  if (!(T > 1e-9)) throw DomainError("solve_unconstrained: degenerate window");
  const double D = pf - p0 - v0 * T;

  double a3 = 0.0, a2 = 0.0;
  if (terminal_speed) {
    const double dv = *terminal_speed - v0;
    a3 = (dv - 2.0 * D / T) / (T * T);
    a2 = 3.0 * D / (T * T) - dv / T;
  } else {
    a3 = -D / (2.0 * T * T * T);
    a2 = 3.0 * D / (2.0 * T * T);
  }
  CubicTrajectory c = detail::from_shifted(t0, a3, a2, v0, p0, t0, tf);

  // Speed is quadratic; check its minimum over the window.
  double vmin = std::min(c.speed(t0), c.speed(tf));
  if (std::abs(c.phi3) > 0.0) {
    const double t_vertex = -c.phi2 / (3.0 * c.phi3);
    if (t_vertex > t0 && t_vertex < tf) vmin = std::min(vmin, c.speed(t_vertex));
  }
  if (vmin <= 0.0)
    throw DomainError("solve_unconstrained: negative speed on window, requires constrained arcs");
  return c;
}

enum class ArcKind { Unconstrained, ControlMin, ControlMax, SpeedMin, SpeedMax };

[[nodiscard]] inline const char* to_string(ArcKind k) {
  switch (k) {
    case ArcKind::Unconstrained: return "unconstrained";
    case ArcKind::ControlMin: return "control_min";
    case ArcKind::ControlMax: return "control_max";
    case ArcKind::SpeedMin: return "speed_min";
    case ArcKind::SpeedMax: return "speed_max";
  }
  return "?";
}

struct Arc {
  ArcKind kind = ArcKind::Unconstrained;
  CubicTrajectory poly;  // window [poly.t0, poly.tf] is the arc span
};

/// Trajectory assembled from saturation and unconstrained arcs. Position and
/// speed are continuous at every junction by construction.
struct PiecewiseTrajectory {
  std::vector<Arc> arcs;

  [[nodiscard]] double t0() const { return arcs.front().poly.t0; }
  [[nodiscard]] double tf() const { return arcs.back().poly.tf; }

  [[nodiscard]] const Arc& arc_at(double t) const {
    for (const Arc& a : arcs)
      if (t <= a.poly.tf + 1e-12) return a;
    return arcs.back();
  }
  [[nodiscard]] TrajectorySample operator()(double t) const {
    const CubicTrajectory& c = arc_at(t).poly;
    return {c.position(t), c.speed(t), c.control(t)};
  }
};

/// One half of the squared-control integral over an affine-control segment.
[[nodiscard]] inline double energy_cost(const CubicTrajectory& c) {
  const double m = 6.0 * c.phi3, b = 2.0 * c.phi2;
  const double lo = c.t0, hi = c.tf;
  const double i2 = (hi * hi * hi - lo * lo * lo) / 3.0;
  const double i1 = (hi * hi - lo * lo) / 2.0;
  const double i0 = hi - lo;
  return 0.5 * (m * m * i2 + 2.0 * m * b * i1 + b * b * i0);
}

[[nodiscard]] inline double energy_cost(const PiecewiseTrajectory& pw) {
  double j = 0.0;
  for (const Arc& a : pw.arcs) j += energy_cost(a.poly);
  return j;
}

/// Coefficients of the depressed form tau^3 + omega0*tau + (omega1 + omega2*p)
/// obtained from p(t) = p by the substitution t = tau - phi2/(3*phi3).
struct DepressedCubic {
  double omega0 = 0.0;
  double omega1 = 0.0;
  double omega2 = 0.0;
};

[[nodiscard]] inline DepressedCubic reduce_to_depressed(const CubicTrajectory& c) {
  if (c.phi3 == 0.0) throw DomainError("reduce_to_depressed: phi3 is zero");
  const double A = c.phi2 / c.phi3;
  const double B = c.phi1 / c.phi3;
  DepressedCubic d;
  d.omega0 = B - A * A / 3.0;
  d.omega1 = (2.0 * A * A * A - 9.0 * A * B) / 27.0 + c.phi0 / c.phi3;
  d.omega2 = -1.0 / c.phi3;
  return d;
}

namespace detail {

/// Real roots of tau^3 + p*tau + q = 0 (Cardano / trigonometric branch).
inline int depressed_roots(double p, double q, std::array<double, 3>& roots) {
  const double disc = 0.25 * q * q + p * p * p / 27.0;
  if (disc > 0.0) {
    const double s = std::sqrt(disc);
    roots[0] = std::cbrt(-0.5 * q + s) + std::cbrt(-0.5 * q - s);
    return 1;
  }
  if (p == 0.0) {  // disc <= 0 forces q == 0 here
    roots[0] = 0.0;
    return 1;
  }
  const double r = std::sqrt(-p / 3.0);
  double arg = 1.5 * q / (p * r);
  arg = std::clamp(arg, -1.0, 1.0);
  const double theta = std::acos(arg) / 3.0;
  constexpr double k2pi3 = 2.0943951023931953;  // 2*pi/3
  roots[0] = 2.0 * r * std::cos(theta);
  roots[1] = 2.0 * r * std::cos(theta - k2pi3);
  roots[2] = 2.0 * r * std::cos(theta + k2pi3);
  return 3;
}

inline double bisect_position(const CubicTrajectory& c, double p, double lo, double hi) {
  double flo = c.position(lo) - p;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = c.position(mid) - p;
    if ((flo <= 0.0) == (fm <= 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Inverse of the position map: the unique t in [t0, tf] with p(t) = p.
/// Uses the depressed form and Cardano's formula, with a quadratic/linear
/// fallback for near-degenerate phi3 and a Newton polish of the chosen root.
[[nodiscard]] inline double time_at_position(const CubicTrajectory& c, double p) {
  const double p_lo = c.position(c.t0), p_hi = c.position(c.tf);
  const double slack = 1e-7 * std::max({1.0, std::abs(p_lo), std::abs(p_hi)});
  if (p < p_lo - slack || p > p_hi + slack)
    throw DomainError("time_at_position: position outside reachable range");
  if (p <= p_lo) return c.t0;
  if (p >= p_hi) return c.tf;

  const double span = c.tf - c.t0;
  const double window_tol = 1e-7 * std::max(1.0, span);
  double t = c.t0;
  bool found = false;

  if (std::abs(c.phi3) < 1e-12) {
    if (std::abs(c.phi2) < 1e-12) {
      t = (p - c.phi0) / c.phi1 + 0.0;
      found = true;
    } else {
      // Numerically stable quadratic roots of phi2*t^2 + phi1*t + (phi0 - p).
      const double a = c.phi2, b = c.phi1, cc = c.phi0 - p;
      const double disc = b * b - 4.0 * a * cc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double qq = -0.5 * (b + std::copysign(sq, b));
        const double r1 = qq / a;
        const double r2 = (qq != 0.0) ? cc / qq : r1;
        for (double r : {r1, r2})
          if (r >= c.t0 - window_tol && r <= c.tf + window_tol) {
            t = r;
            found = true;
            break;
          }
      }
    }
  } else {
    const DepressedCubic d = reduce_to_depressed(c);
    const double shift = c.phi2 / (3.0 * c.phi3);
    std::array<double, 3> roots{};
    const int n = detail::depressed_roots(d.omega0, d.omega1 + d.omega2 * p, roots);
    for (int i = 0; i < n; ++i) {
      const double cand = roots[static_cast<std::size_t>(i)] - shift;
      if (cand >= c.t0 - window_tol && cand <= c.tf + window_tol) {
        // Strictly increasing position guarantees at most one root in window.
        t = cand;
        found = true;
        break;
      }
    }
  }
  if (!found) t = detail::bisect_position(c, p, c.t0, c.tf);

  // Newton polish; the window invariant gives v(t) > 0.
  const double res_tol = 1e-10 * std::max(1.0, std::abs(p));
  for (int it = 0; it < 4; ++it) {
    const double f = c.position(t) - p;
    if (std::abs(f) <= res_tol) break;
    const double v = c.speed(t);
    if (!(v > 0.0)) break;
    t = std::clamp(t - f / v, c.t0, c.tf);
  }
  if (std::abs(c.position(t) - p) > 1e-9 * std::max(1.0, std::abs(p)))
    t = detail::bisect_position(c, p, c.t0, c.tf);
  return t;
}

/// Inverse of a piecewise trajectory's position map.
[[nodiscard]] inline double time_at_position(const PiecewiseTrajectory& pw, double p) {
  for (const Arc& a : pw.arcs) {
    const double hi = a.poly.position(a.poly.tf);
    if (p <= hi + 1e-9 * std::max(1.0, std::abs(hi))) return time_at_position(a.poly, p);
  }
  return time_at_position(pw.arcs.back().poly, p);
}

/// Reachable position band at tf under the actuation and speed limits,
/// starting from (p0, v0) at t0 (bang arc to the speed bound, then cruise).
[[nodiscard]] inline std::pair<double, double> reachable_position_range(
    double t0, double v0, double p0, double tf, const VehicleLimits& lim) {
  const double T = tf - t0;
  auto envelope = [&](double u, double v_cap) {
    const double t_sat = (v_cap - v0) / u;  // u and v_cap - v0 share sign
    if (t_sat >= T) return v0 * T + 0.5 * u * T * T;
    return v0 * t_sat + 0.5 * u * t_sat * t_sat + v_cap * (T - t_sat);
  };
  return {p0 + envelope(lim.u_min, lim.v_min), p0 + envelope(lim.u_max, lim.v_max)};
}

namespace detail {

inline Arc make_control_arc(ArcKind kind, double ts, double te, double p, double v, double u) {
  Arc a;
  a.kind = kind;
  a.poly = from_shifted(ts, 0.0, 0.5 * u, v, p, ts, te);
  return a;
}

inline Arc make_cruise_arc(ArcKind kind, double ts, double te, double p, double v) {
  Arc a;
  a.kind = kind;
  a.poly = from_shifted(ts, 0.0, 0.0, v, p, ts, te);
  return a;
}

/// Unconstrained arc with given entry control u_s decaying affinely to zero
/// at te (entry state (p, v) at ts).
inline Arc make_tail_arc(double ts, double te, double p, double v, double u_s) {
  const double span = te - ts;
  Arc a;
  a.kind = ArcKind::Unconstrained;
  a.poly = from_shifted(ts, -u_s / (6.0 * span), 0.5 * u_s, v, p, ts, te);
  return a;
}

}  // namespace detail

/// Energy-optimal trajectory between the boundary data of solve_unconstrained
/// with the state/control limits enforced: starts from the unconstrained arc
/// and pieces in saturation arcs (control first, then speed) until no limit is
/// violated. Junction times come from the closed-form simultaneous conditions;
/// position and speed are continuous at every junction.
[[nodiscard]] inline PiecewiseTrajectory solve_with_arcs(double t0, double v0, double p0,
                                                         double tf, double pf,
                                                         const VehicleLimits& lim) {
  constexpr int kMaxArcs = 5;
  const double T = tf - t0;
  if (!(T > 1e-9)) throw DomainError("solve_with_arcs: degenerate window");
  if (v0 < lim.v_min - 1e-9 || v0 > lim.v_max + 1e-9)
    throw DomainError("solve_with_arcs: initial speed outside limits");

  const auto [p_reach_min, p_reach_max] = reachable_position_range(t0, v0, p0, tf, lim);
  const double reach_tol = 1e-9 * std::max(1.0, std::abs(pf));
  if (pf < p_reach_min - reach_tol || pf > p_reach_max + reach_tol)
    throw DomainError("solve_with_arcs: terminal position unreachable within limits");

  const double D = pf - p0 - v0 * T;
  const double band_tol = 1e-9;

  PiecewiseTrajectory pw;

  // Plain unconstrained arc; control extremum is at t0, speed extrema at the
  // window ends (control keeps one sign and vanishes at tf).
  {
    CubicTrajectory c = detail::from_shifted(t0, -D / (2.0 * T * T * T),
                                             1.5 * D / (T * T), v0, p0, t0, tf);
    const double u_entry = c.control(t0);
    const double v_exit = c.speed(tf);
    if (u_entry <= lim.u_max + band_tol && u_entry >= lim.u_min - band_tol &&
        v_exit <= lim.v_max + band_tol && v_exit >= lim.v_min - band_tol) {
      pw.arcs.push_back({ArcKind::Unconstrained, c});
      return pw;
    }
  }

  // Initial control-saturation arc followed by an unconstrained tail:
  // D = u_b*(-x^2/6 + x*T/3 + T^2/3), x the saturated duration.
  auto control_then_tail = [&](double u_b, ArcKind kind) -> std::optional<PiecewiseTrajectory> {
    const double radicand = 3.0 * T * T - 6.0 * D / u_b;
    if (radicand < 0.0) return std::nullopt;
    const double x = T - std::sqrt(radicand);
    if (!(x > 0.0) || !(x < T)) return std::nullopt;
    const double t1 = t0 + x;
    const double v1 = v0 + u_b * x;
    const double p1 = p0 + v0 * x + 0.5 * u_b * x * x;
    PiecewiseTrajectory out;
    out.arcs.push_back(detail::make_control_arc(kind, t0, t1, p0, v0, u_b));
    out.arcs.push_back(detail::make_tail_arc(t1, tf, p1, v1, u_b));
    return out;
  };

  // Unconstrained arc meeting the speed bound tangentially, then cruise:
  // saturation starts at t0 + S with S = 3*(v_b*T - (pf-p0))/(v_b - v0).
  auto tail_then_cruise = [&](double v_b, ArcKind kind) -> std::optional<PiecewiseTrajectory> {
    const double S = 3.0 * (v_b * T - (pf - p0)) / (v_b - v0);
    if (!(S > 0.0) || !(S < T)) return std::nullopt;
    const double c0 = 2.0 * (v_b - v0) / S;  // entry control of the leading arc
    const double t1 = t0 + S;
    const double p1 = p0 + v0 * S + (v_b - v0) * S * 2.0 / 3.0;
    PiecewiseTrajectory out;
    out.arcs.push_back(detail::make_tail_arc(t0, t1, p0, v0, c0));
    out.arcs.push_back(detail::make_cruise_arc(kind, t1, tf, p1, v_b));
    return out;
  };

  // Control saturation, unconstrained easing, then cruising on the speed
  // bound. Single unknown: the saturated duration s1.
  auto control_tail_cruise = [&](double u_b, ArcKind ck, double v_b,
                                 ArcKind vk) -> std::optional<PiecewiseTrajectory> {
    const double A = v_b - v0;
    const double G = v_b * T - (pf - p0);
    const double radicand = 6.0 * G / u_b - 3.0 * (A / u_b) * (A / u_b);
    if (radicand < 0.0) return std::nullopt;
    const double s1 = A / u_b - std::sqrt(radicand);
    if (!(s1 > 0.0)) return std::nullopt;
    const double v1 = v0 + u_b * s1;
    const double sigma = 2.0 * (v_b - v1) / u_b;
    if (!(sigma >= 0.0) || s1 + sigma >= T) return std::nullopt;
    const double t1 = t0 + s1;
    const double t2 = t1 + sigma;
    const double p1 = p0 + v0 * s1 + 0.5 * u_b * s1 * s1;
    const double p2 = p1 + v1 * sigma + u_b * sigma * sigma / 3.0;
    PiecewiseTrajectory out;
    out.arcs.push_back(detail::make_control_arc(ck, t0, t1, p0, v0, u_b));
    out.arcs.push_back(detail::make_tail_arc(t1, t2, p1, v1, u_b));
    out.arcs.push_back(detail::make_cruise_arc(vk, t2, tf, p2, v_b));
    return out;
  };

  auto within_limits = [&](const PiecewiseTrajectory& cand) {
    for (const Arc& a : cand.arcs) {
      const double ua = a.poly.control(a.poly.t0);
      const double ub = a.poly.control(a.poly.tf);
      if (std::max(ua, ub) > lim.u_max + band_tol) return false;
      if (std::min(ua, ub) < lim.u_min - band_tol) return false;
      const double va = a.poly.speed(a.poly.t0);
      const double vb = a.poly.speed(a.poly.tf);
      if (std::max(va, vb) > lim.v_max + band_tol) return false;
      if (std::min(va, vb) < lim.v_min - band_tol) return false;
    }
    return true;
  };

  // Piecing order mirrors the violation found on the current candidate:
  // control bound first, then the speed bound reached by the repaired tail.
  const bool accel = D > 0.0;
  std::vector<std::optional<PiecewiseTrajectory>> candidates;
  if (accel) {
    candidates.push_back(control_then_tail(lim.u_max, ArcKind::ControlMax));
    candidates.push_back(tail_then_cruise(lim.v_max, ArcKind::SpeedMax));
    candidates.push_back(control_tail_cruise(lim.u_max, ArcKind::ControlMax,
                                             lim.v_max, ArcKind::SpeedMax));
  } else {
    candidates.push_back(control_then_tail(lim.u_min, ArcKind::ControlMin));
    candidates.push_back(tail_then_cruise(lim.v_min, ArcKind::SpeedMin));
    candidates.push_back(control_tail_cruise(lim.u_min, ArcKind::ControlMin,
                                             lim.v_min, ArcKind::SpeedMin));
  }
  for (auto& cand : candidates) {
    if (!cand) continue;
    if (static_cast<int>(cand->arcs.size()) > kMaxArcs)
      throw DomainError("solve_with_arcs: arc-count cap exceeded");
    if (within_limits(*cand)) return *cand;
  }
  throw DomainError("solve_with_arcs: no admissible arc composition found");
}

}  // namespace platoon

#endif  // PLATOON_TRAJECTORY_HPP
