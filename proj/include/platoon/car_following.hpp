#ifndef PLATOON_CAR_FOLLOWING_HPP
#define PLATOON_CAR_FOLLOWING_HPP

#include <cmath>

#include "platoon/core.hpp"

namespace platoon {

enum class FollowMode { FreeFlow, CoupledFollowing };

[[nodiscard]] inline const char* to_string(FollowMode m) {
  return m == FollowMode::FreeFlow ? "free_flow" : "coupled_following";
}

/// Spacing/gap pair describing how a follower relates to its predecessor.
/// delta == +inf encodes "no predecessor" and keeps downstream formulas total.
struct GapState {
  double spacing = 0.0;  // desired bumper-to-bumper spacing s_i, m
  double delta = kInf;   // platoon gap delta_i, m
  FollowMode mode = FollowMode::FreeFlow;
};

/// Desired bumper-to-bumper following spacing at speed v: rho*v + s0.
[[nodiscard]] inline double following_spacing(double v, const DriverParams& d) {
  return d.rho * v + d.s0;
}

/// Platoon gap: actual bumper-to-bumper spacing minus the desired spacing.
/// Positive means the follower is still in free flow; +inf when unled.
[[nodiscard]] inline double platoon_gap(double p_pred, double p_self, double v_self,
                                        const DriverParams& d, double vehicle_length) {
  return p_pred - p_self - following_spacing(v_self, d) - vehicle_length;
}

[[nodiscard]] inline FollowMode classify_mode(double delta) {
  return delta > 0.0 ? FollowMode::FreeFlow : FollowMode::CoupledFollowing;
}

[[nodiscard]] inline GapState make_gap_state(double p_pred, double p_self, double v_self,
                                             const DriverParams& d, double vehicle_length,
                                             bool has_predecessor) {
  GapState g;
  g.spacing = following_spacing(v_self, d);
  g.delta = has_predecessor
                ? platoon_gap(p_pred, p_self, v_self, d, vehicle_length)
                : kInf;
  g.mode = classify_mode(g.delta);
  return g;
}

/// Equilibrium speed-spacing map: (v_max/2) * (tanh(delta) + tanh(spacing)).
/// tanh(+inf) = 1 handles the unled case. Arguments are taken as the
/// dimensionless magnitudes of the meter-valued gaps.
[[nodiscard]] inline double equilibrium_speed(double delta, double spacing, double v_max) {
  const double td = std::isinf(delta) ? 1.0 : std::tanh(delta);
  return 0.5 * v_max * (td + std::tanh(spacing));
}

/// Delayed arguments of the car-following law, all sampled at t - eta.
struct DelayedInputs {
  double delta = kInf;   // platoon gap at t - eta
  double spacing = 0.0;  // desired spacing at t - eta
  double speed = 0.0;    // own speed at t - eta
};

/// Raw car-following acceleration before actuation clamping:
/// alpha * (V(delta, spacing) - v), everything evaluated at t - eta.
[[nodiscard]] inline double hdv_acceleration_raw(const DelayedInputs& in,
                                                 const DriverParams& d, double v_max) {
  return d.alpha * (equilibrium_speed(in.delta, in.spacing, v_max) - in.speed);
}

/// Car-following acceleration clamped into [u_min, u_max].
[[nodiscard]] inline double hdv_acceleration(const DelayedInputs& in, const DriverParams& d,
                                             const VehicleLimits& lim) {
  return lim.clamp_accel(hdv_acceleration_raw(in, d, lim.v_max));
}

}  // namespace platoon

#endif  // PLATOON_CAR_FOLLOWING_HPP
