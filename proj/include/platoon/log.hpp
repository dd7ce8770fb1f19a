#ifndef PLATOON_LOG_HPP
#define PLATOON_LOG_HPP

#include <optional>
#include <string>
#include <vector>

#include "platoon/car_following.hpp"
#include "platoon/core.hpp"

namespace platoon {

/// One per-vehicle sample on the uniform simulation grid. u_raw keeps the
/// pre-clamp car-following value for diagnostics; delta is +inf for leaders.
struct SampleRow {
  double t = 0.0;
  double p = 0.0;
  double v = 0.0;
  double u_applied = 0.0;
  double u_raw = 0.0;
  double delta = kInf;
  double spacing = 0.0;
  FollowMode mode = FollowMode::FreeFlow;
};

struct VehicleLog {
  int id = 0;
  Role role = Role::HDV;
  std::string path;  // intersection scenarios
  std::vector<SampleRow> samples;
};

struct Event {
  std::string type;
  int vehicle = 0;
  double t = 0.0;
};

/// Uniform-grid record of a whole run plus the detected zone/formation
/// events (events land on the first grid sample at/after the crossing).
struct TrajectoryLog {
  double dt = 0.01;
  std::vector<VehicleLog> vehicles;
  std::vector<Event> events;

  [[nodiscard]] std::optional<double> event_time(const std::string& type, int vehicle) const {
    for (const Event& e : events)
      if (e.type == type && e.vehicle == vehicle) return e.t;
    return std::nullopt;
  }
  [[nodiscard]] std::optional<double> event_time(const std::string& type) const {
    for (const Event& e : events)
      if (e.type == type) return e.t;
    return std::nullopt;
  }
  [[nodiscard]] double start_time() const {
    return vehicles.empty() || vehicles.front().samples.empty()
               ? 0.0
               : vehicles.front().samples.front().t;
  }
  [[nodiscard]] double end_time() const {
    return vehicles.empty() || vehicles.front().samples.empty()
               ? 0.0
               : vehicles.front().samples.back().t;
  }
  /// Index of the first sample with t >= query (samples share one grid).
  [[nodiscard]] std::size_t index_at(double t) const {
    const double t_begin = start_time();
    const double raw = (t - t_begin) / dt;
    const double snapped = std::ceil(raw - 1e-9);
    return static_cast<std::size_t>(std::max(0.0, snapped));
  }
};

}  // namespace platoon

#endif  // PLATOON_LOG_HPP
