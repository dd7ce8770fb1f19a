#ifndef PLATOON_PLATOON_HPP
#define PLATOON_PLATOON_HPP

// Umbrella header for the mixed-traffic platooning library.

#include "platoon/core.hpp"
#include "platoon/car_following.hpp"
#include "platoon/trajectory.hpp"
#include "platoon/formation.hpp"
#include "platoon/log.hpp"
#include "platoon/scheduler.hpp"
#include "platoon/sim.hpp"
#include "platoon/scenario_json.hpp"

#endif  // PLATOON_PLATOON_HPP
