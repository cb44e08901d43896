// Copyright 2026 The Ecolane Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ECOLANE_OBSERVATION_HPP_
#define ECOLANE_OBSERVATION_HPP_

#include <array>
#include <cmath>

#include "ecolane/scenario.hpp"

namespace ecolane {

// Longitudinal action bounds shared by the simulator and the controllers.
inline constexpr double kAccelMin = -3.0;  // m/s^2
inline constexpr double kAccelMax = 3.0;   // m/s^2
inline constexpr double kVehicleLength = 5.0;  // m

enum class Phase { kGreen = 0, kRed = 1 };

struct SignalState {
  Phase phase = Phase::kGreen;
  double time_to_change = 0.0;  // s, in (0, current phase duration]
  bool operator==(const SignalState&) const = default;
};

// Phase and remaining time at absolute time t for the fixed-time plan in c.
SignalState signal_at(const Context& c, double t);

// Absent neighbours carry present = false, gap = lane length, speed = 0.
struct NeighborSlot {
  bool present = false;
  double gap = 0.0;    // m, bumper to bumper
  double speed = 0.0;  // m/s
  bool operator==(const NeighborSlot&) const = default;
};

inline constexpr int kNumAdjacentSlots = 4;

// One AV's view of the world. `context` is the raw scenario context; the
// policy turns it into a ContextVector with the bounds it was trained on.
struct Observation {
  double ego_speed = 0.0;
  double ego_distance_to_signal = 0.0;
  NeighborSlot leader;
  NeighborSlot follower;
  // Left-leader, left-follower, right-leader, right-follower. The corridor is
  // single-lane, so these are always absent.
  std::array<NeighborSlot, kNumAdjacentSlots> adjacent{};
  Phase signal_phase = Phase::kGreen;
  double time_to_change = 0.0;
  Context context;

  bool operator==(const Observation&) const = default;
};

inline NeighborSlot absent_slot(double lane_length) {
  return NeighborSlot{false, lane_length, 0.0};
}

}  // namespace ecolane

#endif  // ECOLANE_OBSERVATION_HPP_
