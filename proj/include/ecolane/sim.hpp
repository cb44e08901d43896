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

// Discrete-time microscopic simulation of one signalized single-lane
// corridor. Vehicles enter at position 0, the stop line sits at
// lane_length, and a vehicle leaves the corridor once it passes the line.
//
// One step, in order:
//   1. desired accelerations from the pre-step state (IDM for humans, the
//      clipped command for AVs);
//   2. front to back: AV time-gap safety floor, stop-line rule, kinematic
//      collision guard, Euler update v <- max(0, v + a dt), x <- x + v dt;
//   3. emission accounting, exits, clock and signal advance.

#ifndef ECOLANE_SIM_HPP_
#define ECOLANE_SIM_HPP_

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ecolane/emission.hpp"
#include "ecolane/nominal.hpp"
#include "ecolane/observation.hpp"
#include "ecolane/scenario.hpp"

namespace ecolane {

inline constexpr double kMinSpawnGap = 7.0;       // m
inline constexpr double kStopThreshold = 0.3;     // m/s
inline constexpr double kSafetyJamGap = 2.0;      // m
inline constexpr double kSafetyTimeGap = 0.6;     // s
inline constexpr double kComfortBraking = 2.0;    // m/s^2
inline constexpr double kGuardGap = 0.1;          // m, hard minimum gap
inline constexpr double kHumanNoise = 0.1;        // +-10 % heterogeneity

enum class VehicleClass { kHuman = 0, kAv = 1 };
std::string_view to_string(VehicleClass cls);

// How AVs are driven when no policy is attached. kHuman routes AVs through
// exactly the human-driver code path (the IDM baseline).
enum class AvMode { kCommanded, kHuman };

struct VehicleState {
  int id = 0;
  VehicleClass cls = VehicleClass::kHuman;
  double position = 0.0;  // m from entry, front bumper
  double speed = 0.0;     // m/s
  double accel = 0.0;     // m/s^2, last applied
  double emission_rate = 0.0;  // g/s, last step
  double cumulative_emissions = 0.0;  // g
  double arrival_time = 0.0;  // s, demand event (may precede entry)
  double entry_time = 0.0;    // s, insertion into the corridor
  std::optional<double> exit_time;
  IdmParams driver;  // human law incl. heterogeneity
  int stop_count = 0;
  bool stopped = false;

  bool operator==(const VehicleState&) const = default;
};

struct ArrivalRecord {
  int id = 0;
  VehicleClass cls = VehicleClass::kHuman;
  double arrival_time = 0.0;
  bool operator==(const ArrivalRecord&) const = default;
};

struct WorldState {
  ScenarioSpec spec;
  Context context;
  AvMode av_mode = AvMode::kCommanded;
  EmissionModel emission;
  std::int64_t step_index = 0;
  double clock = 0.0;
  SignalState signal;
  std::vector<VehicleState> vehicles;  // front (closest to the line) first
  // Arrived but not yet inserted (entry blocked). They idle at the entry and
  // are counted in the episode totals.
  std::deque<VehicleState> pending;
  std::vector<VehicleState> exited;
  std::vector<ArrivalRecord> arrivals;
  Rng rng;
  int next_id = 0;

  bool operator==(const WorldState&) const = default;
};

WorldState init_world(const ScenarioSpec& spec, AvMode av_mode = AvMode::kCommanded,
                      const EmissionModel& emission = EmissionModel::defaults());

// Bernoulli-thinned Poisson demand: with probability 1 - exp(-rate dt) a
// vehicle arrives; it is an AV with probability av_penetration. The head of
// the entry queue is inserted when the gap to the last vehicle allows.
void spawn_arrivals(WorldState& world, double dt);

using AvCommands = std::map<int, double>;

struct StepRecord {
  int id = 0;
  VehicleClass cls = VehicleClass::kHuman;
  double position = 0.0;  // after the step
  double speed = 0.0;     // after the step
  double accel = 0.0;     // applied
  double emission_rate = 0.0;
  bool stopped = false;
  bool exited = false;
};

struct StepReport {
  Phase phase_at_start = Phase::kGreen;
  std::vector<StepRecord> records;  // front first, includes exits
};

// Throws Error("command") for ids that are not live AVs. AVs without a
// command hold zero acceleration.
StepReport step(WorldState& world, const AvCommands& commands, double dt);

// Throws Error("unknown_vehicle") when id is not in the corridor.
Observation observe(const WorldState& world, int id);
const VehicleState& find_vehicle(const WorldState& world, int id);
std::vector<int> live_avs(const WorldState& world);

struct RewardWeights {
  double emission = 30.0;  // w1
  double stop = 15.0;      // w2
  double accel = 10.0;     // w3
  bool operator==(const RewardWeights&) const = default;
};

// v - w1 e - w2 s - w3 |a|
double reward_from(double speed, double emission_rate, double abs_accel,
                   const RewardWeights& w);
// Reward of a live vehicle's last step.
double step_reward(const WorldState& world, int id, const RewardWeights& w);
double step_reward(const StepRecord& record, const RewardWeights& w);

struct VehicleMetrics {
  int id = 0;
  VehicleClass cls = VehicleClass::kHuman;
  double arrival_time = 0.0;
  double entry_time = 0.0;
  std::optional<double> exit_time;
  double travel_time = 0.0;  // censored at the horizon when not exited
  bool censored = false;
  double emissions = 0.0;
  int stops = 0;
};

struct EpisodeMetrics {
  double total_emissions = 0.0;   // g
  double mean_travel_time = 0.0;  // s
  double throughput = 0.0;        // exited vehicles per hour
  int stop_count = 0;
  int vehicles_entered = 0;
  int vehicles_exited = 0;
  int censored = 0;
  std::vector<VehicleMetrics> vehicles;
};

// Totals over every vehicle that arrived, including those still in the
// corridor or entry queue (travel time censored at the clock).
EpisodeMetrics collect_metrics(const WorldState& world);

// Episode trace: one row per (step, vehicle), written after each step.
struct TraceRow {
  std::int64_t step = 0;
  double clock = 0.0;
  int id = 0;
  VehicleClass cls = VehicleClass::kHuman;
  double position = 0.0;
  double speed = 0.0;
  double accel = 0.0;
  double emission_rate = 0.0;
  bool operator==(const TraceRow&) const = default;
};

struct EpisodeTrace {
  ScenarioSpec spec;
  std::vector<TraceRow> rows;
  std::vector<ArrivalRecord> arrivals;
};

void append_trace(EpisodeTrace& trace, const WorldState& world,
                  const StepReport& report);
void write_trace(std::ostream& out, const EpisodeTrace& trace);
void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace);
EpisodeTrace read_trace(const std::filesystem::path& path);

// Drives one full episode. The controller is called once per step with the
// world after arrivals and returns commands for the live AVs.
using AvController = std::function<AvCommands(const WorldState&)>;

struct EpisodeResult {
  EpisodeMetrics metrics;
  std::vector<ArrivalRecord> arrivals;
  std::optional<EpisodeTrace> trace;
};

EpisodeResult run_episode(const ScenarioSpec& spec, AvMode av_mode,
                          const AvController& controller, bool record_trace);

// Internal helpers exposed for tests.
namespace detail {
// Distance covered after a step that ends at speed v, braking at `decel`
// per step until standstill (discrete Euler).
double stopping_distance(double v, double decel, double dt);
// Largest end-of-step speed that can still stop within distance d.
double max_stoppable_speed(double d, double decel, double dt);
}  // namespace detail

}  // namespace ecolane

#endif  // ECOLANE_SIM_HPP_
