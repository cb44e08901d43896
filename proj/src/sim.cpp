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

#include "ecolane/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ecolane {

std::string_view to_string(VehicleClass cls) {
  return cls == VehicleClass::kAv ? "av" : "human";
}

SignalState signal_at(const Context& c, double t) {
  const double cycle = c.cycle();
  double u = std::fmod(t + c.signal_offset, cycle);
  if (u < 0.0) u += cycle;
  if (u < c.green_duration) {
    return {Phase::kGreen, c.green_duration - u};
  }
  return {Phase::kRed, cycle - u};
}

namespace detail {

double stopping_distance(double v, double decel, double dt) {
  if (v <= 0.0) return 0.0;
  const double dv = decel * dt;
  const double n = std::floor(v / dv);
  return dt * (n * v - dv * n * (n + 1.0) / 2.0);
}

double max_stoppable_speed(double d, double decel, double dt) {
  if (d <= 0.0) return 0.0;
  // f(v) = v dt + stopping_distance(v) is continuous and increasing.
  double lo = 0.0;
  double hi = d / dt;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * dt + stopping_distance(mid, decel, dt) <= d) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

}  // namespace detail

WorldState init_world(const ScenarioSpec& spec, AvMode av_mode,
                      const EmissionModel& emission) {
  validate(spec);
  WorldState w;
  w.spec = spec;
  w.context = spec.context;
  w.av_mode = av_mode;
  w.emission = emission;
  w.signal = signal_at(spec.context, 0.0);
  w.rng.seed(spec.seed);
  return w;
}

void spawn_arrivals(WorldState& w, double dt) {
  const Context& c = w.context;
  // Draw counts are fixed per step and per arrival so the demand stream is
  // identical whatever the vehicles do.
  const double p = 1.0 - std::exp(-c.arrival_rate * dt);
  if (uniform01(w.rng) < p) {
    VehicleState v;
    v.id = w.next_id++;
    v.cls = uniform01(w.rng) < c.av_penetration ? VehicleClass::kAv
                                                : VehicleClass::kHuman;
    const double f_speed = 1.0 + kHumanNoise * (2.0 * uniform01(w.rng) - 1.0);
    const double f_headway = 1.0 + kHumanNoise * (2.0 * uniform01(w.rng) - 1.0);
    const double f_accel = 1.0 + kHumanNoise * (2.0 * uniform01(w.rng) - 1.0);
    v.driver = IdmParams::human(c.speed_limit);
    v.driver.v0 *= f_speed;
    v.driver.T *= f_headway;
    v.driver.a_max *= f_accel;
    v.arrival_time = w.clock;
    v.entry_time = w.clock;
    v.stopped = true;
    w.arrivals.push_back({v.id, v.cls, v.arrival_time});
    w.pending.push_back(v);
  }

  if (w.pending.empty()) return;
  double entry_speed = c.speed_limit;
  if (!w.vehicles.empty()) {
    const double gap = w.vehicles.back().position - kVehicleLength;
    if (gap < kMinSpawnGap) return;
    entry_speed = std::min(entry_speed, std::max(0.0, (gap - kSafetyJamGap) /
                                                          kSafetyTimeGap));
  }
  VehicleState v = w.pending.front();
  w.pending.pop_front();
  v.position = 0.0;
  v.speed = entry_speed;
  v.entry_time = w.clock;
  v.stopped = entry_speed < kStopThreshold;
  w.vehicles.push_back(v);
}

namespace {

std::size_t index_of(const WorldState& w, int id) {
  for (std::size_t i = 0; i < w.vehicles.size(); ++i) {
    if (w.vehicles[i].id == id) return i;
  }
  throw Error("unknown_vehicle",
              "vehicle " + std::to_string(id) + " is not in the corridor");
}

Observation observe_index(const WorldState& w, std::size_t i) {
  const VehicleState& ego = w.vehicles[i];
  const double lane = w.context.lane_length;
  Observation obs;
  obs.ego_speed = ego.speed;
  obs.ego_distance_to_signal = std::max(0.0, lane - ego.position);
  obs.leader = absent_slot(lane);
  obs.follower = absent_slot(lane);
  if (i > 0) {
    const VehicleState& lead = w.vehicles[i - 1];
    obs.leader = {true, lead.position - kVehicleLength - ego.position, lead.speed};
  }
  if (i + 1 < w.vehicles.size()) {
    const VehicleState& follow = w.vehicles[i + 1];
    obs.follower = {true, ego.position - kVehicleLength - follow.position,
                    follow.speed};
  }
  obs.adjacent.fill(absent_slot(lane));
  obs.signal_phase = w.signal.phase;
  obs.time_to_change = w.signal.time_to_change;
  obs.context = w.context;
  return obs;
}

// True when, continuing at v_next, the vehicle would reach the stop line
// while the signal shows red.
bool arrives_on_red(const Context& c, double clock, double v_next, double d) {
  if (v_next <= 0.0) return false;
  return signal_at(c, clock + d / v_next).phase == Phase::kRed;
}

}  // namespace

Observation observe(const WorldState& w, int id) {
  return observe_index(w, index_of(w, id));
}

const VehicleState& find_vehicle(const WorldState& w, int id) {
  return w.vehicles[index_of(w, id)];
}

std::vector<int> live_avs(const WorldState& w) {
  std::vector<int> ids;
  for (const VehicleState& v : w.vehicles) {
    if (v.cls == VehicleClass::kAv) ids.push_back(v.id);
  }
  return ids;
}

StepReport step(WorldState& w, const AvCommands& commands, double dt) {
  const Context& c = w.context;
  const double lane = c.lane_length;
  const std::size_t n = w.vehicles.size();

  for (const auto& [id, accel] : commands) {
    const std::size_t i = [&] {
      try {
        return index_of(w, id);
      } catch (const Error&) {
        throw Error("command", "command for unknown or exited vehicle " +
                                   std::to_string(id));
      }
    }();
    if (w.vehicles[i].cls != VehicleClass::kAv) {
      throw Error("command", "vehicle " + std::to_string(id) + " is not an AV");
    }
    if (!std::isfinite(accel)) {
      throw Error("command", "non-finite command for vehicle " + std::to_string(id));
    }
  }

  std::vector<double> desired(n, 0.0);
  std::vector<bool> commanded(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const VehicleState& v = w.vehicles[i];
    if (v.cls == VehicleClass::kAv && w.av_mode == AvMode::kCommanded) {
      commanded[i] = true;
      auto it = commands.find(v.id);
      desired[i] = std::clamp(it == commands.end() ? 0.0 : it->second,
                              kAccelMin, kAccelMax);
    } else {
      desired[i] = idm_accel(observe_index(w, i), v.driver);
    }
  }

  StepReport report;
  report.phase_at_start = w.signal.phase;
  report.records.reserve(n);
  const bool red_now = w.signal.phase == Phase::kRed;

  for (std::size_t i = 0; i < n; ++i) {
    VehicleState& v = w.vehicles[i];
    const double d = std::max(0.0, lane - v.position);
    double v_next = std::clamp(v.speed + desired[i] * dt, 0.0, c.speed_limit);

    // Gap to the leader's post-step position (the leader is already updated).
    const bool has_leader = i > 0;
    const double lead_gap =
        has_leader ? w.vehicles[i - 1].position - kVehicleLength - v.position : 0.0;

    if (commanded[i] && has_leader) {
      const double cap = (lead_gap - kSafetyJamGap) / (dt + kSafetyTimeGap);
      v_next = std::min(v_next, std::max(0.0, cap));
    }

    if (arrives_on_red(c, w.clock, v_next, d) &&
        v_next * dt + detail::stopping_distance(v_next, kComfortBraking, dt) > d) {
      v_next = std::min(v_next, std::max(0.0, v.speed - kComfortBraking * dt));
      if (v_next * dt + detail::stopping_distance(v_next, kComfortBraking, dt) > d) {
        v_next = std::min(v_next,
                          detail::max_stoppable_speed(d, kComfortBraking, dt));
      }
    }
    if (red_now && v.position + v_next * dt > lane) {
      v_next = d / dt;
      while (v_next > 0.0 && v.position + v_next * dt > lane) {
        v_next = std::nextafter(v_next, 0.0);
      }
    }

    if (has_leader) {
      v_next = std::min(v_next, std::max(0.0, (lead_gap - kGuardGap) / dt));
    }

    const double applied = (v_next - v.speed) / dt;
    v.position += v_next * dt;
    v.speed = v_next;
    v.accel = applied;
    v.emission_rate = w.emission.rate(v.speed, applied, c);
    v.cumulative_emissions += v.emission_rate * dt;
    const bool now_stopped = v.speed < kStopThreshold;
    if (now_stopped && !v.stopped) ++v.stop_count;
    v.stopped = now_stopped;

    report.records.push_back({v.id, v.cls, v.position, v.speed, applied,
                              v.emission_rate, now_stopped, v.position > lane});
  }

  const double idle = w.emission.idle_floor(c);
  for (VehicleState& q : w.pending) {
    q.emission_rate = idle;
    q.cumulative_emissions += idle * dt;
  }

  ++w.step_index;
  w.clock = static_cast<double>(w.step_index) * dt;

  // Exits can only happen at the front.
  auto first_inside = std::find_if(w.vehicles.begin(), w.vehicles.end(),
                                   [&](const VehicleState& v) {
                                     return v.position <= lane;
                                   });
  for (auto it = w.vehicles.begin(); it != first_inside; ++it) {
    it->exit_time = w.clock;
    w.exited.push_back(*it);
  }
  w.vehicles.erase(w.vehicles.begin(), first_inside);

  w.signal = signal_at(c, w.clock);
  return report;
}

double reward_from(double speed, double emission_rate, double abs_accel,
                   const RewardWeights& w) {
  const double stopped = speed < kStopThreshold ? 1.0 : 0.0;
  return speed - w.emission * emission_rate - w.stop * stopped -
         w.accel * abs_accel;
}

double step_reward(const WorldState& world, int id, const RewardWeights& w) {
  const VehicleState& v = find_vehicle(world, id);
  return reward_from(v.speed, v.emission_rate, std::abs(v.accel), w);
}

double step_reward(const StepRecord& r, const RewardWeights& w) {
  return reward_from(r.speed, r.emission_rate, std::abs(r.accel), w);
}

EpisodeMetrics collect_metrics(const WorldState& w) {
  EpisodeMetrics m;
  auto add = [&](const VehicleState& v) {
    VehicleMetrics vm;
    vm.id = v.id;
    vm.cls = v.cls;
    vm.arrival_time = v.arrival_time;
    vm.entry_time = v.entry_time;
    vm.exit_time = v.exit_time;
    vm.censored = !v.exit_time.has_value();
    vm.travel_time = (v.exit_time ? *v.exit_time : w.clock) - v.arrival_time;
    vm.emissions = v.cumulative_emissions;
    vm.stops = v.stop_count;
    m.vehicles.push_back(vm);
  };
  for (const VehicleState& v : w.exited) add(v);
  for (const VehicleState& v : w.vehicles) add(v);
  for (const VehicleState& v : w.pending) add(v);
  std::sort(m.vehicles.begin(), m.vehicles.end(),
            [](const VehicleMetrics& a, const VehicleMetrics& b) { return a.id < b.id; });

  double travel = 0.0;
  for (const VehicleMetrics& vm : m.vehicles) {
    m.total_emissions += vm.emissions;
    travel += vm.travel_time;
    m.stop_count += vm.stops;
    if (vm.censored) ++m.censored;
  }
  m.vehicles_entered = static_cast<int>(m.vehicles.size());
  m.vehicles_exited = static_cast<int>(w.exited.size());
  m.mean_travel_time = m.vehicles.empty() ? 0.0 : travel / m.vehicles.size();
  m.throughput = w.clock > 0.0 ? m.vehicles_exited * 3600.0 / w.clock : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Traces

namespace {

constexpr const char* kTraceHeader = "# ecolane episode trace v1";
constexpr const char* kTraceColumns =
    "step\tclock\tid\tclass\tposition\tspeed\taccel\temission_rate";

nlohmann::json spec_json(const ScenarioSpec& spec) {
  ScenarioFile file;
  file.scenarios = {spec};
  return nlohmann::json::parse(serialize_scenario_file(file));
}

}  // namespace

void append_trace(EpisodeTrace& trace, const WorldState& world,
                  const StepReport& report) {
  for (const StepRecord& r : report.records) {
    trace.rows.push_back({world.step_index, world.clock, r.id, r.cls,
                          r.position, r.speed, r.accel, r.emission_rate});
  }
}

void write_trace(std::ostream& out, const EpisodeTrace& trace) {
  out << kTraceHeader << "\n";
  out << "# scenario " << spec_json(trace.spec).dump() << "\n";
  out << kTraceColumns << "\n";
  char buf[256];
  for (const TraceRow& r : trace.rows) {
    std::snprintf(buf, sizeof(buf), "%lld\t%.17g\t%d\t%s\t%.17g\t%.17g\t%.17g\t%.17g\n",
                  static_cast<long long>(r.step), r.clock, r.id,
                  std::string(to_string(r.cls)).c_str(), r.position, r.speed,
                  r.accel, r.emission_rate);
    out << buf;
  }
}

void write_trace(const std::filesystem::path& path, const EpisodeTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io", "cannot write trace " + path.string());
  write_trace(out, trace);
}

EpisodeTrace read_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open trace " + path.string());
  EpisodeTrace trace;
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw Error("parse", path.string() + ":1: not an ecolane episode trace");
  }
  if (!std::getline(in, line) || line.rfind("# scenario ", 0) != 0) {
    throw Error("parse", path.string() + ":2: missing scenario line");
  }
  const ScenarioFile file = parse_scenario_file(line.substr(11));
  if (file.scenarios.size() != 1) {
    throw Error("parse", path.string() + ":2: expected exactly one scenario");
  }
  trace.spec = file.scenarios.front();
  if (!std::getline(in, line) || line != kTraceColumns) {
    throw Error("parse", path.string() + ":3: unexpected column header");
  }
  int lineno = 3;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream fields(line);
    TraceRow r;
    std::string cls;
    long long step = 0;
    if (!(fields >> step >> r.clock >> r.id >> cls >> r.position >> r.speed >>
          r.accel >> r.emission_rate)) {
      throw Error("parse", path.string() + ":" + std::to_string(lineno) +
                               ": malformed trace row");
    }
    r.step = step;
    if (cls == "av") {
      r.cls = VehicleClass::kAv;
    } else if (cls == "human") {
      r.cls = VehicleClass::kHuman;
    } else {
      throw Error("parse", path.string() + ":" + std::to_string(lineno) +
                               ": unknown class '" + cls + "'");
    }
    trace.rows.push_back(r);
  }
  return trace;
}

EpisodeResult run_episode(const ScenarioSpec& spec, AvMode av_mode,
                          const AvController& controller, bool record_trace) {
  WorldState world = init_world(spec, av_mode);
  EpisodeResult result;
  if (record_trace) {
    result.trace.emplace();
    result.trace->spec = spec;
  }
  const std::int64_t steps = spec.num_steps();
  for (std::int64_t k = 0; k < steps; ++k) {
    spawn_arrivals(world, spec.dt);
    AvCommands commands;
    if (controller && av_mode == AvMode::kCommanded) commands = controller(world);
    const StepReport report = step(world, commands, spec.dt);
    if (record_trace) append_trace(*result.trace, world, report);
  }
  result.metrics = collect_metrics(world);
  result.arrivals = world.arrivals;
  if (record_trace) result.trace->arrivals = world.arrivals;
  return result;
}

}  // namespace ecolane
