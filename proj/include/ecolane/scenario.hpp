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

// Scenario contexts: the static per-episode parameters that select one
// traffic task out of the family, plus the file format they live in and
// the fixed-length encoding fed to the policy.

#ifndef ECOLANE_SCENARIO_HPP_
#define ECOLANE_SCENARIO_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ecolane/common.hpp"

namespace ecolane {

enum class VehicleType { kSedan = 0, kSuv = 1, kTruck = 2 };
enum class EngineType { kIce = 0, kHybrid = 1 };

inline constexpr int kNumVehicleTypes = 3;
inline constexpr int kNumEngineTypes = 2;

std::string_view to_string(VehicleType type);
std::string_view to_string(EngineType type);
VehicleType parse_vehicle_type(std::string_view name);
EngineType parse_engine_type(std::string_view name);

struct Context {
  double green_duration = 30.0;  // s
  double red_duration = 30.0;    // s
  double signal_offset = 0.0;    // s, cycle position at t = 0
  double speed_limit = 15.0;     // m/s
  double lane_length = 300.0;    // m, stop line at the corridor end
  double road_grade = 0.0;       // rise over run
  VehicleType vehicle_type = VehicleType::kSedan;
  EngineType engine_type = EngineType::kIce;
  double vehicle_age = 0.0;     // years
  double arrival_rate = 0.2;    // vehicles/s
  double av_penetration = 1.0;  // fraction of arrivals that are AVs

  double cycle() const { return green_duration + red_duration; }

  bool operator==(const Context&) const = default;
};

// Throws Error("validation") naming the first offending field.
void validate(const Context& context, std::string_view where = "context");

struct ScenarioSpec {
  std::string name;
  Context context;
  std::uint64_t seed = 0;
  double horizon = 300.0;  // s
  double dt = 0.1;         // s

  // horizon / dt, validated to be whole.
  std::int64_t num_steps() const;

  bool operator==(const ScenarioSpec&) const = default;
};

void validate(const ScenarioSpec& spec, std::string_view where = "scenario");

// Sampling law for one real-valued context field: a constant, a uniform
// range, or a weighted list of choices.
struct FieldDist {
  enum class Kind { kFixed, kRange, kChoice };
  Kind kind = Kind::kFixed;
  double lo = 0.0;
  double hi = 0.0;
  std::vector<double> choices;
  std::vector<double> weights;

  static FieldDist fixed(double value);
  static FieldDist range(double lo, double hi);
  static FieldDist choice(std::vector<double> choices,
                          std::vector<double> weights = {});

  double min() const;
  double max() const;
  double sample(Rng& rng) const;

  bool operator==(const FieldDist&) const = default;
};

struct SignalPlan {
  double green = 30.0;
  double red = 30.0;
  bool operator==(const SignalPlan&) const = default;
};

template <typename T>
struct CategoricalDist {
  std::vector<T> choices;
  std::vector<double> weights;  // empty = uniform
  bool operator==(const CategoricalDist&) const = default;
};

// rho(c): the distribution contexts are drawn from. Green/red durations are
// drawn jointly from `signal_plans`; the offset is drawn as a fraction of
// the drawn cycle.
struct ContextDistribution {
  std::vector<SignalPlan> signal_plans{SignalPlan{}};
  std::vector<double> signal_plan_weights;  // empty = uniform
  FieldDist offset_fraction = FieldDist::fixed(0.0);
  FieldDist speed_limit = FieldDist::fixed(15.0);
  FieldDist lane_length = FieldDist::fixed(300.0);
  FieldDist road_grade = FieldDist::fixed(0.0);
  CategoricalDist<VehicleType> vehicle_type{{VehicleType::kSedan}, {}};
  CategoricalDist<EngineType> engine_type{{EngineType::kIce}, {}};
  FieldDist vehicle_age = FieldDist::fixed(0.0);
  FieldDist arrival_rate = FieldDist::fixed(0.2);
  FieldDist av_penetration = FieldDist::fixed(1.0);

  // Point mass at `context`.
  static ContextDistribution point(const Context& context);

  bool operator==(const ContextDistribution&) const = default;
};

// Throws Error("validation") if some reachable context would be invalid.
void validate(const ContextDistribution& dist);

Context sample_context(const ContextDistribution& dist, Rng& rng);

// Fixed-length context encoding. Numeric fields are min-max normalized
// against declared bounds; vehicle and engine type are one-hot.
inline constexpr int kNumContextNumeric = 9;
inline constexpr int kContextDim =
    kNumContextNumeric + kNumVehicleTypes + kNumEngineTypes;
using ContextVector = std::array<double, kContextDim>;

struct Bounds {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Bounds&) const = default;
};

// Normalization bounds in encoding order: green, red, offset, speed limit,
// lane length, grade, vehicle age, arrival rate, penetration.
struct EncodingBounds {
  std::array<Bounds, kNumContextNumeric> numeric{};

  static EncodingBounds from(const ContextDistribution& dist);
  static EncodingBounds from(const std::vector<ScenarioSpec>& specs);

  bool operator==(const EncodingBounds&) const = default;
};

// Throws Error("encoding") when a field lies outside its bound. A
// degenerate bound (lo == hi) encodes its single admissible value as 0.
ContextVector encode_context(const Context& context,
                             const EncodingBounds& bounds);

// Training distribution block of a scenario file.
struct TrainingDistribution {
  ContextDistribution contexts;
  double horizon = 120.0;
  double dt = 0.5;
  bool operator==(const TrainingDistribution&) const = default;
};

inline constexpr int kScenarioSchemaVersion = 1;

struct ScenarioFile {
  std::vector<ScenarioSpec> scenarios;
  std::optional<TrainingDistribution> distribution;
};

// Parses the scenario file format (JSON, see data/scenarios/README.md).
// Whitespace-only input yields an empty file.
ScenarioFile parse_scenario_file(std::string_view text);
ScenarioFile load_scenario_file(const std::filesystem::path& path);
std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path& path);

std::string serialize_scenario_file(const ScenarioFile& file);

// Applies a global penetration override (CLI --penetration-override).
void override_penetration(ScenarioFile& file, double penetration);

}  // namespace ecolane

#endif  // ECOLANE_SCENARIO_HPP_
