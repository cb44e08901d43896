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

#ifndef ECOLANE_EMISSION_HPP_
#define ECOLANE_EMISSION_HPP_

#include <array>
#include <filesystem>
#include <string>

#include "ecolane/scenario.hpp"

namespace ecolane {

// Instantaneous emission surrogate, polynomial in speed and acceleration:
//
//   P    = v * (a + g * grade + roll + aero * v^2)          [W/kg]
//   rate = F * (idle + k1 * max(0, P) + k2 * max(0, P)^2 + ka * max(0, a))
//   F    = type_factor * engine_factor * (1 + age_slope * age)
//
// Any deceleration that drives P below zero clamps the power terms, leaving
// the scaled idle floor F * idle. Coefficients ship in
// data/emission_coefficients.tsv; defaults() mirrors that file.
struct EmissionModel {
  int version = 1;
  double idle = 0.05;        // g/s at standstill
  double k_power = 0.035;    // g/s per W/kg
  double k_power2 = 0.001;   // g/s per (W/kg)^2
  double k_accel = 0.02;     // g/s per m/s^2 of positive acceleration
  double gravity = 9.81;     // m/s^2
  double roll = 0.1;         // m/s^2, rolling resistance per unit mass
  double aero = 4.0e-4;      // 1/m, aerodynamic drag per unit mass
  std::array<double, kNumVehicleTypes> type_factor{1.0, 1.3, 2.2};
  std::array<double, kNumEngineTypes> engine_factor{1.0, 0.7};
  double age_slope = 0.01;   // per year

  static const EmissionModel& defaults();

  // Context-dependent multiplier F.
  double factor(const Context& c) const;
  // F * idle: the minimum rate for this context.
  double idle_floor(const Context& c) const;
  // Specific tractive power P.
  double power(double v, double a, double grade) const;
  double rate(double v, double a, const Context& c) const;

  bool operator==(const EmissionModel&) const = default;
};

// g/s with the default coefficient table.
double emission_rate(double v, double a, const Context& c);

EmissionModel load_emission_table(const std::filesystem::path& path);
std::string serialize_emission_table(const EmissionModel& model);

}  // namespace ecolane

#endif  // ECOLANE_EMISSION_HPP_
