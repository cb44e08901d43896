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

// The pool of hand-designed controllers the learned policy gates between.
// All controllers are pure functions of an Observation.

#ifndef ECOLANE_NOMINAL_HPP_
#define ECOLANE_NOMINAL_HPP_

#include <array>
#include <optional>
#include <string_view>
#include <vector>

#include "ecolane/observation.hpp"

namespace ecolane {

// Ordinals are part of the checkpoint format; never reorder.
enum class NominalId { kGlosa = 0, kConstAcc = 1, kConstDec = 2, kIdm = 3, kZero = 4 };

inline constexpr int kNumNominals = 5;
inline constexpr std::array<NominalId, kNumNominals> kAllNominals = {
    NominalId::kGlosa, NominalId::kConstAcc, NominalId::kConstDec,
    NominalId::kIdm, NominalId::kZero};

std::string_view to_string(NominalId id);
std::optional<NominalId> parse_nominal(std::string_view name);

struct IdmParams {
  double v0 = 15.0;     // desired speed, m/s
  double T = 1.0;       // time headway, s
  double a_max = 1.5;   // m/s^2
  double b = 2.0;       // comfortable braking, m/s^2
  double s0 = 2.0;      // jam gap, m
  double delta = 4.0;

  // Pool defaults; v0 tracks the context speed limit.
  static IdmParams nominal(double speed_limit);
  // Human-driver law before per-vehicle heterogeneity.
  static IdmParams human(double speed_limit);

  bool operator==(const IdmParams&) const = default;
};

inline constexpr double kConstAccel = 0.1;
inline constexpr double kConstDecel = -0.1;
// IDM output is floored here; the law itself is unbounded below.
inline constexpr double kIdmMaxDecel = 9.0;
// GLOSA planning constants.
inline constexpr double kGlosaMinSpeed = 2.0;         // m/s
inline constexpr double kGlosaSmoothingHorizon = 5.0;  // s
inline constexpr double kGlosaHoldDistance = 0.5;     // m

// a = a_max [1 - (v/v0)^delta - (s*/s)^2], s* = s0 + vT + v dv / (2 sqrt(a b)).
// With no leader the stop line acts as a standing leader during red;
// otherwise the free-road law applies. Result lies in [-kIdmMaxDecel, a_max].
double idm_accel(const Observation& obs, const IdmParams& p);

// Constant-speed crossing / glide-to-green advisory. Reads the signal plan
// and speed limit from obs.context and ignores other vehicles. Result lies
// in [kAccelMin, kAccelMax].
double glosa_accel(const Observation& obs);

double const_acc(const Observation& obs);
double const_dec(const Observation& obs);
double zero_action(const Observation& obs);

double evaluate_nominal(NominalId id, const Observation& obs);

using PoolOutput = std::array<double, kNumNominals>;

// Element k is the k-th controller (NominalId ordinal) applied to obs.
PoolOutput evaluate_pool(const Observation& obs);

// An ordered subset of the pool. Ordering follows NominalId ordinals.
class NominalPool {
 public:
  NominalPool();  // all five controllers
  explicit NominalPool(std::vector<NominalId> members);

  // Parses "all" or a comma-separated list such as "glosa,idm".
  static NominalPool parse(std::string_view spec);

  int size() const { return static_cast<int>(members_.size()); }
  const std::vector<NominalId>& members() const { return members_; }
  NominalId at(int k) const { return members_[k]; }
  std::string to_string() const;

  // Outputs of the member controllers, in member order.
  std::vector<double> evaluate(const Observation& obs) const;

  bool operator==(const NominalPool&) const = default;

 private:
  std::vector<NominalId> members_;
};

}  // namespace ecolane

#endif  // ECOLANE_NOMINAL_HPP_
