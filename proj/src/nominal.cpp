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

#include "ecolane/nominal.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ecolane {

std::string_view to_string(NominalId id) {
  switch (id) {
    case NominalId::kGlosa: return "glosa";
    case NominalId::kConstAcc: return "const_acc";
    case NominalId::kConstDec: return "const_dec";
    case NominalId::kIdm: return "idm";
    case NominalId::kZero: return "zero";
  }
  return "?";
}

std::optional<NominalId> parse_nominal(std::string_view name) {
  for (NominalId id : kAllNominals) {
    if (to_string(id) == name) return id;
  }
  return std::nullopt;
}

IdmParams IdmParams::nominal(double speed_limit) {
  IdmParams p;
  p.v0 = speed_limit;
  return p;
}

IdmParams IdmParams::human(double speed_limit) {
  IdmParams p;
  p.v0 = speed_limit;
  p.T = 1.2;
  return p;
}

double idm_accel(const Observation& obs, const IdmParams& p) {
  const double v = obs.ego_speed;
  const double free_term = 1.0 - std::pow(v / p.v0, p.delta);
  double gap = 0.0;
  double dv = 0.0;
  if (obs.leader.present) {
    gap = obs.leader.gap;
    dv = v - obs.leader.speed;
  } else if (obs.signal_phase == Phase::kRed) {
    gap = obs.ego_distance_to_signal;
    dv = v;
  } else {
    return std::clamp(p.a_max * free_term, -kIdmMaxDecel, p.a_max);
  }
  gap = std::max(gap, 1e-3);
  const double desired =
      p.s0 + std::max(0.0, v * p.T + v * dv / (2.0 * std::sqrt(p.a_max * p.b)));
  const double ratio = desired / gap;
  return std::clamp(p.a_max * (free_term - ratio * ratio), -kIdmMaxDecel,
                    p.a_max);
}

double glosa_accel(const Observation& obs) {
  const Context& c = obs.context;
  const double v = obs.ego_speed;
  const double d = std::max(0.0, obs.ego_distance_to_signal);
  const double v_max = c.speed_limit;
  const double tau = obs.time_to_change;
  const bool green = obs.signal_phase == Phase::kGreen;

  if (!green && d <= kGlosaHoldDistance) {
    return -IdmParams{}.b;
  }

  // The next two green windows, relative to now.
  struct Window { double open, close; };
  const Window first = green
      ? Window{0.0, tau}
      : Window{tau, tau + c.green_duration};
  const Window later = green
      ? Window{tau + c.red_duration, tau + c.red_duration + c.green_duration}
      : Window{tau + c.cycle(), tau + c.cycle() + c.green_duration};

  auto advise = [&](const Window& w) -> std::optional<double> {
    const double target = w.open > 0.0 ? std::min(v_max, d / w.open) : v_max;
    if (target < kGlosaMinSpeed) return std::nullopt;
    if (d / target >= w.close) return std::nullopt;
    return std::clamp((target - v) / kGlosaSmoothingHorizon, kAccelMin,
                      kAccelMax);
  };
  if (auto a = advise(first)) return *a;
  if (auto a = advise(later)) return *a;

  // Glide: reach the stop line exactly when the next green opens, or stop at
  // the line if that would require reversing.
  const double t_open = green ? tau + c.red_duration : tau;
  double a = 2.0 * (d - v * t_open) / (t_open * t_open);
  if (v + a * t_open < 0.0) {
    a = d > 0.0 ? -v * v / (2.0 * d) : -IdmParams{}.b;
  }
  return std::clamp(a, kAccelMin, kAccelMax);
}

double const_acc(const Observation&) { return kConstAccel; }
double const_dec(const Observation&) { return kConstDecel; }
double zero_action(const Observation&) { return 0.0; }

double evaluate_nominal(NominalId id, const Observation& obs) {
  switch (id) {
    case NominalId::kGlosa: return glosa_accel(obs);
    case NominalId::kConstAcc: return const_acc(obs);
    case NominalId::kConstDec: return const_dec(obs);
    case NominalId::kIdm:
      return idm_accel(obs, IdmParams::nominal(obs.context.speed_limit));
    case NominalId::kZero: return zero_action(obs);
  }
  return 0.0;
}

PoolOutput evaluate_pool(const Observation& obs) {
  PoolOutput out{};
  for (NominalId id : kAllNominals) {
    out[static_cast<int>(id)] = evaluate_nominal(id, obs);
  }
  return out;
}

NominalPool::NominalPool()
    : members_(kAllNominals.begin(), kAllNominals.end()) {}

NominalPool::NominalPool(std::vector<NominalId> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw Error("validation", "nominal pool is empty");
  std::sort(members_.begin(), members_.end());
  if (std::adjacent_find(members_.begin(), members_.end()) != members_.end()) {
    throw Error("validation", "nominal pool lists a controller twice");
  }
}

NominalPool NominalPool::parse(std::string_view spec) {
  if (spec == "all") return NominalPool();
  std::vector<NominalId> members;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string_view name =
        spec.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                           : comma - start);
    const auto id = parse_nominal(name);
    if (!id) {
      throw Error("validation",
                  "unknown nominal controller '" + std::string(name) +
                      "' (expected glosa|const_acc|const_dec|idm|zero|all)");
    }
    members.push_back(*id);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return NominalPool(std::move(members));
}

std::string NominalPool::to_string() const {
  std::string out;
  for (NominalId id : members_) {
    if (!out.empty()) out += ",";
    out += ecolane::to_string(id);
  }
  return out;
}

std::vector<double> NominalPool::evaluate(const Observation& obs) const {
  std::vector<double> out;
  out.reserve(members_.size());
  for (NominalId id : members_) out.push_back(evaluate_nominal(id, obs));
  return out;
}

}  // namespace ecolane
