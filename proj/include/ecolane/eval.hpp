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

// Benchmark harness. Every method is simulated on the same scenarios and
// seeds as the IDM baseline, so arrivals are identical and differences are
// method-driven.

#ifndef ECOLANE_EVAL_HPP_
#define ECOLANE_EVAL_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ecolane/policy.hpp"
#include "ecolane/scenario.hpp"
#include "ecolane/sim.hpp"

namespace ecolane {

enum class MethodKind { kIdmBaseline, kGlosaAll, kRrl, kMultitask, kMrmel };

// idm_baseline | glosa_all | rrl:<nominal> | mrtl (= rrl:glosa) | multitask | mrmel
struct Method {
  MethodKind kind = MethodKind::kIdmBaseline;
  NominalId nominal = NominalId::kGlosa;  // kRrl only

  static Method parse(std::string_view name);
  std::string name() const;
  bool needs_policy() const;
  // Pool a trained policy for this method must use. `requested` applies to
  // mrmel only (default: all nominals).
  NominalPool pool(const std::optional<NominalPool>& requested = std::nullopt) const;

  bool operator==(const Method&) const = default;
};

// Seed of replicate i of a scenario.
std::uint64_t replicate_seed(const ScenarioSpec& spec, std::uint64_t base, int replicate);

// AV controller for a method. `policy` is required exactly when
// method.needs_policy(); idm_baseline returns an empty controller and must
// run with AvMode::kHuman.
AvController make_controller(const Method& method, const Policy* policy);
AvMode av_mode_for(const Method& method);

EpisodeResult simulate(const ScenarioSpec& spec, const Method& method,
                       const Policy* policy, bool record_trace);

struct ReplicateResult {
  std::uint64_t seed = 0;
  EpisodeMetrics metrics;
  std::string arrivals_digest;
};

struct MetricSummary {
  double emissions = 0.0;
  double throughput = 0.0;
  double travel_time = 0.0;
  double stops = 0.0;
};

struct ScenarioResult {
  ScenarioSpec spec;
  std::vector<ReplicateResult> method;
  std::vector<ReplicateResult> baseline;
  MetricSummary method_mean;
  MetricSummary baseline_mean;
  double emission_benefit = 0.0;    // %
  double throughput_benefit = 0.0;  // %
};

struct EvalReport {
  std::string method;
  std::string pool;
  std::string gating;
  std::string checkpoint_digest;
  std::uint64_t seed = 0;
  int replicates = 1;
  std::vector<ScenarioResult> scenarios;
  double emission_benefit = 0.0;    // unweighted mean over scenarios
  double throughput_benefit = 0.0;
  std::string config_digest;
};

// (baseline - method) / baseline * 100. Throws Error("baseline") unless
// baseline > 0.
double emission_improvement(double baseline, double method);
// (method - baseline) / baseline * 100.
double throughput_improvement(double baseline, double method);

struct EvalOptions {
  std::uint64_t seed = 0;
  int replicates = 1;
  int workers = 1;
  std::string checkpoint_digest;  // recorded when a policy is used
};

std::vector<ReplicateResult> run_method(const ScenarioSpec& spec, const Method& method,
                                        const Policy* policy, const EvalOptions& options);

EvalReport evaluate(const std::vector<ScenarioSpec>& scenarios, const Method& method,
                    const Policy* policy, const EvalOptions& options);

std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

// Per-scenario benefit table of every report against the IDM baseline each
// embeds. Throws Error("mismatch") unless scenario sets, seeds and baseline
// metrics agree.
struct ComparisonRow {
  std::string scenario;
  std::string method;
  double baseline_emissions = 0.0;
  double method_emissions = 0.0;
  double emission_benefit = 0.0;
  double baseline_throughput = 0.0;
  double method_throughput = 0.0;
  double throughput_benefit = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  // method -> (mean emission benefit, mean throughput benefit)
  std::vector<std::pair<std::string, std::pair<double, double>>> summary;
};

Comparison compare(const std::vector<EvalReport>& reports);
std::string comparison_table(const Comparison& comparison);

// Plot data. Time-space rows: id, class, t, position; signal rows: start,
// end, phase.
std::string export_timespace(const EpisodeTrace& trace);
std::string export_signal(const EpisodeTrace& trace);
// iteration, mean_reward, usage_<nominal>... from a training log.
std::string export_usage(const std::string& training_log);

std::string arrivals_digest(const std::vector<ArrivalRecord>& arrivals);

}  // namespace ecolane

#endif  // ECOLANE_EVAL_HPP_
