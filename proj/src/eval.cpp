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

#include "ecolane/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace ecolane {
namespace {

using nlohmann::json;

constexpr int kReportSchemaVersion = 1;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json spec_to_json(const ScenarioSpec& spec) {
  ScenarioFile f;
  f.scenarios.push_back(spec);
  return json::parse(serialize_scenario_file(f)).at("scenarios").at(0);
}

ScenarioSpec spec_from_json(const json& j) {
  const json root{{"schema_version", kScenarioSchemaVersion},
                  {"scenarios", json::array({j})}};
  return parse_scenario_file(root.dump()).scenarios.at(0);
}

json metrics_to_json(const EpisodeMetrics& m) {
  return json{{"total_emissions", m.total_emissions},
              {"mean_travel_time", m.mean_travel_time},
              {"throughput", m.throughput},
              {"stop_count", m.stop_count},
              {"vehicles_entered", m.vehicles_entered},
              {"vehicles_exited", m.vehicles_exited},
              {"censored", m.censored}};
}

EpisodeMetrics metrics_from_json(const json& j) {
  EpisodeMetrics m;
  m.total_emissions = j.at("total_emissions").get<double>();
  m.mean_travel_time = j.at("mean_travel_time").get<double>();
  m.throughput = j.at("throughput").get<double>();
  m.stop_count = j.at("stop_count").get<int>();
  m.vehicles_entered = j.at("vehicles_entered").get<int>();
  m.vehicles_exited = j.at("vehicles_exited").get<int>();
  m.censored = j.at("censored").get<int>();
  return m;
}

json summary_to_json(const MetricSummary& s) {
  return json{{"emissions", s.emissions},
              {"throughput", s.throughput},
              {"travel_time", s.travel_time},
              {"stops", s.stops}};
}

MetricSummary summary_from_json(const json& j) {
  return MetricSummary{j.at("emissions").get<double>(), j.at("throughput").get<double>(),
                       j.at("travel_time").get<double>(), j.at("stops").get<double>()};
}

json replicates_to_json(const std::vector<ReplicateResult>& reps) {
  json out = json::array();
  for (const ReplicateResult& r : reps)
    out.push_back(json{{"seed", r.seed},
                       {"arrivals_digest", r.arrivals_digest},
                       {"metrics", metrics_to_json(r.metrics)}});
  return out;
}

std::vector<ReplicateResult> replicates_from_json(const json& j) {
  std::vector<ReplicateResult> out;
  for (const json& r : j)
    out.push_back(ReplicateResult{r.at("seed").get<std::uint64_t>(),
                                  metrics_from_json(r.at("metrics")),
                                  r.at("arrivals_digest").get<std::string>()});
  return out;
}

MetricSummary mean_of(const std::vector<ReplicateResult>& reps) {
  MetricSummary s;
  if (reps.empty()) return s;
  for (const ReplicateResult& r : reps) {
    s.emissions += r.metrics.total_emissions;
    s.throughput += r.metrics.throughput;
    s.travel_time += r.metrics.mean_travel_time;
    s.stops += r.metrics.stop_count;
  }
  const double inv = 1.0 / static_cast<double>(reps.size());
  s.emissions *= inv;
  s.throughput *= inv;
  s.travel_time *= inv;
  s.stops *= inv;
  return s;
}

// Runs jobs [0, n) on `workers` threads; job i goes to worker i % workers.
template <typename Fn>
void parallel_for(int n, int workers, Fn fn) {
  workers = std::max(1, std::min(workers, n));
  if (workers == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Method Method::parse(std::string_view name) {
  if (name == "idm_baseline") return {MethodKind::kIdmBaseline};
  if (name == "glosa_all") return {MethodKind::kGlosaAll};
  if (name == "multitask") return {MethodKind::kMultitask};
  if (name == "mrmel") return {MethodKind::kMrmel};
  if (name == "mrtl") return {MethodKind::kRrl, NominalId::kGlosa};
  if (name.starts_with("rrl:")) {
    const auto id = parse_nominal(name.substr(4));
    if (id) return {MethodKind::kRrl, *id};
  }
  throw Error("usage", "unknown method '" + std::string(name) +
                           "' (expected idm_baseline, glosa_all, rrl:<nominal>, mrtl, "
                           "multitask or mrmel)");
}

std::string Method::name() const {
  switch (kind) {
    case MethodKind::kIdmBaseline: return "idm_baseline";
    case MethodKind::kGlosaAll: return "glosa_all";
    case MethodKind::kRrl: return "rrl:" + std::string(to_string(nominal));
    case MethodKind::kMultitask: return "multitask";
    case MethodKind::kMrmel: return "mrmel";
  }
  return "";
}

bool Method::needs_policy() const {
  return kind == MethodKind::kRrl || kind == MethodKind::kMultitask ||
         kind == MethodKind::kMrmel;
}

NominalPool Method::pool(const std::optional<NominalPool>& requested) const {
  switch (kind) {
    case MethodKind::kRrl: return NominalPool({nominal});
    case MethodKind::kMultitask: return NominalPool({NominalId::kZero});
    case MethodKind::kMrmel: return requested ? *requested : NominalPool();
    default: throw Error("usage", "method " + name() + " has no policy pool");
  }
}

std::uint64_t replicate_seed(const ScenarioSpec& spec, std::uint64_t base, int replicate) {
  return spec.seed + base + static_cast<std::uint64_t>(replicate);
}

AvMode av_mode_for(const Method& method) {
  return method.kind == MethodKind::kIdmBaseline ? AvMode::kHuman : AvMode::kCommanded;
}

AvController make_controller(const Method& method, const Policy* policy) {
  if (method.needs_policy() && !policy)
    throw Error("usage", "method " + method.name() + " requires a policy checkpoint (--ckpt)");
  switch (method.kind) {
    case MethodKind::kIdmBaseline:
      return {};
    case MethodKind::kGlosaAll:
      return [](const WorldState& world) {
        AvCommands commands;
        for (int id : live_avs(world)) commands[id] = glosa_accel(observe(world, id));
        return commands;
      };
    default:
      return [policy](const WorldState& world) {
        const std::vector<int> ids = live_avs(world);
        std::vector<Observation> obs;
        obs.reserve(ids.size());
        for (int id : ids) obs.push_back(observe(world, id));
        Rng unused(0);
        const std::vector<ActionRecord> actions =
            act_batch(*policy, obs, unused, ActMode::kEval);
        AvCommands commands;
        for (std::size_t i = 0; i < ids.size(); ++i) commands[ids[i]] = actions[i].final_accel;
        return commands;
      };
  }
}

EpisodeResult simulate(const ScenarioSpec& spec, const Method& method,
                       const Policy* policy, bool record_trace) {
  return run_episode(spec, av_mode_for(method), make_controller(method, policy),
                     record_trace);
}

std::string arrivals_digest(const std::vector<ArrivalRecord>& arrivals) {
  std::string text;
  for (const ArrivalRecord& a : arrivals)
    text += std::to_string(a.id) + "\t" + std::string(to_string(a.cls)) + "\t" +
            fmt(a.arrival_time) + "\n";
  return sha256_hex(text);
}

double emission_improvement(double baseline, double method) {
  if (!(baseline > 0.0)) throw Error("baseline", "baseline emissions must be positive");
  return (baseline - method) / baseline * 100.0;
}

double throughput_improvement(double baseline, double method) {
  if (!(baseline > 0.0)) throw Error("baseline", "baseline throughput must be positive");
  return (method - baseline) / baseline * 100.0;
}

std::vector<ReplicateResult> run_method(const ScenarioSpec& spec, const Method& method,
                                        const Policy* policy, const EvalOptions& options) {
  const AvController controller = make_controller(method, policy);
  std::vector<ReplicateResult> out;
  for (int i = 0; i < options.replicates; ++i) {
    ScenarioSpec s = spec;
    s.seed = replicate_seed(spec, options.seed, i);
    const EpisodeResult r = run_episode(s, av_mode_for(method), controller, false);
    out.push_back(ReplicateResult{s.seed, r.metrics, arrivals_digest(r.arrivals)});
  }
  return out;
}

EvalReport evaluate(const std::vector<ScenarioSpec>& scenarios, const Method& method,
                    const Policy* policy, const EvalOptions& options) {
  if (options.replicates < 1) throw Error("usage", "replicates must be at least 1");
  if (policy && !method.needs_policy())
    throw Error("usage", "method " + method.name() + " does not take a checkpoint");
  make_controller(method, policy);  // argument check before any work

  EvalReport report;
  report.method = method.name();
  if (policy) {
    report.pool = policy->config().pool.to_string();
    report.gating = std::string(to_string(policy->config().gating));
    report.checkpoint_digest = options.checkpoint_digest;
  }
  report.seed = options.seed;
  report.replicates = options.replicates;
  report.scenarios.resize(scenarios.size());

  const int n = static_cast<int>(scenarios.size());
  const Method baseline{MethodKind::kIdmBaseline};
  parallel_for(2 * n, options.workers, [&](int job) {
    const int i = job / 2;
    ScenarioResult& r = report.scenarios[i];
    if (job % 2 == 0)
      r.method = run_method(scenarios[i], method, policy, options);
    else
      r.baseline = run_method(scenarios[i], baseline, nullptr, options);
  });

  for (int i = 0; i < n; ++i) {
    ScenarioResult& r = report.scenarios[i];
    r.spec = scenarios[i];
    for (std::size_t k = 0; k < r.method.size(); ++k) {
      if (r.method[k].arrivals_digest != r.baseline[k].arrivals_digest)
        throw Error("pairing", "arrivals differ between " + method.name() +
                                   " and the baseline in scenario " + r.spec.name);
    }
    r.method_mean = mean_of(r.method);
    r.baseline_mean = mean_of(r.baseline);
    r.emission_benefit = emission_improvement(r.baseline_mean.emissions, r.method_mean.emissions);
    r.throughput_benefit =
        r.baseline_mean.throughput > 0.0
            ? throughput_improvement(r.baseline_mean.throughput, r.method_mean.throughput)
            : 0.0;
    report.emission_benefit += r.emission_benefit / n;
    report.throughput_benefit += r.throughput_benefit / n;
  }

  json scen = json::array();
  for (const ScenarioSpec& s : scenarios) scen.push_back(spec_to_json(s));
  const json config{{"library_version", std::string(kVersion)},
                    {"method", report.method},
                    {"pool", report.pool},
                    {"gating", report.gating},
                    {"checkpoint_digest", report.checkpoint_digest},
                    {"seed", report.seed},
                    {"replicates", report.replicates},
                    {"scenarios", scen}};
  report.config_digest = sha256_hex(config.dump());
  return report;
}

std::string report_to_json(const EvalReport& report) {
  json scen = json::array();
  for (const ScenarioResult& r : report.scenarios) {
    scen.push_back(json{{"scenario", spec_to_json(r.spec)},
                        {"method", replicates_to_json(r.method)},
                        {"baseline", replicates_to_json(r.baseline)},
                        {"method_mean", summary_to_json(r.method_mean)},
                        {"baseline_mean", summary_to_json(r.baseline_mean)},
                        {"emission_benefit_pct", r.emission_benefit},
                        {"throughput_benefit_pct", r.throughput_benefit}});
  }
  const json root{{"format", "ecolane-eval-report"},
                  {"schema_version", kReportSchemaVersion},
                  {"library_version", std::string(kVersion)},
                  {"method", report.method},
                  {"pool", report.pool},
                  {"gating", report.gating},
                  {"checkpoint_digest", report.checkpoint_digest},
                  {"seed", report.seed},
                  {"replicates", report.replicates},
                  {"scenarios", scen},
                  {"aggregate",
                   {{"emission_benefit_pct", report.emission_benefit},
                    {"throughput_benefit_pct", report.throughput_benefit}}},
                  {"config_digest", report.config_digest}};
  return root.dump(2) + "\n";
}

EvalReport report_from_json(const std::string& text) {
  try {
    const json root = json::parse(text);
    if (root.at("format") != "ecolane-eval-report")
      throw Error("schema", "not an ecolane evaluation report");
    if (root.at("schema_version").get<int>() != kReportSchemaVersion)
      throw Error("schema", "unsupported report schema version");
    EvalReport r;
    r.method = root.at("method").get<std::string>();
    r.pool = root.at("pool").get<std::string>();
    r.gating = root.at("gating").get<std::string>();
    r.checkpoint_digest = root.at("checkpoint_digest").get<std::string>();
    r.seed = root.at("seed").get<std::uint64_t>();
    r.replicates = root.at("replicates").get<int>();
    for (const json& s : root.at("scenarios")) {
      ScenarioResult sr;
      sr.spec = spec_from_json(s.at("scenario"));
      sr.method = replicates_from_json(s.at("method"));
      sr.baseline = replicates_from_json(s.at("baseline"));
      sr.method_mean = summary_from_json(s.at("method_mean"));
      sr.baseline_mean = summary_from_json(s.at("baseline_mean"));
      sr.emission_benefit = s.at("emission_benefit_pct").get<double>();
      sr.throughput_benefit = s.at("throughput_benefit_pct").get<double>();
      r.scenarios.push_back(std::move(sr));
    }
    r.emission_benefit = root.at("aggregate").at("emission_benefit_pct").get<double>();
    r.throughput_benefit = root.at("aggregate").at("throughput_benefit_pct").get<double>();
    r.config_digest = root.at("config_digest").get<std::string>();
    return r;
  } catch (const json::exception& e) {
    throw Error("schema", std::string("bad evaluation report: ") + e.what());
  }
}

Comparison compare(const std::vector<EvalReport>& reports) {
  if (reports.size() < 2) throw Error("usage", "compare needs at least two reports");
  const EvalReport& ref = reports.front();
  Comparison out;
  for (const EvalReport& rep : reports) {
    if (rep.scenarios.size() != ref.scenarios.size())
      throw Error("mismatch", "report for " + rep.method + " has " +
                                  std::to_string(rep.scenarios.size()) + " scenarios, expected " +
                                  std::to_string(ref.scenarios.size()));
    for (std::size_t i = 0; i < rep.scenarios.size(); ++i) {
      const ScenarioResult& a = ref.scenarios[i];
      const ScenarioResult& b = rep.scenarios[i];
      if (!(a.spec == b.spec))
        throw Error("mismatch", "scenario " + std::to_string(i) + " differs between reports ('" +
                                    a.spec.name + "' vs '" + b.spec.name + "')");
      if (a.baseline.size() != b.baseline.size())
        throw Error("mismatch", "replicate counts differ in scenario " + a.spec.name);
      for (std::size_t k = 0; k < a.baseline.size(); ++k) {
        if (a.baseline[k].seed != b.baseline[k].seed ||
            a.baseline[k].arrivals_digest != b.baseline[k].arrivals_digest)
          throw Error("mismatch", "seeds or arrivals differ in scenario " + a.spec.name);
      }
    }
  }
  for (const EvalReport& rep : reports) {
    double emission = 0.0, throughput = 0.0;
    for (const ScenarioResult& s : rep.scenarios) {
      ComparisonRow row;
      row.scenario = s.spec.name;
      row.method = rep.method;
      row.baseline_emissions = s.baseline_mean.emissions;
      row.method_emissions = s.method_mean.emissions;
      row.emission_benefit = emission_improvement(s.baseline_mean.emissions, s.method_mean.emissions);
      row.baseline_throughput = s.baseline_mean.throughput;
      row.method_throughput = s.method_mean.throughput;
      row.throughput_benefit =
          s.baseline_mean.throughput > 0.0
              ? throughput_improvement(s.baseline_mean.throughput, s.method_mean.throughput)
              : 0.0;
      emission += row.emission_benefit;
      throughput += row.throughput_benefit;
      out.rows.push_back(row);
    }
    const double n = static_cast<double>(rep.scenarios.size());
    out.summary.push_back({rep.method, {n > 0 ? emission / n : 0.0, n > 0 ? throughput / n : 0.0}});
  }
  return out;
}

std::string comparison_table(const Comparison& c) {
  std::string s = "# ecolane benefit table v1\n";
  s += "scenario\tmethod\tbaseline_emissions_g\tmethod_emissions_g\temission_benefit_pct"
       "\tbaseline_throughput_vph\tmethod_throughput_vph\tthroughput_benefit_pct\n";
  for (const ComparisonRow& r : c.rows) {
    s += r.scenario + "\t" + r.method + "\t" + fmt(r.baseline_emissions) + "\t" +
         fmt(r.method_emissions) + "\t" + fmt(r.emission_benefit) + "\t" +
         fmt(r.baseline_throughput) + "\t" + fmt(r.method_throughput) + "\t" +
         fmt(r.throughput_benefit) + "\n";
  }
  s += "# summary: unweighted mean over scenarios\n";
  s += "# method\tmean_emission_benefit_pct\tmean_throughput_benefit_pct\n";
  for (const auto& [method, benefit] : c.summary)
    s += "# " + method + "\t" + fmt(benefit.first) + "\t" + fmt(benefit.second) + "\n";
  return s;
}

std::string export_timespace(const EpisodeTrace& trace) {
  std::vector<TraceRow> rows = trace.rows;
  std::stable_sort(rows.begin(), rows.end(), [](const TraceRow& a, const TraceRow& b) {
    return a.id != b.id ? a.id < b.id : a.step < b.step;
  });
  std::string s = "# ecolane timespace v1\nid\tclass\tt\tposition\n";
  for (const TraceRow& r : rows)
    s += std::to_string(r.id) + "\t" + std::string(to_string(r.cls)) + "\t" + fmt(r.clock) +
         "\t" + fmt(r.position) + "\n";
  return s;
}

std::string export_signal(const EpisodeTrace& trace) {
  const Context& c = trace.spec.context;
  const double horizon = trace.spec.horizon;
  const double cycle = c.cycle();
  std::vector<double> cuts = {0.0, horizon};
  // Phase changes at t with (t + offset) mod cycle in {0, green}.
  const double base = -c.signal_offset;
  const long m0 = static_cast<long>(std::floor(-base / cycle)) - 1;
  for (long m = m0;; ++m) {
    const double start = base + static_cast<double>(m) * cycle;
    if (start >= horizon) break;
    for (double t : {start, start + c.green_duration})
      if (t > 0.0 && t < horizon) cuts.push_back(t);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  std::string s = "# ecolane signal v1\nstart\tend\tphase\n";
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const SignalState sig = signal_at(c, 0.5 * (cuts[i] + cuts[i + 1]));
    s += fmt(cuts[i]) + "\t" + fmt(cuts[i + 1]) + "\t" +
         (sig.phase == Phase::kGreen ? "green" : "red") + "\n";
  }
  return s;
}

std::string export_usage(const std::string& training_log) {
  std::istringstream in(training_log);
  std::string line;
  std::vector<std::string> header;
  std::vector<int> keep;
  std::string out = "# ecolane usage v1\n";
  auto split = [](const std::string& l) {
    std::vector<std::string> f;
    std::stringstream ss(l);
    std::string x;
    while (std::getline(ss, x, '\t')) f.push_back(x);
    return f;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const std::vector<std::string> fields = split(line);
    if (header.empty()) {
      header = fields;
      for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == "iteration" || header[i] == "mean_reward" ||
            header[i].starts_with("usage_"))
          keep.push_back(static_cast<int>(i));
      if (header.empty() || header[0] != "iteration")
        throw Error("schema", "training log has no header row");
    }
    if (fields.size() != header.size())
      throw Error("schema", "training log row has " + std::to_string(fields.size()) +
                                " fields, expected " + std::to_string(header.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      if (k) out += "\t";
      out += fields[keep[k]];
    }
    out += "\n";
  }
  return out;
}

}  // namespace ecolane
