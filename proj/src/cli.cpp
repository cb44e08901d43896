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

#include "ecolane/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ecolane/eval.hpp"
#include "ecolane/learner.hpp"
#include "ecolane/policy.hpp"
#include "ecolane/scenario.hpp"
#include "json.hpp"

namespace ecolane {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Options {
  std::string scenarios;
  std::string out;
  std::uint64_t seed = 0;
  int workers = 1;
  int iters = 100;
  int ckpt_every = 0;
  std::string ckpt;
  std::string method;
  std::string pool;
  std::string gating;
  std::optional<double> penetration;
  int replicates = 1;
  std::string scenario_name;
  std::vector<std::string> reports;
  std::string trace;
  std::string log;
  TrainConfig train;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Outputs are write-once: an existing file is never replaced.
class OutputDir {
 public:
  explicit OutputDir(const std::string& dir) : dir_(dir) {
    if (dir.empty()) throw Error("usage", "--out is required");
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec || !fs::is_directory(dir_))
      throw Error("io", "cannot create output directory " + dir_.string());
  }

  fs::path claim(const std::string& name) {
    const fs::path p = dir_ / name;
    if (fs::exists(p))
      throw Error("exists", p.string() + " already exists; outputs are write-once");
    artifacts_.push_back(name);
    return p;
  }

  void write(const std::string& name, const std::string& content) {
    const fs::path p = claim(name);
    std::ofstream f(p, std::ios::binary);
    f << content;
    if (!f) throw Error("io", "failed writing " + p.string());
  }

  const std::vector<std::string>& artifacts() const { return artifacts_; }

 private:
  fs::path dir_;
  std::vector<std::string> artifacts_;
};

ScenarioFile load_inputs(const Options& o, json& inputs) {
  if (o.scenarios.empty()) throw Error("usage", "--scenarios is required");
  const std::string text = read_file(o.scenarios);
  inputs[o.scenarios] = sha256_hex(text);
  ScenarioFile file = parse_scenario_file(text);
  if (o.penetration) override_penetration(file, *o.penetration);
  return file;
}

json train_config_json(const TrainConfig& c) {
  return json{{"gamma", c.gamma},
              {"gae_lambda", c.gae_lambda},
              {"clip_epsilon", c.clip_epsilon},
              {"epochs", c.epochs},
              {"minibatch_size", c.minibatch_size},
              {"steps_per_iteration", c.steps_per_iteration},
              {"learning_rate", c.learning_rate},
              {"entropy_gaussian", c.entropy_gaussian},
              {"entropy_categorical", c.entropy_categorical},
              {"value_coefficient", c.value_coefficient},
              {"max_grad_norm", c.max_grad_norm},
              {"reward_scale", c.reward_scale},
              {"fleet_probability", c.fleet_probability},
              {"reward_weights",
               {{"emission", c.weights.emission},
                {"stop", c.weights.stop},
                {"accel", c.weights.accel}}}};
}

std::optional<NominalPool> requested_pool(const Options& o) {
  if (o.pool.empty()) return std::nullopt;
  return NominalPool::parse(o.pool);
}

std::optional<GatingMode> requested_gating(const Options& o) {
  if (o.gating.empty()) return std::nullopt;
  return parse_gating(o.gating);
}

json common_config(const Options& o) {
  json c{{"scenarios", o.scenarios}, {"seed", o.seed}, {"workers", o.workers}};
  if (o.penetration) c["penetration_override"] = *o.penetration;
  return c;
}

// Loads the checkpoint a policy method needs and checks it matches.
std::optional<Checkpoint> load_policy(const Options& o, const Method& method, json& inputs) {
  if (!method.needs_policy()) {
    if (!o.ckpt.empty())
      throw Error("usage", "method " + method.name() + " does not take --ckpt");
    return std::nullopt;
  }
  if (o.ckpt.empty())
    throw Error("usage", "method " + method.name() + " requires --ckpt <checkpoint>");
  inputs[o.ckpt] = sha256_hex(read_file(o.ckpt));
  Checkpoint ckpt = load_checkpoint(o.ckpt);
  require_compatible(ckpt, method.pool(requested_pool(o)), requested_gating(o));
  return ckpt;
}

class Runner {
 public:
  Runner(std::vector<std::string> argv, std::ostream& out) : argv_(std::move(argv)), out_(out) {}

  void cmd_train(const Options& o) {
    json inputs = json::object();
    const ScenarioFile file = load_inputs(o, inputs);
    if (!file.distribution)
      throw Error("schema", o.scenarios + " has no training distribution block");
    const Method method = Method::parse(o.method.empty() ? "mrmel" : o.method);
    if (!method.needs_policy())
      throw Error("usage", "method " + method.name() + " is not trainable");
    if (o.ckpt_every < 0) throw Error("usage", "--ckpt-every must be non-negative");

    PolicyConfig pc;
    pc.pool = method.pool(requested_pool(o));
    pc.gating = requested_gating(o).value_or(GatingMode::kHard);
    pc.bounds = EncodingBounds::from(file.distribution->contexts);

    OutputDir dir(o.out);
    const fs::path log_path = dir.claim("train_log.tsv");
    const fs::path final_path = dir.claim("final.ckpt");
    if (fs::exists(fs::path(o.out) / "run_manifest.json"))
      throw Error("exists", "run_manifest.json already exists; outputs are write-once");
    std::ofstream log(log_path, std::ios::binary);
    if (!log) throw Error("io", "cannot write " + log_path.string());
    log << "# ecolane training log v1\n" << log_header(pc.pool) << "\n";
    log.flush();

    TrainOptions topts;
    topts.seed = o.seed;
    topts.workers = o.workers;
    topts.iterations = o.iters;
    topts.on_iteration = [&](const IterationLog& row, const Checkpoint& state) {
      log << log_line(row) << "\n";
      log.flush();
      if (o.ckpt_every > 0 && row.iteration % o.ckpt_every == 0) {
        char name[40];
        std::snprintf(name, sizeof(name), "ckpt_%06lld.ckpt",
                      static_cast<long long>(row.iteration));
        save_checkpoint(dir.claim(name), state);
      }
    };
    const Checkpoint final_state = train(*file.distribution, pc, o.train, topts);
    save_checkpoint(final_path, final_state);

    json config = common_config(o);
    config["iters"] = o.iters;
    config["ckpt_every"] = o.ckpt_every;
    config["method"] = method.name();
    config["pool"] = pc.pool.to_string();
    config["gating"] = std::string(to_string(pc.gating));
    config["train"] = train_config_json(o.train);
    config["scenario_file"] = json::parse(serialize_scenario_file(file));
    finish(dir, "train", std::move(config), std::move(inputs));
    out_ << "trained " << o.iters << " iterations; final checkpoint " << final_path.string()
         << "\n";
  }

  void cmd_eval(const Options& o) {
    if (o.method.empty()) throw Error("usage", "--method is required");
    const Method method = Method::parse(o.method);
    json inputs = json::object();
    const std::optional<Checkpoint> ckpt = load_policy(o, method, inputs);
    const ScenarioFile file = load_inputs(o, inputs);
    if (file.scenarios.empty()) throw Error("schema", o.scenarios + " lists no scenarios");

    OutputDir dir(o.out);
    EvalOptions eopts;
    eopts.seed = o.seed;
    eopts.replicates = o.replicates;
    eopts.workers = o.workers;
    if (ckpt) eopts.checkpoint_digest = inputs[o.ckpt].get<std::string>();
    const EvalReport report =
        evaluate(file.scenarios, method, ckpt ? &ckpt->policy : nullptr, eopts);
    dir.write("report.json", report_to_json(report));

    json config = common_config(o);
    config["method"] = method.name();
    config["ckpt"] = o.ckpt;
    config["replicates"] = o.replicates;
    config["scenario_file"] = json::parse(serialize_scenario_file(file));
    finish(dir, "eval", std::move(config), std::move(inputs));
    char line[160];
    std::snprintf(line, sizeof(line),
                  "%s: emission benefit %.3f%%, throughput benefit %.3f%% over %zu scenarios\n",
                  report.method.c_str(), report.emission_benefit, report.throughput_benefit,
                  report.scenarios.size());
    out_ << line;
  }

  void cmd_simulate(const Options& o) {
    const Method method = Method::parse(o.method.empty() ? "idm_baseline" : o.method);
    json inputs = json::object();
    const std::optional<Checkpoint> ckpt = load_policy(o, method, inputs);
    const ScenarioFile file = load_inputs(o, inputs);
    if (file.scenarios.empty()) throw Error("schema", o.scenarios + " lists no scenarios");
    const ScenarioSpec* spec = &file.scenarios.front();
    if (!o.scenario_name.empty()) {
      spec = nullptr;
      for (const ScenarioSpec& s : file.scenarios)
        if (s.name == o.scenario_name) spec = &s;
      if (!spec) throw Error("usage", "no scenario named '" + o.scenario_name + "'");
    }
    ScenarioSpec run = *spec;
    run.seed += o.seed;

    OutputDir dir(o.out);
    const EpisodeResult r = ecolane::simulate(run, method, ckpt ? &ckpt->policy : nullptr, true);
    std::ostringstream trace;
    write_trace(trace, *r.trace);
    dir.write("trace.tsv", trace.str());
    const EpisodeMetrics& m = r.metrics;
    const json metrics{{"scenario", run.name},
                       {"method", method.name()},
                       {"seed", run.seed},
                       {"total_emissions", m.total_emissions},
                       {"mean_travel_time", m.mean_travel_time},
                       {"throughput", m.throughput},
                       {"stop_count", m.stop_count},
                       {"vehicles_entered", m.vehicles_entered},
                       {"vehicles_exited", m.vehicles_exited},
                       {"censored", m.censored},
                       {"arrivals_digest", arrivals_digest(r.arrivals)}};
    dir.write("metrics.json", metrics.dump(2) + "\n");

    json config = common_config(o);
    config["method"] = method.name();
    config["ckpt"] = o.ckpt;
    config["scenario"] = run.name;
    config["scenario_file"] = json::parse(serialize_scenario_file(file));
    finish(dir, "simulate", std::move(config), std::move(inputs));
    out_ << run.name << " " << method.name() << ": emissions " << m.total_emissions
         << " g, stops " << m.stop_count << ", exited " << m.vehicles_exited << "\n";
  }

  void cmd_compare(const Options& o) {
    if (o.reports.size() < 2) throw Error("usage", "--reports needs at least two files");
    json inputs = json::object();
    std::vector<EvalReport> reports;
    for (const std::string& path : o.reports) {
      const std::string text = read_file(path);
      inputs[path] = sha256_hex(text);
      reports.push_back(report_from_json(text));
    }
    const Comparison c = ecolane::compare(reports);
    OutputDir dir(o.out);
    const std::string table = comparison_table(c);
    dir.write("benefit.tsv", table);
    json config{{"reports", o.reports}};
    finish(dir, "compare", std::move(config), std::move(inputs));
    for (const auto& [method, b] : c.summary) {
      char line[160];
      std::snprintf(line, sizeof(line), "%s: emission %.3f%%, throughput %.3f%%\n",
                    method.c_str(), b.first, b.second);
      out_ << line;
    }
  }

  void cmd_export(const Options& o) {
    if (o.trace.empty() && o.log.empty())
      throw Error("usage", "export needs --trace and/or --log");
    json inputs = json::object();
    OutputDir dir(o.out);
    if (!o.trace.empty()) {
      inputs[o.trace] = sha256_hex(read_file(o.trace));
      const EpisodeTrace trace = read_trace(o.trace);
      dir.write("timespace.tsv", export_timespace(trace));
      dir.write("signal.tsv", export_signal(trace));
    }
    if (!o.log.empty()) {
      const std::string text = read_file(o.log);
      inputs[o.log] = sha256_hex(text);
      dir.write("usage.tsv", export_usage(text));
    }
    json config{{"trace", o.trace}, {"log", o.log}};
    finish(dir, "export", std::move(config), std::move(inputs));
    for (const std::string& a : dir.artifacts()) out_ << "wrote " << a << "\n";
  }

 private:
  void finish(OutputDir& dir, const std::string& command, json config, json inputs) {
    std::vector<std::string> artifacts = dir.artifacts();
    artifacts.push_back("run_manifest.json");
    const json m{{"tool", "ecolane"},
                 {"library_version", std::string(kVersion)},
                 {"subcommand", command},
                 {"argv", argv_},
                 {"config", std::move(config)},
                 {"inputs", std::move(inputs)},
                 {"artifacts", artifacts}};
    dir.write("run_manifest.json", m.dump(2) + "\n");
  }

  std::vector<std::string> argv_;
  std::ostream& out_;
};

void add_train_flags(CLI::App* cmd, Options& o) {
  TrainConfig& t = o.train;
  cmd->add_option("--epochs", t.epochs, "PPO epochs per iteration")->capture_default_str();
  cmd->add_option("--minibatch", t.minibatch_size, "PPO minibatch size")->capture_default_str();
  cmd->add_option("--steps-per-iter", t.steps_per_iteration,
                  "transitions collected per iteration")->capture_default_str();
  cmd->add_option("--lr", t.learning_rate, "Adam learning rate")->capture_default_str();
  cmd->add_option("--gamma", t.gamma, "discount")->capture_default_str();
  cmd->add_option("--gae-lambda", t.gae_lambda, "GAE lambda")->capture_default_str();
  cmd->add_option("--clip", t.clip_epsilon, "PPO clip epsilon")->capture_default_str();
  cmd->add_option("--fleet-prob", t.fleet_probability,
                  "probability of a fleet-reward step")->capture_default_str();
  cmd->add_option("--reward-scale", t.reward_scale,
                  "reward multiplier for value targets")->capture_default_str();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  init_logging();
  Options o;
  CLI::App app{"ecolane: signalized-corridor eco-driving simulator and trainer", "ecolane"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  auto scenarios_flag = [&](CLI::App* c) {
    c->add_option("--scenarios", o.scenarios, "scenario file (JSON)");
    c->add_option("--penetration-override", o.penetration,
                  "replace every AV penetration with this value")
        ->check(CLI::Range(0.0, 1.0));
  };
  auto common = [&](CLI::App* c) {
    c->add_option("--out", o.out, "output directory")->required();
    c->add_option("--seed", o.seed, "base seed")->capture_default_str();
  };
  auto policy_flags = [&](CLI::App* c) {
    c->add_option("--method", o.method,
                  "idm_baseline | glosa_all | rrl:<nominal> | mrtl | multitask | mrmel");
    c->add_option("--ckpt", o.ckpt, "policy checkpoint");
    c->add_option("--pool", o.pool, "nominal subset for mrmel, e.g. glosa,idm (default all)");
    c->add_option("--gating", o.gating, "hard | soft");
  };

  CLI::App* train = app.add_subcommand("train", "train a policy on a scenario distribution");
  scenarios_flag(train);
  common(train);
  policy_flags(train);
  train->add_option("--workers", o.workers, "rollout workers")->capture_default_str();
  train->add_option("--iters", o.iters, "training iterations")->capture_default_str();
  train->add_option("--ckpt-every", o.ckpt_every, "checkpoint cadence (0: final only)")
      ->capture_default_str();
  add_train_flags(train, o);

  CLI::App* eval = app.add_subcommand("eval", "evaluate a method against the IDM baseline");
  scenarios_flag(eval);
  common(eval);
  policy_flags(eval);
  eval->add_option("--workers", o.workers, "evaluation workers")->capture_default_str();
  eval->add_option("--replicates", o.replicates, "seeds per scenario")->capture_default_str();

  CLI::App* sim = app.add_subcommand("simulate", "simulate one scenario and write its trace");
  scenarios_flag(sim);
  common(sim);
  policy_flags(sim);
  sim->add_option("--scenario", o.scenario_name, "scenario name (default: first)");

  CLI::App* cmp = app.add_subcommand("compare", "benefit table from evaluation reports");
  cmp->add_option("--reports", o.reports, "two or more report.json files")->required();
  cmp->add_option("--out", o.out, "output directory")->required();

  CLI::App* exp = app.add_subcommand("export", "plot data from a trace or training log");
  exp->add_option("--trace", o.trace, "episode trace (trace.tsv)");
  exp->add_option("--log", o.log, "training log (train_log.tsv)");
  exp->add_option("--out", o.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: usage: " << msg << "\n";
    return kExitUsage;
  }

  std::vector<std::string> args(argv, argv + argc);
  Runner runner(args, out);
  try {
    if (*train) runner.cmd_train(o);
    else if (*eval) runner.cmd_eval(o);
    else if (*sim) runner.cmd_simulate(o);
    else if (*cmp) runner.cmd_compare(o);
    else if (*exp) runner.cmd_export(o);
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return e.kind() == "usage" ? kExitUsage : kExitError;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return kExitError;
  }
  return kExitOk;
}

}  // namespace ecolane
