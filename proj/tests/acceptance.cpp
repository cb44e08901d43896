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

// Acceptance runner. Each criterion prints one PASS/FAIL line; the exit code
// is non-zero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ecolane/cli.hpp"
#include "ecolane/eval.hpp"
#include "ecolane/learner.hpp"
#include "ecolane/policy.hpp"
#include "ecolane/sim.hpp"

namespace fs = std::filesystem;
using namespace ecolane;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x, int precision = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, x);
  return buf;
}

fs::path tmp_dir(const std::string& name) {
  const fs::path p = fs::path(ECOLANE_TEST_TMP) / name;
  fs::create_directories(p.parent_path());
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string data(const std::string& name) {
  return std::string(ECOLANE_DATA_DIR) + "/scenarios/" + name;
}

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

// ---------------------------------------------------------------------------
// 1. gradients

Matrix random_matrix(int r, int c, Rng& rng, double scale = 1.0) {
  Matrix m(r, c);
  for (int i = 0; i < m.size(); ++i) m(i) = scale * (2.0 * uniform01(rng) - 1.0);
  return m;
}

double mlp_fd_error(const std::vector<int>& widths, Rng& rng) {
  Mlp net = Mlp::glorot(widths, rng, 1.0);
  const Matrix x = random_matrix(widths.front(), 5, rng);
  const Matrix c = random_matrix(widths.back(), 5, rng);
  ForwardCache cache;
  forward(net, x, &cache);
  const Gradients g = backward(net, cache, c);
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t b = 0; b < g.blocks.size(); ++b) {
    Matrix& p = *net.blocks()[b];
    for (int i = 0; i < p.size(); ++i) {
      const double keep = p(i);
      p(i) = keep + h;
      const double up = forward(net, x).cwiseProduct(c).sum();
      p(i) = keep - h;
      const double down = forward(net, x).cwiseProduct(c).sum();
      p(i) = keep;
      worst = std::max(worst, relative_error(g.blocks[b](i), (up - down) / (2 * h)));
    }
  }
  return worst;
}

double ppo_fd_error(GatingMode gating, Rng& rng) {
  const ScenarioFile file = load_scenario_file(data("benchmark8.json"));
  const PolicyConfig pc{NominalPool::parse("all"), gating,
                        EncodingBounds::from(file.distribution->contexts)};
  Policy policy(pc, Mlp::glorot({kPolicyInputDim, 7, 6, 1 + pc.pool.size()}, rng, 0.5),
                Mlp::glorot({kPolicyInputDim, 7, 1}, rng), -0.3);
  // Ten-transition toy buffer.
  Batch b;
  const int n = 10, k = pc.pool.size();
  b.inputs = random_matrix(kPolicyInputDim, n, rng);
  b.pool = random_matrix(k, n, rng, 2.0);
  for (int j = 0; j < n; ++j) {
    b.gate_index.push_back(static_cast<int>(rng() % k));
    b.raw_command.push_back(4.0 * uniform01(rng) - 2.0);
    b.old_log_prob.push_back(-2.5 + uniform01(rng));
    b.advantage.push_back(2.0 * uniform01(rng) - 1.0);
    b.return_.push_back(2.0 * uniform01(rng) - 1.0);
  }
  const TrainConfig tc;
  LossGradients grads;
  ppo_loss(policy, b, tc, &grads);
  const std::vector<Matrix> flat = grads.flatten();
  const std::vector<Matrix*> params = policy.parameter_blocks();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t blk = 0; blk < params.size(); ++blk) {
    for (int i = 0; i < params[blk]->size(); ++i) {
      const double keep = (*params[blk])(i);
      (*params[blk])(i) = keep + h;
      policy.actor().touch();
      const double up = ppo_loss(policy, b, tc, nullptr).total;
      (*params[blk])(i) = keep - h;
      const double down = ppo_loss(policy, b, tc, nullptr).total;
      (*params[blk])(i) = keep;
      worst = std::max(worst, relative_error(flat[blk](i), (up - down) / (2 * h)));
    }
  }
  return worst;
}

Outcome criterion_1() {
  Rng rng(101);
  const double actor = mlp_fd_error({8, 12, 12, 6}, rng);
  const double critic = mlp_fd_error({8, 12, 12, 1}, rng);
  const double hard = ppo_fd_error(GatingMode::kHard, rng);
  const double soft = ppo_fd_error(GatingMode::kSoft, rng);
  const double worst = std::max({actor, critic, hard, soft});
  return {worst < 1e-4, "max relative error actor " + num(actor, 3) + ", critic " +
                            num(critic, 3) + ", ppo hard " + num(hard, 3) + ", ppo soft " +
                            num(soft, 3) + " (limit 1e-4)"};
}

// ---------------------------------------------------------------------------
// 2. composition reductions

std::vector<Observation> observations_from_traffic(int count) {
  const ScenarioFile file = load_scenario_file(data("benchmark8.json"));
  std::vector<Observation> obs;
  for (const ScenarioSpec& spec : file.scenarios) {
    WorldState w = init_world(spec, AvMode::kHuman);
    for (int k = 0; k < spec.num_steps() && static_cast<int>(obs.size()) < count; ++k) {
      spawn_arrivals(w, spec.dt);
      for (int id : live_avs(w)) obs.push_back(observe(w, id));
      step(w, {}, spec.dt);
    }
  }
  return obs;
}

Policy random_policy(const std::string& pool, GatingMode gating, Rng& rng,
                     const ContextDistribution& contexts) {
  const PolicyConfig pc{NominalPool::parse(pool), gating, EncodingBounds::from(contexts)};
  return Policy(pc, Mlp::glorot({kPolicyInputDim, 16, 16, 1 + pc.pool.size()}, rng, 1.0),
                Mlp::glorot({kPolicyInputDim, 16, 1}, rng), 0.0);
}

Outcome criterion_2() {
  const std::vector<Observation> obs = observations_from_traffic(4000);
  const ContextDistribution contexts =
      load_scenario_file(data("benchmark8.json")).distribution->contexts;
  Rng rng(202);
  int zero_bad = 0, glosa_bad = 0, checked = 0;
  for (GatingMode gating : {GatingMode::kHard, GatingMode::kSoft}) {
    const Policy zero = random_policy("zero", gating, rng, contexts);
    const Policy glosa = random_policy("glosa", gating, rng, contexts);
    for (ActMode mode : {ActMode::kTrain, ActMode::kEval}) {
      const std::vector<ActionRecord> z = act_batch(zero, obs, rng, mode);
      const std::vector<ActionRecord> g = act_batch(glosa, obs, rng, mode);
      for (std::size_t i = 0; i < obs.size(); ++i) {
        ++checked;
        if (!(z[i].raw_command == z[i].residual &&
              z[i].final_accel == std::clamp(z[i].residual, kAccelMin, kAccelMax)))
          ++zero_bad;
        const double expected =
            std::clamp(glosa_accel(obs[i]) + g[i].residual, kAccelMin, kAccelMax);
        if (!(g[i].gate_index == 0 && g[i].final_accel == expected)) ++glosa_bad;
      }
    }
  }
  return {zero_bad == 0 && glosa_bad == 0,
          std::to_string(checked) + " actions per pool; zero-pool mismatches " +
              std::to_string(zero_bad) + ", glosa-pool mismatches " +
              std::to_string(glosa_bad)};
}

// ---------------------------------------------------------------------------
// 3. simplex invariants

Outcome criterion_3() {
  Rng rng(303);
  double worst = 0.0;
  long bad_index = 0, bad_prob = 0;
  std::vector<double> logits;
  for (int trial = 0; trial < 1000000; ++trial) {
    const int k = 1 + trial % 5;
    logits.resize(k);
    for (double& l : logits) l = 100.0 * uniform01(rng) - 50.0;
    if (trial % 7 == 0) logits[trial % k] = (trial % 2) ? 50.0 : -50.0;
    const std::vector<double> p = softmax(logits);
    double sum = 0.0;
    for (double x : p) {
      if (!(x >= 0.0 && x <= 1.0)) ++bad_prob;
      sum += x;
    }
    worst = std::max(worst, std::abs(sum - 1.0));
    const int s = categorical_sample(logits, rng).index;
    const int a = argmax(logits);
    if (s < 0 || s >= k || a < 0 || a >= k) ++bad_index;
  }
  return {worst <= 1e-12 && bad_index == 0 && bad_prob == 0,
          "max |sum - 1| " + num(worst, 3) + " over 1e6 vectors; invalid indices " +
              std::to_string(bad_index) + ", out-of-range probabilities " +
              std::to_string(bad_prob)};
}

// ---------------------------------------------------------------------------
// 4. simulation safety

struct SafetyCount {
  long negative_gaps = 0;
  long red_crossings = 0;
  long vehicle_steps = 0;
  long exits = 0;
  double min_gap = 1e9;
};

void run_safety(const ScenarioSpec& spec, AvMode mode, const Policy* policy, Rng& rng,
                SafetyCount& count) {
  WorldState w = init_world(spec, mode);
  const double lane = spec.context.lane_length;
  for (int k = 0; k < spec.num_steps(); ++k) {
    spawn_arrivals(w, spec.dt);
    AvCommands commands;
    if (policy) {
      const std::vector<int> ids = live_avs(w);
      std::vector<Observation> obs;
      for (int id : ids) obs.push_back(observe(w, id));
      const std::vector<ActionRecord> a = act_batch(*policy, obs, rng, ActMode::kTrain);
      for (std::size_t i = 0; i < ids.size(); ++i) commands[ids[i]] = a[i].final_accel;
    }
    std::map<int, double> before;
    for (const VehicleState& v : w.vehicles) before[v.id] = v.position;
    const StepReport r = step(w, commands, spec.dt);
    for (const StepRecord& rec : r.records) {
      ++count.vehicle_steps;
      if (rec.exited) ++count.exits;
      const bool crossed = before.at(rec.id) <= lane && (rec.exited || rec.position > lane);
      if (crossed && r.phase_at_start == Phase::kRed) ++count.red_crossings;
    }
    for (std::size_t i = 1; i < w.vehicles.size(); ++i) {
      const double gap =
          w.vehicles[i - 1].position - kVehicleLength - w.vehicles[i].position;
      count.min_gap = std::min(count.min_gap, gap);
      if (gap < 0.0) ++count.negative_gaps;
    }
  }
}

Outcome criterion_4() {
  const ScenarioFile file = load_scenario_file(data("example.json"));
  ContextDistribution dist = file.distribution->contexts;
  dist.arrival_rate = FieldDist::range(0.05, 0.5);
  Rng policy_rng(404);
  const Policy policy = random_policy("all", GatingMode::kHard, policy_rng, dist);
  SafetyCount idm, mrmel;
  for (int i = 0; i < 200; ++i) {
    Rng ctx_rng(derive_seed(404, static_cast<std::uint64_t>(i)));
    ScenarioSpec spec;
    spec.name = "safety" + std::to_string(i);
    spec.seed = 4000 + static_cast<std::uint64_t>(i);
    spec.horizon = 500.0;
    spec.dt = 0.1;
    spec.context = sample_context(dist, ctx_rng);
    run_safety(spec, AvMode::kHuman, nullptr, policy_rng, idm);
    run_safety(spec, AvMode::kCommanded, &policy, policy_rng, mrmel);
  }
  const bool pass = idm.negative_gaps == 0 && idm.red_crossings == 0 &&
                    mrmel.negative_gaps == 0 && mrmel.red_crossings == 0 && idm.exits > 0 &&
                    mrmel.exits > 0;
  return {pass, "idm-only: " + std::to_string(idm.negative_gaps) + " negative gaps, " +
                    std::to_string(idm.red_crossings) + " red crossings, min gap " +
                    num(idm.min_gap, 4) + " m, " + std::to_string(idm.exits) +
                    " exits; mrmel: " + std::to_string(mrmel.negative_gaps) +
                    " negative gaps, " + std::to_string(mrmel.red_crossings) +
                    " red crossings, min gap " + num(mrmel.min_gap, 4) + " m, " +
                    std::to_string(mrmel.exits) + " exits"};
}

// ---------------------------------------------------------------------------
// 5. reward arithmetic

Outcome criterion_5() {
  struct Case {
    double speed, emission, accel, expected;
  };
  // Dyadic inputs keep every product exact.
  const Case cases[] = {
      {10.0, 0.25, 0.5, -2.5},          {10.0, 0.25, -0.5, -2.5},
      {0.0, 0.0625, 0.0, -16.875},      {15.0, 0.125, 0.0, 11.25},
      {0.25, 0.0625, 0.25, -19.125},    {0.5, 0.0625, 0.0, -1.375},
      {5.0, 0.5, 3.0, -40.0},           {5.0, 0.5, -3.0, -40.0},
      {12.0, 0.1875, 1.0, -3.625},      {8.0, 0.0625, 0.125, 4.875},
      {0.0, 0.0625, 2.0, -36.875},      {0.125, 0.03125, 0.0, -15.8125},
      {14.0, 0.25, 0.75, -1.0},         {3.0, 0.078125, 0.0625, 0.03125},
      {6.0, 0.09375, -0.25, 0.6875},    {9.5, 0.125, 0.0, 5.75},
      {1.0, 0.0625, 1.5, -15.875},      {2.0, 0.0, 0.0, 2.0},
      {0.2890625, 0.0625, 0.0, -16.5859375}, {0.3125, 0.0625, 0.0, -1.5625},
  };
  const RewardWeights weights;
  if (weights.emission != 30.0 || weights.stop != 15.0 || weights.accel != 10.0)
    return {false, "default reward weights are not (30, 15, 10)"};
  int exact = 0, n = 0;
  std::string first_bad;
  for (const Case& c : cases) {
    ++n;
    StepRecord rec;
    rec.speed = c.speed;
    rec.emission_rate = c.emission;
    rec.accel = c.accel;
    WorldState w;
    VehicleState v;
    v.id = 3;
    v.cls = VehicleClass::kAv;
    v.speed = c.speed;
    v.emission_rate = c.emission;
    v.accel = c.accel;
    w.vehicles.push_back(v);
    const double a = step_reward(rec, weights);
    const double b = step_reward(w, 3, weights);
    if (a == c.expected && b == c.expected) {
      ++exact;
    } else if (first_bad.empty()) {
      first_bad = "; case " + std::to_string(n) + " gave " + num(a, 17) + " expected " +
                  num(c.expected, 17);
    }
  }
  return {exact == n, std::to_string(exact) + "/" + std::to_string(n) +
                          " hand cases exact" + first_bad};
}

// ---------------------------------------------------------------------------
// 6. stochastic reward assignment

Outcome criterion_6() {
  Rng rng(606);
  int fleet = 0, unequal_fleet = 0, altered_individual = 0;
  const int steps = 10000;
  for (int s = 0; s < steps; ++s) {
    std::vector<double> ind(2 + s % 7);
    for (double& r : ind) r = 20.0 * uniform01(rng) - 10.0;
    const AssignedRewards a = assign_rewards(ind, 0.2, rng);
    if (a.fleet) {
      ++fleet;
      for (double r : a.rewards)
        if (r != a.rewards.front()) ++unequal_fleet;
    } else if (a.rewards != ind) {
      ++altered_individual;
    }
  }
  const double fraction = static_cast<double>(fleet) / steps;
  return {fraction >= 0.18 && fraction <= 0.22 && unequal_fleet == 0 &&
              altered_individual == 0,
          "fleet fraction " + num(fraction, 4) + " (band [0.18, 0.22]); unequal fleet rewards " +
              std::to_string(unequal_fleet) + ", altered individual steps " +
              std::to_string(altered_individual)};
}

// ---------------------------------------------------------------------------
// 7 and 10. determinism and telemetry

int run_cli_args(std::vector<std::string> args, std::string* error = nullptr) {
  args.insert(args.begin(), "ecolane");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (error) *error = err.str();
  return code;
}

std::vector<std::string> train_args(const fs::path& out) {
  return {"train", "--scenarios", data("synthetic4.json"), "--method", "mrmel",
          "--workers", "1", "--seed", "7", "--iters", "50", "--ckpt-every", "10",
          "--out", out.string()};
}

Outcome criterion_7() {
  const fs::path a = tmp_dir("c7_run_a"), b = tmp_dir("c7_run_b");
  fs::remove_all(a);
  fs::remove_all(b);
  for (const fs::path& p : {a, b}) {
    std::string err;
    if (run_cli_args(train_args(p), &err) != kExitOk) return {false, "train failed: " + err};
  }
  int files = 0, identical = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    const std::string name = entry.path().filename().string();
    if (name == "run_manifest.json") continue;  // records its own output path
    ++files;
    if (fs::exists(b / name) && slurp(entry.path()) == slurp(b / name)) ++identical;
  }
  const bool has_log = fs::exists(a / "train_log.tsv") && fs::exists(a / "final.ckpt");
  return {has_log && files == identical && files >= 7,
          std::to_string(identical) + "/" + std::to_string(files) +
              " artifacts byte-identical (training log, checkpoints)"};
}

Outcome criterion_10() {
  fs::path dir = tmp_dir("c7_run_a");
  if (!fs::exists(dir / "train_log.tsv")) {
    dir = tmp_dir("c10_run");
    fs::remove_all(dir);
    std::string err;
    if (run_cli_args(train_args(dir), &err) != kExitOk) return {false, "train failed: " + err};
  }
  std::ifstream in(dir / "train_log.tsv");
  std::string line;
  std::vector<std::string> header;
  int rows = 0, bad = 0;
  double worst = 0.0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string x; std::getline(ss, x, '\t');) f.push_back(x);
    if (header.empty()) {
      header = f;
      continue;
    }
    ++rows;
    if (f.size() != header.size() || std::stoll(f[0]) != rows ||
        header[1] != "mean_reward" || !std::isfinite(std::stod(f[1]))) {
      ++bad;
      continue;
    }
    double sum = 0.0;
    int members = 0;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (!header[i].starts_with("usage_")) continue;
      const double u = std::stod(f[i]);
      if (!(u >= 0.0)) ++bad;
      sum += u;
      ++members;
    }
    if (members != 5) ++bad;
    worst = std::max(worst, std::abs(sum - 1.0));
  }
  return {rows == 50 && bad == 0 && worst <= 1e-9,
          std::to_string(rows) + " iterations logged with mean reward and 5 usage columns; "
          "max |usage sum - 1| " + num(worst, 3) + ", malformed rows " + std::to_string(bad)};
}

// ---------------------------------------------------------------------------
// 8. learning ordering

// Training budget for the ordering experiment. lr and the other loss
// coefficients stay at their defaults.
struct OrderingSetup {
  int iterations = 500;
  TrainConfig train;
  int replicates = 5;

  OrderingSetup() {
    train.epochs = 4;
    train.minibatch_size = 256;
  }
};

std::string setup_digest(const OrderingSetup& s, const ScenarioFile& file,
                         const std::string& method, std::uint64_t seed) {
  const TrainConfig& t = s.train;
  std::ostringstream key;
  key.precision(17);
  key << kVersion << '\n' << serialize_scenario_file(file) << '\n' << method << '\n' << seed
      << '\n' << s.iterations << ' ' << t.gamma << ' ' << t.gae_lambda << ' '
      << t.clip_epsilon << ' ' << t.epochs << ' ' << t.minibatch_size << ' '
      << t.steps_per_iteration << ' ' << t.learning_rate << ' ' << t.entropy_gaussian << ' '
      << t.entropy_categorical << ' ' << t.value_coefficient << ' ' << t.max_grad_norm << ' '
      << t.reward_scale << ' ' << t.fleet_probability << ' ' << t.weights.emission << ' '
      << t.weights.stop << ' ' << t.weights.accel;
  return sha256_hex(key.str()).substr(0, 16);
}

fs::path cache_dir() {
  if (const char* env = std::getenv("ECOLANE_ORDERING_CACHE")) return env;
  return fs::path(ECOLANE_TEST_TMP).parent_path() / "ordering_cache";
}

Checkpoint trained_policy(const OrderingSetup& s, const ScenarioFile& file,
                          const Method& method, std::uint64_t seed) {
  const std::string name = method.name();
  std::string tag = name;
  std::replace(tag.begin(), tag.end(), ':', '_');
  const fs::path dir = cache_dir() / (tag + "_seed" + std::to_string(seed) + "_" +
                                      setup_digest(s, file, name, seed));
  const fs::path ckpt = dir / "final.ckpt";
  if (fs::exists(ckpt)) {
    std::cerr << "  " << name << " seed " << seed << ": cached " << ckpt.string() << "\n";
    return load_checkpoint(ckpt);
  }
  fs::create_directories(dir);
  std::ofstream log(dir / "train_log.tsv", std::ios::trunc);
  const PolicyConfig pc{method.pool(), GatingMode::kHard,
                        EncodingBounds::from(file.distribution->contexts)};
  log << "# ecolane training log v1\n" << log_header(pc.pool) << "\n";
  TrainOptions opt;
  opt.seed = seed;
  opt.workers = 1;
  opt.iterations = s.iterations;
  const auto start = std::chrono::steady_clock::now();
  opt.on_iteration = [&](const IterationLog& row, const Checkpoint&) {
    log << log_line(row) << "\n";
    log.flush();
    if (row.iteration % 100 == 0) {
      const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                       start).count();
      std::cerr << "  " << name << " seed " << seed << ": iteration " << row.iteration
                << ", mean reward " << num(row.mean_reward, 4) << ", " << num(sec, 4)
                << " s\n";
    }
  };
  const Checkpoint c = train(*file.distribution, pc, s.train, opt);
  save_checkpoint(dir / "final.ckpt.part", c);
  fs::rename(dir / "final.ckpt.part", ckpt);
  return c;
}

double benefit_of(const ScenarioFile& file, const Method& method, const Policy* policy,
                  int replicates) {
  EvalOptions opt;
  opt.seed = 0;
  opt.replicates = replicates;
  return evaluate(file.scenarios, method, policy, opt).emission_benefit;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

Outcome criterion_8() {
  const ScenarioFile file = load_scenario_file(data("benchmark8.json"));
  const OrderingSetup setup;
  const double glosa = benefit_of(file, Method::parse("glosa_all"), nullptr, setup.replicates);
  const std::vector<std::string> rrl_names{"rrl:glosa", "rrl:const_acc", "rrl:const_dec",
                                           "rrl:idm", "rrl:zero"};

  struct SeedResult {
    double mrmel = 0.0;
    double best_rrl = -1e9;
    std::string best_name;
    std::string rrl_detail;
  };
  auto run_seed = [&](std::uint64_t seed) {
    SeedResult r;
    const Method mrmel = Method::parse("mrmel");
    const Checkpoint m = trained_policy(setup, file, mrmel, seed);
    r.mrmel = benefit_of(file, mrmel, &m.policy, setup.replicates);
    for (const std::string& name : rrl_names) {
      const Method method = Method::parse(name);
      const Checkpoint c = trained_policy(setup, file, method, seed);
      const double b = benefit_of(file, method, &c.policy, setup.replicates);
      r.rrl_detail += (r.rrl_detail.empty() ? "" : ", ") + name + " " + num(b, 4);
      if (b > r.best_rrl) {
        r.best_rrl = b;
        r.best_name = name;
      }
    }
    std::cerr << "  seed " << seed << ": mrmel " << num(r.mrmel, 4) << "%, " << r.rrl_detail
              << "\n";
    return r;
  };

  const SeedResult first = run_seed(1);
  const bool a = first.mrmel > 0.0;
  const bool b = first.mrmel >= glosa;
  bool c = first.mrmel >= first.best_rrl - 1.0;
  std::string c_detail = "seed 1: mrmel " + num(first.mrmel, 4) + "% vs best rrl (" +
                         first.best_name + ") " + num(first.best_rrl, 4) + "%";
  if (!c) {
    std::vector<double> mrmel{first.mrmel}, best{first.best_rrl};
    for (std::uint64_t seed : {2, 3}) {
      const SeedResult r = run_seed(seed);
      mrmel.push_back(r.mrmel);
      best.push_back(r.best_rrl);
    }
    c = median(mrmel) >= median(best) - 1.0;
    c_detail += "; median over 3 seeds: mrmel " + num(median(mrmel), 4) + "% vs best rrl " +
                num(median(best), 4) + "%";
  }
  return {a && b && c,
          "emission benefit vs idm: mrmel " + num(first.mrmel, 4) + "%, glosa_all " +
              num(glosa, 4) + "%, " + first.rrl_detail + " | (a) " + (a ? "ok" : "fail") +
              " (b) " + (b ? "ok" : "fail") + " (c) " + (c ? "ok" : "fail") + " [" +
              c_detail + "]; " + std::to_string(setup.iterations) + " iterations"};
}

// ---------------------------------------------------------------------------
// 9. GLOSA stop avoidance

Outcome criterion_9() {
  // One AV at 15 m/s entering a 300 m lane: it reaches the line after 20 s,
  // during the 30 s red that follows a 10 s green. No other traffic.
  ScenarioSpec s;
  s.name = "red_arrival";
  s.seed = 9;
  s.horizon = 80.0;
  s.dt = 0.1;
  s.context.green_duration = 10;
  s.context.red_duration = 30;
  s.context.speed_limit = 15;
  s.context.lane_length = 300;
  s.context.arrival_rate = 0.0;
  s.context.av_penetration = 1.0;
  auto run = [&](const Method& m) {
    WorldState w = init_world(s, av_mode_for(m));
    VehicleState v;
    v.id = 0;
    v.cls = VehicleClass::kAv;
    v.speed = 15.0;
    v.driver = IdmParams::human(15.0);
    w.vehicles.push_back(v);
    w.arrivals.push_back({0, VehicleClass::kAv, 0.0});
    w.next_id = 1;
    const AvController ctl = make_controller(m, nullptr);
    for (int k = 0; k < s.num_steps(); ++k) step(w, ctl ? ctl(w) : AvCommands{}, s.dt);
    return collect_metrics(w);
  };
  const EpisodeMetrics glosa = run(Method::parse("glosa_all"));
  const EpisodeMetrics idm = run(Method::parse("idm_baseline"));
  return {glosa.stop_count == 0 && idm.stop_count >= 1 && glosa.vehicles_exited == 1,
          "glosa stops " + std::to_string(glosa.stop_count) + " (exited " +
              std::to_string(glosa.vehicles_exited) + "), idm stops " +
              std::to_string(idm.stop_count)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ecolane acceptance runner"};
  std::vector<int> selected;
  app.add_option("--criterion", selected, "criterion number(s), 1-10 (default: all)")
      ->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  if (selected.empty())
    for (int i = 1; i <= 10; ++i) selected.push_back(i);

  const std::map<int, std::function<Outcome()>> criteria{
      {1, criterion_1}, {2, criterion_2}, {3, criterion_3}, {4, criterion_4},
      {5, criterion_5}, {6, criterion_6}, {7, criterion_7}, {8, criterion_8},
      {9, criterion_9}, {10, criterion_10}};
  int failures = 0;
  for (int id : selected) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria.at(id)();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "criterion " << id << ": " << (o.pass ? "PASS" : "FAIL") << " - " << o.detail
              << " (" << num(sec, 3) << " s)" << std::endl;
    if (!o.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
