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

#include "ecolane/learner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <numeric>
#include <thread>

namespace ecolane {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool is_finite(const LossTerms& t) {
  return std::isfinite(t.total) && std::isfinite(t.policy) && std::isfinite(t.value);
}

void clip_global_norm(std::vector<Matrix>& grads, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (Matrix& g : grads) g *= scale;
  }
}

// Runs one episode and appends its chains to `buffer`.
void run_training_episode(const Policy& policy, const ScenarioSpec& spec,
                          const TrainConfig& config, std::int64_t episode, Rng& rng,
                          RolloutBuffer& buffer) {
  WorldState world = init_world(spec, AvMode::kCommanded);
  std::map<int, std::vector<Transition>> chains;
  const std::int64_t steps = spec.num_steps();

  for (std::int64_t k = 0; k < steps; ++k) {
    spawn_arrivals(world, spec.dt);
    const std::vector<int> ids = live_avs(world);
    std::vector<Observation> obs;
    obs.reserve(ids.size());
    for (int id : ids) obs.push_back(observe(world, id));
    const std::vector<ActionRecord> actions = act_batch(policy, obs, rng, ActMode::kTrain);

    AvCommands commands;
    for (std::size_t i = 0; i < ids.size(); ++i) commands[ids[i]] = actions[i].final_accel;
    const StepReport report = step(world, commands, spec.dt);
    if (ids.empty()) continue;

    std::map<int, const StepRecord*> by_id;
    for (const StepRecord& r : report.records) by_id[r.id] = &r;
    std::vector<double> individual(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i)
      individual[i] = step_reward(*by_id.at(ids[i]), config.weights);
    const AssignedRewards assigned =
        assign_rewards(individual, config.fleet_probability, rng);
    ++buffer.reward_steps;
    if (assigned.fleet) ++buffer.fleet_steps;

    for (std::size_t i = 0; i < ids.size(); ++i) {
      Transition t;
      t.input = policy_input(obs[i], policy.config().bounds);
      t.gate_index = actions[i].gate_index;
      t.residual = actions[i].residual;
      t.raw_command = actions[i].raw_command;
      t.pool = actions[i].pool;
      t.gate = actions[i].gate;
      t.joint_log_prob = actions[i].joint_log_prob;
      t.reward = assigned.rewards[i];
      t.value = actions[i].value;
      t.done = by_id.at(ids[i])->exited;
      t.episode = episode;
      t.vehicle = ids[i];
      t.fleet = assigned.fleet;
      chains[ids[i]].push_back(std::move(t));
    }
  }

  for (auto& [id, chain] : chains) {
    std::vector<double> rewards, values;
    std::vector<bool> done;
    for (const Transition& t : chain) {
      rewards.push_back(t.reward * config.reward_scale);
      values.push_back(t.value);
      done.push_back(t.done);
    }
    double bootstrap = 0.0;
    if (!chain.back().done)
      bootstrap = policy.critic_forward(
          policy_input(observe(world, id), policy.config().bounds));
    const GaeResult g =
        gae(rewards, values, done, config.gamma, config.gae_lambda, bootstrap);
    for (std::size_t i = 0; i < chain.size(); ++i) {
      chain[i].advantage = g.advantages[i];
      chain[i].return_ = g.returns[i];
      buffer.transitions.push_back(std::move(chain[i]));
    }
  }
}

}  // namespace

void validate(const TrainConfig& c) {
  auto fail = [](const std::string& m) { throw Error("config", m); };
  if (!(c.gamma > 0.0 && c.gamma <= 1.0)) fail("gamma must lie in (0, 1]");
  if (!(c.gae_lambda >= 0.0 && c.gae_lambda <= 1.0)) fail("gae_lambda must lie in [0, 1]");
  if (!(c.clip_epsilon > 0.0)) fail("clip_epsilon must be positive");
  if (c.epochs < 1) fail("epochs must be at least 1");
  if (c.minibatch_size < 1) fail("minibatch_size must be at least 1");
  if (c.steps_per_iteration < 1) fail("steps_per_iteration must be at least 1");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be positive");
  if (!(c.fleet_probability >= 0.0 && c.fleet_probability <= 1.0))
    fail("fleet_probability must lie in [0, 1]");
  if (!(c.reward_scale > 0.0)) fail("reward_scale must be positive");
  if (c.entropy_gaussian < 0.0 || c.entropy_categorical < 0.0 || c.value_coefficient < 0.0)
    fail("loss coefficients must be non-negative");
}

AssignedRewards assign_rewards(std::span<const double> individual, double p, Rng& rng) {
  if (individual.empty()) throw Error("config", "reward assignment needs at least one AV");
  AssignedRewards out;
  out.fleet = uniform01(rng) < p;
  if (out.fleet) {
    const double mean = std::accumulate(individual.begin(), individual.end(), 0.0) /
                        static_cast<double>(individual.size());
    out.rewards.assign(individual.size(), mean);
  } else {
    out.rewards.assign(individual.begin(), individual.end());
  }
  return out;
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& done, double gamma, double lambda,
              double bootstrap_value) {
  const std::size_t n = rewards.size();
  if (values.size() != n || done.size() != n)
    throw Error("dimension", "gae inputs must have equal lengths");
  GaeResult out;
  out.advantages.resize(n);
  out.returns.resize(n);
  double next_value = bootstrap_value;
  double running = 0.0;
  for (std::size_t i = n; i-- > 0;) {
    const double continue_ = done[i] ? 0.0 : 1.0;
    const double delta = rewards[i] + gamma * next_value * continue_ - values[i];
    running = delta + gamma * lambda * continue_ * running;
    out.advantages[i] = running;
    out.returns[i] = running + values[i];
    next_value = values[i];
  }
  return out;
}

void normalize(std::span<double> values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : values) v = sd > 1e-12 ? (v - mean) / sd : v - mean;
}

Batch make_batch(std::span<const Transition> transitions,
                 std::span<const std::size_t> indices) {
  Batch b;
  const int n = static_cast<int>(indices.size());
  if (n == 0) return b;
  const int k = static_cast<int>(transitions[indices[0]].pool.size());
  b.inputs.resize(kPolicyInputDim, n);
  b.pool.resize(k, n);
  for (int j = 0; j < n; ++j) {
    const Transition& t = transitions[indices[j]];
    b.inputs.col(j) = t.input;
    for (int i = 0; i < k; ++i) b.pool(i, j) = t.pool[i];
    b.gate_index.push_back(t.gate_index);
    b.raw_command.push_back(t.raw_command);
    b.old_log_prob.push_back(t.joint_log_prob);
    b.advantage.push_back(t.advantage);
    b.return_.push_back(t.return_);
  }
  return b;
}

std::vector<Matrix> LossGradients::flatten() const {
  std::vector<Matrix> out = actor.blocks;
  out.push_back(log_std);
  for (const Matrix& m : critic.blocks) out.push_back(m);
  return out;
}

LossTerms ppo_loss(const Policy& policy, const Batch& batch, const TrainConfig& config,
                   LossGradients* grads) {
  const int n = batch.size();
  if (n == 0) throw Error("dimension", "empty batch");
  const int k = policy.pool_size();
  const double inv_n = 1.0 / n;
  const bool hard = policy.config().gating == GatingMode::kHard;

  ForwardCache actor_cache, critic_cache;
  const Matrix out = forward(policy.actor(), batch.inputs, grads ? &actor_cache : nullptr);
  const Matrix values = forward(policy.critic(), batch.inputs, grads ? &critic_cache : nullptr);

  const double ls_raw = policy.log_std()(0, 0);
  const double ls = clamp_log_std(ls_raw);
  const bool ls_active = ls_raw > kLogStdMin && ls_raw < kLogStdMax;
  const double inv_sigma = std::exp(-ls);

  Matrix d_out = Matrix::Zero(1 + k, n);
  Matrix d_values = Matrix::Zero(1, n);
  double d_ls = 0.0;

  LossTerms t;
  double cat_entropy = 0.0;
  std::vector<double> logits(k), gate(k), d_gate(k);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < k; ++i) logits[i] = out(1 + i, j);
    const std::vector<double> p = softmax(logits);
    const std::vector<double> logp = log_softmax(logits);
    const int idx = batch.gate_index[j];
    for (int i = 0; i < k; ++i) gate[i] = hard ? (i == idx ? 1.0 : 0.0) : p[i];
    double mean_pool = 0.0;
    for (int i = 0; i < k; ++i) mean_pool += gate[i] * batch.pool(i, j);
    const double z = (batch.raw_command[j] - mean_pool - out(0, j)) * inv_sigma;
    double lp = -0.5 * z * z - ls - kHalfLog2Pi;
    if (hard) lp += logp[idx];

    const double log_ratio = lp - batch.old_log_prob[j];
    const double ratio = std::exp(log_ratio);
    const double adv = batch.advantage[j];
    const double s1 = ratio * adv;
    const double s2 = std::clamp(ratio, 1.0 - config.clip_epsilon,
                                 1.0 + config.clip_epsilon) * adv;
    t.policy -= std::min(s1, s2) * inv_n;
    t.kl += ((ratio - 1.0) - log_ratio) * inv_n;
    if (std::abs(ratio - 1.0) > config.clip_epsilon) t.clip_fraction += inv_n;
    t.max_ratio_error = std::max(t.max_ratio_error, std::abs(ratio - 1.0));

    double h = 0.0;
    for (int i = 0; i < k; ++i) h -= p[i] * logp[i];
    cat_entropy += h * inv_n;

    const double diff = values(0, j) - batch.return_[j];
    t.value += diff * diff * inv_n;

    if (!grads) continue;
    // d total / d lp
    const double d_lp = s1 <= s2 ? -ratio * adv * inv_n : 0.0;
    d_out(0, j) += d_lp * z * inv_sigma;
    d_ls += d_lp * (z * z - 1.0);
    if (hard) {
      for (int i = 0; i < k; ++i) d_out(1 + i, j) += d_lp * ((i == idx ? 1.0 : 0.0) - p[i]);
    } else {
      double dot = 0.0;
      for (int i = 0; i < k; ++i) {
        d_gate[i] = d_lp * z * inv_sigma * batch.pool(i, j);
        dot += p[i] * d_gate[i];
      }
      for (int i = 0; i < k; ++i) d_out(1 + i, j) += p[i] * (d_gate[i] - dot);
    }
    // -c * H, dH/dlogit_i = -p_i (log p_i + H)
    for (int i = 0; i < k; ++i)
      d_out(1 + i, j) += config.entropy_categorical * inv_n * p[i] * (logp[i] + h);
    d_values(0, j) = 2.0 * config.value_coefficient * diff * inv_n;
  }

  const double gauss_entropy = ls + 0.5 + kHalfLog2Pi;
  t.entropy = gauss_entropy + cat_entropy;
  t.total = t.policy + config.value_coefficient * t.value -
            config.entropy_gaussian * gauss_entropy -
            config.entropy_categorical * cat_entropy;

  if (grads) {
    d_ls -= config.entropy_gaussian;
    grads->actor = backward(policy.actor(), actor_cache, d_out);
    grads->critic = backward(policy.critic(), critic_cache, d_values);
    grads->log_std = Matrix::Constant(1, 1, ls_active ? d_ls : 0.0);
  }
  return t;
}

UpdateStats ppo_update(Policy& policy, OptimizerState& optimizer,
                       std::vector<Transition>& transitions, const TrainConfig& config,
                       Rng& rng) {
  UpdateStats stats;
  const std::size_t n = transitions.size();
  if (n == 0) return stats;

  std::vector<double> adv(n);
  for (std::size_t i = 0; i < n; ++i) adv[i] = transitions[i].advantage;
  normalize(adv);
  for (std::size_t i = 0; i < n; ++i) transitions[i].advantage = adv[i];

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  {
    const LossTerms before = ppo_loss(policy, make_batch(transitions, order), config, nullptr);
    stats.initial_ratio_error = before.max_ratio_error;
  }

  int batches = 0;
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < n; start += mb) {
      const std::size_t end = std::min(n, start + mb);
      const Batch batch = make_batch(
          transitions, std::span<const std::size_t>(order.data() + start, end - start));
      LossGradients grads;
      const LossTerms t = ppo_loss(policy, batch, config, &grads);
      if (!is_finite(t))
        throw Error("training", "non-finite loss (policy " + fmt(t.policy) + ", value " +
                                    fmt(t.value) + ") at epoch " + std::to_string(epoch));
      std::vector<Matrix> flat = grads.flatten();
      clip_global_norm(flat, config.max_grad_norm);
      const std::vector<Matrix*> params = policy.parameter_blocks();
      adam_update(params, flat, optimizer);

      stats.policy_loss += t.policy;
      stats.value_loss += t.value;
      stats.entropy += t.entropy;
      stats.kl += t.kl;
      stats.clip_fraction += t.clip_fraction;
      ++batches;
    }
  }
  const double inv = 1.0 / batches;
  stats.policy_loss *= inv;
  stats.value_loss *= inv;
  stats.entropy *= inv;
  stats.kl *= inv;
  stats.clip_fraction *= inv;
  return stats;
}

RolloutBuffer collect_rollouts(const Policy& snapshot, const TrainingDistribution& dist,
                               const TrainConfig& config, int min_transitions,
                               std::uint64_t seed) {
  Rng rng(seed);
  RolloutBuffer buffer;
  std::int64_t episode = 0;
  do {
    ScenarioSpec spec;
    spec.context = sample_context(dist.contexts, rng);
    spec.seed = rng();
    spec.horizon = dist.horizon;
    spec.dt = dist.dt;
    spec.name = "train";
    run_training_episode(snapshot, spec, config, episode++, rng, buffer);
    ++buffer.episodes;
  } while (static_cast<int>(buffer.transitions.size()) < min_transitions);
  return buffer;
}

std::string log_header(const NominalPool& pool) {
  std::string h = "iteration\tmean_reward";
  for (NominalId id : pool.members()) h += "\tusage_" + std::string(to_string(id));
  h += "\tpolicy_loss\tvalue_loss\tentropy\tkl\tclip_fraction\tn_transitions\tn_episodes"
       "\tfleet_fraction";
  return h;
}

std::string log_line(const IterationLog& r) {
  std::string s = std::to_string(r.iteration) + "\t" + fmt(r.mean_reward);
  for (double u : r.usage) s += "\t" + fmt(u);
  s += "\t" + fmt(r.policy_loss) + "\t" + fmt(r.value_loss) + "\t" + fmt(r.entropy) +
       "\t" + fmt(r.kl) + "\t" + fmt(r.clip_fraction) + "\t" +
       std::to_string(r.transitions) + "\t" + std::to_string(r.episodes) + "\t" +
       fmt(r.fleet_fraction);
  return s;
}

Checkpoint train(const TrainingDistribution& dist, const PolicyConfig& policy_config,
                 const TrainConfig& config, const TrainOptions& options) {
  validate(config);
  validate(dist.contexts);
  if (options.workers < 1) throw Error("config", "workers must be at least 1");
  if (options.iterations < 0) throw Error("config", "iterations must be non-negative");

  Checkpoint state;
  {
    Rng init(derive_seed(options.seed, 0));
    state.policy = Policy::create(policy_config, init);
  }
  AdamConfig adam;
  adam.learning_rate = config.learning_rate;
  {
    const std::vector<const Matrix*> blocks =
        std::as_const(state.policy).parameter_blocks();
    state.optimizer = OptimizerState::for_blocks(blocks, adam);
  }

  const int workers = options.workers;
  const int per_worker = (config.steps_per_iteration + workers - 1) / workers;
  const int k = state.policy.pool_size();

  for (int it = 1; it <= options.iterations; ++it) {
    const std::uint64_t iter_seed = derive_seed(options.seed, static_cast<std::uint64_t>(it));
    const Policy& snapshot = state.policy;
    std::vector<RolloutBuffer> buffers(workers);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](int w) {
      try {
        buffers[w] = collect_rollouts(snapshot, dist, config, per_worker,
                                      derive_seed(iter_seed, static_cast<std::uint64_t>(w) + 1));
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (std::thread& th : threads) th.join();
    }
    for (int w = 0; w < workers; ++w) {
      if (!errors[w]) continue;
      try {
        std::rethrow_exception(errors[w]);
      } catch (const std::exception& e) {
        throw Error("worker", "worker " + std::to_string(w) + " failed in iteration " +
                                  std::to_string(it) + ": " + e.what());
      }
    }

    std::vector<Transition> all;
    IterationLog row;
    row.iteration = it;
    std::int64_t fleet_steps = 0, reward_steps = 0;
    for (RolloutBuffer& b : buffers) {
      row.episodes += b.episodes;
      fleet_steps += b.fleet_steps;
      reward_steps += b.reward_steps;
      for (Transition& t : b.transitions) all.push_back(std::move(t));
    }
    row.transitions = static_cast<std::int64_t>(all.size());
    row.usage.assign(k, 0.0);
    if (!all.empty()) {
      double reward = 0.0;
      for (const Transition& t : all) {
        reward += t.reward;
        for (int i = 0; i < k; ++i) row.usage[i] += t.gate[i];
      }
      const double inv = 1.0 / static_cast<double>(all.size());
      row.mean_reward = reward * inv;
      for (double& u : row.usage) u *= inv;
    }
    row.fleet_fraction =
        reward_steps > 0 ? static_cast<double>(fleet_steps) / reward_steps : 0.0;

    Rng update_rng(derive_seed(iter_seed, 0));
    const UpdateStats stats =
        ppo_update(state.policy, state.optimizer, all, config, update_rng);
    row.policy_loss = stats.policy_loss;
    row.value_loss = stats.value_loss;
    row.entropy = stats.entropy;
    row.kl = stats.kl;
    row.clip_fraction = stats.clip_fraction;
    state.iteration = it;

    log_info("iteration " + std::to_string(it) + " mean_reward " + fmt(row.mean_reward) +
             " transitions " + std::to_string(row.transitions));
    if (options.on_iteration) options.on_iteration(row, state);
  }
  return state;
}

}  // namespace ecolane
