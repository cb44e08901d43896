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

// PPO over parallel scenario-sampling rollout workers. Every AV in an
// episode acts from its own observation with the same parameter snapshot.
// With probability p per step all AVs receive the fleet reward (the mean of
// their step rewards) instead of their own.

#ifndef ECOLANE_LEARNER_HPP_
#define ECOLANE_LEARNER_HPP_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ecolane/net.hpp"
#include "ecolane/policy.hpp"
#include "ecolane/scenario.hpp"
#include "ecolane/sim.hpp"

namespace ecolane {

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_epsilon = 0.2;
  int epochs = 10;
  int minibatch_size = 1024;
  // Each worker runs whole episodes until it holds at least
  // ceil(steps_per_iteration / workers) transitions.
  int steps_per_iteration = 2048;
  double learning_rate = 1e-4;
  double entropy_gaussian = 0.001;
  double entropy_categorical = 0.01;
  double value_coefficient = 0.5;
  double max_grad_norm = 0.5;
  // Rewards are multiplied by this before advantage and value targets are
  // formed; the logged mean reward is unscaled.
  double reward_scale = 0.1;
  double fleet_probability = 0.2;
  RewardWeights weights;

  bool operator==(const TrainConfig&) const = default;
};

// Throws Error("config") on out-of-range values.
void validate(const TrainConfig& config);

struct Transition {
  Vector input;               // observation features + encoded context
  int gate_index = 0;
  double residual = 0.0;
  double raw_command = 0.0;
  std::vector<double> pool;   // member outputs at decision time
  double joint_log_prob = 0.0;
  double reward = 0.0;        // assigned, unscaled
  double value = 0.0;
  bool done = false;          // vehicle left the corridor on this step
  std::int64_t episode = 0;
  int vehicle = 0;
  bool fleet = false;
  std::vector<double> gate;   // weights used in compose
  double advantage = 0.0;
  double return_ = 0.0;
};

struct AssignedRewards {
  std::vector<double> rewards;
  bool fleet = false;
};

// One Bernoulli(p) draw per call. Throws Error("config") when empty.
AssignedRewards assign_rewards(std::span<const double> individual, double p, Rng& rng);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// values[t] estimates step t. done[t] cuts the recursion (no bootstrap);
// after the last step, bootstrap_value is used unless done.back().
// Throws Error("dimension") on length mismatch.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              const std::vector<bool>& done, double gamma, double lambda,
              double bootstrap_value);

// Rescales in place to mean 0, std 1 (population std; left centered when
// the std is ~0).
void normalize(std::span<double> values);

// Column-major training batch.
struct Batch {
  Matrix inputs;              // kPolicyInputDim x B
  Matrix pool;                // K x B
  std::vector<int> gate_index;
  std::vector<double> raw_command;
  std::vector<double> old_log_prob;
  std::vector<double> advantage;
  std::vector<double> return_;
  int size() const { return static_cast<int>(gate_index.size()); }
};

Batch make_batch(std::span<const Transition> transitions,
                 std::span<const std::size_t> indices);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;        // Gaussian + mean categorical entropy
  double kl = 0.0;             // mean of (r - 1) - log r
  double clip_fraction = 0.0;
  double max_ratio_error = 0.0;  // max |r - 1|
};

struct LossGradients {
  Gradients actor;
  Matrix log_std;  // 1 x 1
  Gradients critic;

  // Blocks in Policy::parameter_blocks() order.
  std::vector<Matrix> flatten() const;
};

// Clipped surrogate + value_coefficient * mean squared value error
// - entropy bonuses, averaged over the batch. When grads is non-null it
// receives the exact gradient of `total`.
LossTerms ppo_loss(const Policy& policy, const Batch& batch, const TrainConfig& config,
                   LossGradients* grads);

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  // max |ratio - 1| over the first minibatch pass, before any update.
  double initial_ratio_error = 0.0;
};

// Normalizes advantages, then runs the epochs over shuffled minibatches.
// Throws Error("training") on a non-finite loss.
UpdateStats ppo_update(Policy& policy, OptimizerState& optimizer,
                       std::vector<Transition>& transitions, const TrainConfig& config,
                       Rng& rng);

// Output of one worker for one iteration.
struct RolloutBuffer {
  std::vector<Transition> transitions;  // grouped by (episode, vehicle)
  int episodes = 0;
  std::int64_t fleet_steps = 0;
  std::int64_t reward_steps = 0;
};

// Runs whole episodes from `dist` until `min_transitions` are collected and
// computes advantages (unnormalized) and returns per vehicle chain.
RolloutBuffer collect_rollouts(const Policy& snapshot, const TrainingDistribution& dist,
                               const TrainConfig& config, int min_transitions,
                               std::uint64_t seed);

struct IterationLog {
  std::int64_t iteration = 0;
  double mean_reward = 0.0;
  std::vector<double> usage;  // per pool member
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double kl = 0.0;
  double clip_fraction = 0.0;
  std::int64_t transitions = 0;
  std::int64_t episodes = 0;
  double fleet_fraction = 0.0;
};

// Columnar training log.
std::string log_header(const NominalPool& pool);
std::string log_line(const IterationLog& row);

struct TrainOptions {
  std::uint64_t seed = 0;
  int workers = 1;
  int iterations = 100;
  // Called after every iteration with the log row and the current state.
  std::function<void(const IterationLog&, const Checkpoint&)> on_iteration;
};

// Starts from a fresh policy for `policy_config`, trains, and
// returns the final state.
Checkpoint train(const TrainingDistribution& dist, const PolicyConfig& policy_config,
                 const TrainConfig& config, const TrainOptions& options);

}  // namespace ecolane

#endif  // ECOLANE_LEARNER_HPP_
