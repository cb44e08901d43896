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

// Gated multi-residual actor-critic. The actor maps (observation, context)
// to a Gaussian residual acceleration and gate logits over the nominal
// pool; the executed command is
//
//   clip( sum_k g_k(s, c) * nominal_k(s) + residual(s, c), kAccelMin, kAccelMax )
//
// With hard gating g is the one-hot of a sampled (train) or argmax (eval)
// index; with soft gating g = softmax(logits).

#ifndef ECOLANE_POLICY_HPP_
#define ECOLANE_POLICY_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ecolane/net.hpp"
#include "ecolane/nominal.hpp"
#include "ecolane/observation.hpp"
#include "ecolane/scenario.hpp"

namespace ecolane {

// Observation feature scaling.
inline constexpr double kFeatureSpeedScale = 15.0;     // m/s
inline constexpr double kFeatureDistanceScale = 100.0;  // m
inline constexpr double kFeatureTimeScale = 30.0;       // s

// ego speed, distance to line, 3 x (leader, follower, 4 adjacent) slots,
// phase, time to change.
inline constexpr int kObservationFeatures = 2 + 3 * (2 + kNumAdjacentSlots) + 2;
inline constexpr int kPolicyInputDim = kObservationFeatures + kContextDim;

std::array<double, kObservationFeatures> observation_features(const Observation& obs);

// Observation features followed by the encoded context.
Vector policy_input(const Observation& obs, const EncodingBounds& bounds);

enum class GatingMode { kHard, kSoft };
std::string_view to_string(GatingMode mode);
GatingMode parse_gating(std::string_view name);

enum class ActMode { kTrain, kEval };

inline constexpr double kInitialLogStd = -0.6931471805599453;  // ln 0.5

struct PolicyConfig {
  NominalPool pool;
  GatingMode gating = GatingMode::kHard;
  EncodingBounds bounds;
  bool operator==(const PolicyConfig&) const = default;
};

struct ActorOutput {
  double residual_mean = 0.0;
  double residual_log_std = 0.0;
  std::vector<double> gate_logits;  // one per pool member
};

class Policy {
 public:
  Policy() = default;
  Policy(PolicyConfig config, Mlp actor, Mlp critic, double log_std);

  // Separate 4 x 256 actor and critic. The actor head is zero-initialized,
  // giving a zero residual mean and uniform gates.
  static Policy create(const PolicyConfig& config, Rng& rng);

  const PolicyConfig& config() const { return config_; }
  int pool_size() const { return config_.pool.size(); }

  const Mlp& actor() const { return actor_; }
  const Mlp& critic() const { return critic_; }
  Mlp& actor() { return actor_; }
  Mlp& critic() { return critic_; }
  // Raw (unclamped) state-independent log-std parameter, stored (1 x 1).
  const Matrix& log_std() const { return log_std_; }
  Matrix& log_std() { return log_std_; }

  // All trainable blocks: actor blocks, log-std, critic blocks.
  std::vector<Matrix*> parameter_blocks();
  std::vector<const Matrix*> parameter_blocks() const;

  ActorOutput actor_forward(const Vector& input) const;
  double critic_forward(const Vector& input) const;

  bool operator==(const Policy&) const = default;

 private:
  PolicyConfig config_;
  Mlp actor_;
  Mlp critic_;
  Matrix log_std_ = Matrix::Constant(1, 1, kInitialLogStd);
};

// sum_k gate_k * pool_k + residual, then clipped. Throws Error("gate") if
// gate is not on the simplex within 1e-9, or sizes differ.
double compose(std::span<const double> gate, std::span<const double> pool,
               double residual);

struct ActionRecord {
  int gate_index = 0;             // pool member index; argmax for soft gating
  double residual = 0.0;          // sampled (train) or mean (eval)
  double raw_command = 0.0;       // gated pool + residual, before clipping
  double final_accel = 0.0;
  double joint_log_prob = 0.0;
  double value = 0.0;
  std::vector<double> gate;       // weights used in compose
  std::vector<double> pool;       // member outputs
};

ActionRecord act(const Policy& policy, const Observation& obs, Rng& rng,
                 ActMode mode);

// Acts for many AVs with a single batched forward pass. Randomness is drawn
// in observation order.
std::vector<ActionRecord> act_batch(const Policy& policy,
                                    std::span<const Observation> observations,
                                    Rng& rng, ActMode mode);

// Critic values for a batch of inputs (kPolicyInputDim x n).
Vector critic_batch(const Policy& policy, const Matrix& inputs);

// Log-probability of a recorded action under the policy: the likelihood of
// the pre-clip command given its gated-pool mean, plus the log-probability of
// the gate index for hard gating.
double action_log_prob(const ActorOutput& out, GatingMode gating, int gate_index,
                       double raw_command, std::span<const double> pool);

// ---------------------------------------------------------------------------
// Checkpoints: header, JSON manifest, actor, critic, log-std, optimizer.

inline constexpr std::uint64_t kCheckpointVersion = 1;

struct Checkpoint {
  Policy policy;
  OptimizerState optimizer;
  std::int64_t iteration = 0;
};

std::string checkpoint_manifest(const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Throws Error("checkpoint_mismatch") when the checkpoint was trained with a
// different pool or gating mode.
void require_compatible(const Checkpoint& ckpt, const NominalPool& pool,
                        std::optional<GatingMode> gating = std::nullopt);

}  // namespace ecolane

#endif  // ECOLANE_POLICY_HPP_
