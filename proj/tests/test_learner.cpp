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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace ecolane {
namespace {

const ScenarioFile& synthetic() {
  static const ScenarioFile f =
      load_scenario_file(std::string(ECOLANE_DATA_DIR) + "/scenarios/synthetic4.json");
  return f;
}

PolicyConfig config(const std::string& pool, GatingMode gating) {
  return {NominalPool::parse(pool), gating,
          EncodingBounds::from(synthetic().distribution->contexts)};
}

// Direct sum A_t = sum_l (gamma lambda)^l delta_{t+l} for a chain that
// terminates at its last step.
std::vector<double> naive_gae(const std::vector<double>& r, const std::vector<double>& v,
                              double gamma, double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n), a(n, 0.0);
  for (std::size_t t = 0; t < n; ++t)
    delta[t] = r[t] + (t + 1 < n ? gamma * v[t + 1] : 0.0) - v[t];
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t l = t; l < n; ++l) a[t] += std::pow(gamma * lambda, l - t) * delta[l];
  return a;
}

TEST(Gae, SingleTerminalStep) {
  const GaeResult g = gae(std::vector<double>{1.0}, std::vector<double>{0.5},
                          std::vector<bool>{true}, 0.99, 0.95, 123.0);
  EXPECT_DOUBLE_EQ(g.advantages[0], 0.5);
  EXPECT_DOUBLE_EQ(g.returns[0], 1.0);
}

TEST(Gae, HandExample) {
  const GaeResult g = gae(std::vector<double>{1, 1, 1}, std::vector<double>{.5, .5, .5},
                          std::vector<bool>{false, false, true}, 0.9, 0.8, 0.0);
  EXPECT_NEAR(g.advantages[2], 0.5, 1e-15);
  EXPECT_NEAR(g.advantages[1], 1.31, 1e-15);
  EXPECT_NEAR(g.advantages[0], 1.8932, 1e-15);
  EXPECT_NEAR(g.returns[0], 2.3932, 1e-15);
}

TEST(Gae, LambdaZeroIsOneStepTd) {
  const GaeResult g = gae(std::vector<double>{1, 2}, std::vector<double>{3, 4},
                          std::vector<bool>{false, false}, 0.5, 0.0, 10.0);
  EXPECT_DOUBLE_EQ(g.advantages[0], 1 + 0.5 * 4 - 3);
  EXPECT_DOUBLE_EQ(g.advantages[1], 2 + 0.5 * 10 - 4);
}

TEST(Gae, MatchesDirectSum) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 1 + trial;
    std::vector<double> r(n), v(n);
    for (int i = 0; i < n; ++i) {
      r[i] = 2 * uniform01(rng) - 1;
      v[i] = 2 * uniform01(rng) - 1;
    }
    std::vector<bool> done(n, false);
    done.back() = true;
    const GaeResult g = gae(r, v, done, 0.97, 0.9, 0.0);
    const std::vector<double> expected = naive_gae(r, v, 0.97, 0.9);
    for (int i = 0; i < n; ++i) EXPECT_NEAR(g.advantages[i], expected[i], 1e-12);
  }
}

TEST(Rewards, FleetAndIndividualAssignment) {
  const std::vector<double> ind{1.0, 2.0, 6.0};
  Rng rng(2);
  const AssignedRewards fleet = assign_rewards(ind, 1.0, rng);
  EXPECT_TRUE(fleet.fleet);
  for (double r : fleet.rewards) EXPECT_EQ(r, 3.0);
  const AssignedRewards own = assign_rewards(ind, 0.0, rng);
  EXPECT_FALSE(own.fleet);
  EXPECT_EQ(own.rewards, ind);
  EXPECT_THROW(assign_rewards(std::vector<double>{}, 0.5, rng), Error);
}

TEST(Config, ValidationNamesTheField) {
  TrainConfig c;
  EXPECT_NO_THROW(validate(c));
  c.gamma = 1.5;
  try {
    validate(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "config");
    EXPECT_NE(std::string(e.what()).find("gamma"), std::string::npos);
  }
}

// Small networks so every parameter can be perturbed.
Policy small_policy(GatingMode gating, Rng& rng) {
  const PolicyConfig pc = config("all", gating);
  Mlp actor = Mlp::glorot({kPolicyInputDim, 6, 5, 1 + pc.pool.size()}, rng, 0.5);
  Mlp critic = Mlp::glorot({kPolicyInputDim, 6, 1}, rng);
  return Policy(pc, std::move(actor), std::move(critic), -0.4);
}

Batch random_batch(const Policy& policy, Rng& rng, int n) {
  Batch b;
  const int k = policy.pool_size();
  b.inputs = Matrix(kPolicyInputDim, n);
  b.pool = Matrix(k, n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < kPolicyInputDim; ++i) b.inputs(i, j) = uniform01(rng);
    for (int i = 0; i < k; ++i) b.pool(i, j) = 4 * uniform01(rng) - 2;
    b.gate_index.push_back(static_cast<int>(rng() % k));
    b.raw_command.push_back(4 * uniform01(rng) - 2);
    b.old_log_prob.push_back(-2.0 + 0.5 * uniform01(rng));
    b.advantage.push_back(2 * uniform01(rng) - 1);
    b.return_.push_back(2 * uniform01(rng) - 1);
  }
  return b;
}

double worst_fd_error(GatingMode gating) {
  Rng rng(gating == GatingMode::kHard ? 3 : 4);
  Policy policy = small_policy(gating, rng);
  const Batch batch = random_batch(policy, rng, 7);
  TrainConfig tc;
  LossGradients grads;
  ppo_loss(policy, batch, tc, &grads);
  const std::vector<Matrix> flat = grads.flatten();
  const std::vector<Matrix*> params = policy.parameter_blocks();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (int i = 0; i < params[b]->size(); ++i) {
      const double keep = (*params[b])(i);
      (*params[b])(i) = keep + h;
      policy.actor().touch();
      const double up = ppo_loss(policy, batch, tc, nullptr).total;
      (*params[b])(i) = keep - h;
      const double down = ppo_loss(policy, batch, tc, nullptr).total;
      (*params[b])(i) = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = flat[b](i);
      const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(analytic - numeric) / scale);
    }
  }
  return worst;
}

TEST(PpoLoss, GradientMatchesFiniteDifferencesHard) {
  EXPECT_LT(worst_fd_error(GatingMode::kHard), 1e-5);
}

TEST(PpoLoss, GradientMatchesFiniteDifferencesSoft) {
  EXPECT_LT(worst_fd_error(GatingMode::kSoft), 1e-5);
}

TEST(PpoLoss, ZeroAdvantageLeavesOnlyEntropyInActor) {
  Rng rng(5);
  Policy policy = small_policy(GatingMode::kHard, rng);
  Batch batch = random_batch(policy, rng, 5);
  std::fill(batch.advantage.begin(), batch.advantage.end(), 0.0);
  TrainConfig tc;
  tc.entropy_gaussian = 0.0;
  tc.entropy_categorical = 0.0;
  LossGradients grads;
  const LossTerms t = ppo_loss(policy, batch, tc, &grads);
  EXPECT_EQ(t.policy, 0.0);
  EXPECT_EQ(std::sqrt(grads.actor.squared_norm()), 0.0);
  EXPECT_EQ(grads.log_std(0, 0), 0.0);
  EXPECT_GT(std::sqrt(grads.critic.squared_norm()), 0.0);
}

TrainingDistribution small_dist() {
  TrainingDistribution d = *synthetic().distribution;
  d.horizon = 40.0;
  return d;
}

TEST(Rollouts, DeterministicAndOnPolicy) {
  Rng rng(6);
  Policy policy = Policy::create(config("all", GatingMode::kHard), rng);
  TrainConfig tc;
  const RolloutBuffer a = collect_rollouts(policy, small_dist(), tc, 200, 77);
  const RolloutBuffer b = collect_rollouts(policy, small_dist(), tc, 200, 77);
  ASSERT_GE(a.transitions.size(), 200u);
  ASSERT_EQ(a.transitions.size(), b.transitions.size());
  for (std::size_t i = 0; i < a.transitions.size(); ++i) {
    EXPECT_EQ(a.transitions[i].reward, b.transitions[i].reward);
    EXPECT_EQ(a.transitions[i].joint_log_prob, b.transitions[i].joint_log_prob);
    EXPECT_EQ(a.transitions[i].advantage, b.transitions[i].advantage);
  }

  // Before any update the stored log-probs are the current ones.
  std::vector<Transition> transitions = a.transitions;
  OptimizerState opt = OptimizerState::for_blocks(std::as_const(policy).parameter_blocks());
  tc.epochs = 1;
  tc.minibatch_size = 64;
  Rng shuffle(1);
  const UpdateStats s = ppo_update(policy, opt, transitions, tc, shuffle);
  EXPECT_LT(s.initial_ratio_error, 1e-9);
}

TEST(Train, LogsAndDeterminismAcrossRuns) {
  TrainConfig tc;
  tc.steps_per_iteration = 200;
  tc.minibatch_size = 64;
  tc.epochs = 2;
  TrainOptions opt;
  opt.seed = 11;
  opt.workers = 2;
  opt.iterations = 2;
  std::vector<std::string> lines_a, lines_b;
  opt.on_iteration = [&](const IterationLog& row, const Checkpoint&) {
    lines_a.push_back(log_line(row));
    EXPECT_NEAR(std::accumulate(row.usage.begin(), row.usage.end(), 0.0), 1.0, 1e-9);
    EXPECT_GE(row.transitions, 200);
  };
  const Checkpoint a = train(small_dist(), config("glosa,idm", GatingMode::kHard), tc, opt);
  opt.on_iteration = [&](const IterationLog& row, const Checkpoint&) {
    lines_b.push_back(log_line(row));
  };
  const Checkpoint b = train(small_dist(), config("glosa,idm", GatingMode::kHard), tc, opt);
  EXPECT_EQ(lines_a, lines_b);
  EXPECT_TRUE(a.policy == b.policy);
  EXPECT_TRUE(a.optimizer == b.optimizer);
  EXPECT_EQ(a.iteration, 2);
  EXPECT_EQ(log_header(NominalPool::parse("glosa,idm")),
            "iteration\tmean_reward\tusage_glosa\tusage_idm\tpolicy_loss\tvalue_loss"
            "\tentropy\tkl\tclip_fraction\tn_transitions\tn_episodes\tfleet_fraction");
}

}  // namespace
}  // namespace ecolane
