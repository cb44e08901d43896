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

#include "ecolane/net.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

namespace ecolane {
namespace {

Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = 2.0 * uniform01(rng) - 1.0;
  return m;
}

// Weighted sum of the outputs, so the output gradient is the weight matrix.
double probe_loss(const Mlp& net, const Matrix& x, const Matrix& c) {
  return forward(net, x).cwiseProduct(c).sum();
}

TEST(Mlp, BackwardMatchesCentralDifferences) {
  Rng rng(4);
  Mlp net = Mlp::glorot({3, 6, 5, 2}, rng);
  const Matrix x = random_matrix(3, 4, rng);
  const Matrix c = random_matrix(2, 4, rng);
  ForwardCache cache;
  forward(net, x, &cache);
  Matrix dx;
  const Gradients g = backward(net, cache, c, &dx);

  const double h = 1e-5;
  double worst = 0.0;
  auto check = [&](double analytic, double numeric) {
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  };
  for (int b = 0; b < 2 * net.num_layers(); ++b) {
    for (int i = 0; i < g.blocks[b].size(); ++i) {
      Matrix& p = *net.blocks()[b];
      const double keep = p(i);
      p(i) = keep + h;
      const double up = probe_loss(net, x, c);
      p(i) = keep - h;
      const double down = probe_loss(net, x, c);
      p(i) = keep;
      check(g.blocks[b](i), (up - down) / (2 * h));
    }
  }
  for (int i = 0; i < x.size(); ++i) {
    Matrix xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    check(dx(i), (probe_loss(net, xp, c) - probe_loss(net, xm, c)) / (2 * h));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(Mlp, TanhMatchesStd) {
  Mlp net({1, 1, 1});
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  for (double z : {-30.0, -3.0, -0.1, 0.0, 1e-9, 0.7, 5.0, 25.0}) {
    Matrix x(1, 1);
    x(0, 0) = z;
    EXPECT_NEAR(forward(net, x)(0, 0), std::tanh(z), 1e-15) << z;
  }
}

TEST(Mlp, ZeroHeadGivesZeroOutput) {
  Rng rng(1);
  const Mlp net = Mlp::glorot(standard_widths(7, 3), rng, 0.0);
  EXPECT_EQ(net.widths(), (std::vector<int>{7, 256, 256, 256, 256, 3}));
  const Matrix out = forward(net, random_matrix(7, 5, rng));
  EXPECT_EQ(out.norm(), 0.0);
}

TEST(Mlp, StaleCacheAndDimensionErrors) {
  Rng rng(2);
  Mlp net = Mlp::glorot({2, 3, 1}, rng);
  ForwardCache cache;
  forward(net, random_matrix(2, 1, rng), &cache);
  net.weight(0)(0, 0) += 0.1;
  try {
    backward(net, cache, Matrix::Ones(1, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), "stale_cache");
  }
  EXPECT_THROW(forward(net, random_matrix(3, 1, rng)), Error);
  EXPECT_THROW(Mlp({4}), Error);
}

TEST(Distributions, SoftmaxIsNormalizedAndStable) {
  Rng rng(3);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> logits(5);
    for (double& l : logits) l = 100.0 * uniform01(rng) - 50.0;
    const std::vector<double> p = softmax(logits);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    const std::vector<double> lp = log_softmax(logits);
    for (std::size_t k = 0; k < p.size(); ++k) {
      EXPECT_GE(p[k], 0.0);
      EXPECT_TRUE(std::isfinite(lp[k]));
    }
  }
  const std::vector<double> extreme = softmax(std::vector<double>{1000.0, -1000.0});
  EXPECT_EQ(extreme[0], 1.0);
  EXPECT_EQ(extreme[1], 0.0);
}

TEST(Distributions, CategoricalEntropyAndArgmax) {
  const std::vector<double> uniform(4, 0.3);
  EXPECT_NEAR(categorical_entropy(uniform), std::log(4.0), 1e-15);
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1);
  Rng rng(9);
  std::vector<int> counts(3, 0);
  const std::vector<double> logits{std::log(0.2), std::log(0.3), std::log(0.5)};
  for (int i = 0; i < 30000; ++i) {
    const CategoricalSample s = categorical_sample(logits, rng);
    ++counts[s.index];
    EXPECT_NEAR(s.log_prob, logits[s.index], 1e-12);
  }
  EXPECT_NEAR(counts[0] / 30000.0, 0.2, 0.01);
  EXPECT_NEAR(counts[2] / 30000.0, 0.5, 0.01);
}

TEST(Distributions, GaussianLogProbAndEntropy) {
  const std::vector<double> mean{1.0}, ls{std::log(2.0)}, x{3.0};
  // N(3; 1, 2): -0.5 - ln 2 - 0.5 ln(2 pi)
  EXPECT_NEAR(gaussian_log_prob(mean, ls, x), -0.5 - std::log(2.0) - 0.5 * std::log(2 * M_PI),
              1e-14);
  EXPECT_NEAR(gaussian_entropy(ls), 0.5 * std::log(2 * M_PI * M_E * 4.0), 1e-14);
  EXPECT_EQ(clamp_log_std(-9.0), kLogStdMin);
  EXPECT_EQ(clamp_log_std(9.0), kLogStdMax);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Matrix p = Matrix::Zero(1, 3);
  Matrix g(1, 3);
  g << 0.5, -2.0, 1e-3;
  std::vector<Matrix*> params{&p};
  std::vector<const Matrix*> view{&p};
  OptimizerState s = OptimizerState::for_blocks(view, AdamConfig{0.01});
  adam_update(params, std::vector<Matrix>{g}, s);
  EXPECT_NEAR(p(0), -0.01, 1e-9);
  EXPECT_NEAR(p(1), 0.01, 1e-9);
  EXPECT_NEAR(p(2), -0.01, 1e-7);
  EXPECT_EQ(s.step, 1);
}

TEST(Serialization, RoundTripIsExact) {
  Rng rng(8);
  Mlp net = Mlp::glorot({4, 8, 2}, rng);
  OptimizerState opt = OptimizerState::for_net(net);
  Gradients g = Gradients::zeros_like(net);
  for (Matrix& b : g.blocks) b.setConstant(0.25);
  adam_step(net, g, opt);
  std::stringstream buf;
  write_mlp(buf, net);
  write_optimizer(buf, opt);
  const Mlp net2 = read_mlp(buf);
  const OptimizerState opt2 = read_optimizer(buf);
  EXPECT_TRUE(net2 == net);
  EXPECT_TRUE(opt2 == opt);

  std::stringstream truncated(buf.str().substr(0, 10));
  std::stringstream again;
  write_mlp(again, net);
  std::stringstream cut(again.str().substr(0, again.str().size() - 3));
  EXPECT_THROW(read_mlp(cut), Error);
}

}  // namespace
}  // namespace ecolane
