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

// Dense multilayer perceptron with hand-written reverse mode, distribution
// heads, and an Adam optimizer. Batches are stored column-wise: an input
// batch is (input_dim x batch).

#ifndef ECOLANE_NET_HPP_
#define ECOLANE_NET_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "ecolane/common.hpp"

namespace ecolane {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Hidden widths used for both actor and critic.
inline constexpr int kHiddenWidth = 256;
inline constexpr int kHiddenLayers = 4;

std::vector<int> standard_widths(int input_dim, int output_dim);

// tanh hidden layers, linear output. weights[l] is (widths[l+1] x widths[l]).
class Mlp {
 public:
  Mlp() = default;
  // Zero-initialized parameters.
  explicit Mlp(std::vector<int> widths);

  // Glorot-uniform hidden layers; the output layer is scaled by
  // output_scale (0 gives a zero head).
  static Mlp glorot(std::vector<int> widths, Rng& rng, double output_scale = 1.0);

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int num_layers() const { return static_cast<int>(weights_.size()); }
  std::size_t num_parameters() const;

  const Matrix& weight(int l) const { return weights_[l]; }
  const Matrix& bias(int l) const { return biases_[l]; }
  Matrix& weight(int l) { touch(); return weights_[l]; }
  Matrix& bias(int l) { touch(); return biases_[l]; }

  // Parameter blocks in a fixed order: W0, b0, W1, b1, ...
  std::vector<Matrix*> blocks();
  std::vector<const Matrix*> blocks() const;

  // Incremented on every mutable access; caches remember it.
  std::uint64_t generation() const { return generation_; }
  void touch() { ++generation_; }

  bool operator==(const Mlp& other) const;

 private:
  std::vector<int> widths_;
  std::vector<Matrix> weights_;
  std::vector<Matrix> biases_;  // (width x 1)
  std::uint64_t generation_ = 0;
};

// Activations of one forward pass; activations[0] is the input.
struct ForwardCache {
  const Mlp* net = nullptr;
  std::uint64_t generation = 0;
  std::vector<Matrix> activations;
};

// Same block layout as Mlp::blocks().
struct Gradients {
  std::vector<Matrix> blocks;

  static Gradients zeros_like(const Mlp& net);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double scale);
  double squared_norm() const;
};

// Throws Error("dimension") on an input-size mismatch.
Matrix forward(const Mlp& net, const Matrix& input, ForwardCache* cache = nullptr);
Vector forward(const Mlp& net, const Vector& input);

// Gradient of sum(output .* output_grad) w.r.t. every parameter, summed over
// the batch. Throws Error("stale_cache") if the cache does not belong to the
// current parameters of `net`. When input_grad is non-null it receives the
// gradient w.r.t. the input batch.
Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Matrix& output_grad, Matrix* input_grad = nullptr);

// ---------------------------------------------------------------------------
// Distribution heads

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

double clamp_log_std(double log_std);

// Diagonal Gaussian log-density; log_std is clamped to [kLogStdMin, kLogStdMax].
double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> x);
double gaussian_entropy(std::span<const double> log_std);

struct GaussianSample {
  std::vector<double> value;
  double log_prob = 0.0;
};
// Reparameterized: value = mean + exp(log_std) * noise.
GaussianSample gaussian_sample(std::span<const double> mean,
                               std::span<const double> log_std, Rng& rng);

// Max-subtracted softmax.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);
double categorical_entropy(std::span<const double> logits);
// Lowest index wins ties.
int argmax(std::span<const double> values);

struct CategoricalSample {
  int index = 0;
  double log_prob = 0.0;
};
CategoricalSample categorical_sample(std::span<const double> logits, Rng& rng);

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamConfig&) const = default;
};

struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;

  static OptimizerState for_blocks(std::span<const Matrix* const> blocks,
                                   AdamConfig config = {});
  static OptimizerState for_net(const Mlp& net, AdamConfig config = {});

  bool operator==(const OptimizerState&) const;
};

// Bias-corrected Adam update of each block. Throws Error("dimension") when
// shapes disagree.
void adam_update(std::span<Matrix* const> params, std::span<const Matrix> grads,
                 OptimizerState& state);
void adam_step(Mlp& net, const Gradients& grads, OptimizerState& state);

// ---------------------------------------------------------------------------
// Binary serialization (little-endian, bit exact)

void write_u64(std::ostream& out, std::uint64_t value);
std::uint64_t read_u64(std::istream& in);
void write_f64(std::ostream& out, double value);
double read_f64(std::istream& in);
void write_matrix(std::ostream& out, const Matrix& m);
Matrix read_matrix(std::istream& in);

void write_mlp(std::ostream& out, const Mlp& net);
Mlp read_mlp(std::istream& in);
void write_optimizer(std::ostream& out, const OptimizerState& state);
OptimizerState read_optimizer(std::istream& in);

}  // namespace ecolane

#endif  // ECOLANE_NET_HPP_
