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

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <string>

namespace ecolane {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 ln(2 pi)

// (e^2x - 1) / (e^2x + 1) through Eigen's vectorized exp; Eigen evaluates
// double tanh one scalar at a time. |x| > 20 saturates to +-1 in double.
Matrix fast_tanh(const Matrix& z) {
  const Eigen::ArrayXXd e = (2.0 * z.array().min(20.0).max(-20.0)).exp();
  return ((e - 1.0) / (e + 1.0)).matrix();
}

}  // namespace

std::vector<int> standard_widths(int input_dim, int output_dim) {
  std::vector<int> widths{input_dim};
  for (int l = 0; l < kHiddenLayers; ++l) widths.push_back(kHiddenWidth);
  widths.push_back(output_dim);
  return widths;
}

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) {
    throw Error("dimension", "an MLP needs at least input and output widths");
  }
  for (int w : widths_) {
    if (w <= 0) throw Error("dimension", "layer widths must be positive");
  }
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    weights_.push_back(Matrix::Zero(widths_[l + 1], widths_[l]));
    biases_.push_back(Matrix::Zero(widths_[l + 1], 1));
  }
}

Mlp Mlp::glorot(std::vector<int> widths, Rng& rng, double output_scale) {
  Mlp net(std::move(widths));
  for (int l = 0; l < net.num_layers(); ++l) {
    Matrix& w = net.weights_[l];
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    const double scale = l + 1 == net.num_layers() ? output_scale : 1.0;
    // Column-major fill order keeps initialization reproducible.
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        w(i, j) = scale * limit * (2.0 * uniform01(rng) - 1.0);
      }
    }
  }
  return net;
}

std::size_t Mlp::num_parameters() const {
  std::size_t n = 0;
  for (int l = 0; l < num_layers(); ++l) {
    n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
  }
  return n;
}

std::vector<Matrix*> Mlp::blocks() {
  touch();
  std::vector<Matrix*> out;
  for (int l = 0; l < num_layers(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

std::vector<const Matrix*> Mlp::blocks() const {
  std::vector<const Matrix*> out;
  for (int l = 0; l < num_layers(); ++l) {
    out.push_back(&weights_[l]);
    out.push_back(&biases_[l]);
  }
  return out;
}

bool Mlp::operator==(const Mlp& other) const {
  if (widths_ != other.widths_) return false;
  for (int l = 0; l < num_layers(); ++l) {
    if (weights_[l] != other.weights_[l] || biases_[l] != other.biases_[l]) {
      return false;
    }
  }
  return true;
}

Gradients Gradients::zeros_like(const Mlp& net) {
  Gradients g;
  for (const Matrix* b : net.blocks()) {
    g.blocks.push_back(Matrix::Zero(b->rows(), b->cols()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.blocks.size() != blocks.size()) {
    throw Error("dimension", "gradient block count mismatch");
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i] += other.blocks[i];
  return *this;
}

Gradients& Gradients::operator*=(double scale) {
  for (Matrix& b : blocks) b *= scale;
  return *this;
}

double Gradients::squared_norm() const {
  double total = 0.0;
  for (const Matrix& b : blocks) total += b.squaredNorm();
  return total;
}

Matrix forward(const Mlp& net, const Matrix& input, ForwardCache* cache) {
  if (input.rows() != net.input_dim()) {
    throw Error("dimension", "input has " + std::to_string(input.rows()) +
                                 " rows, network expects " +
                                 std::to_string(net.input_dim()));
  }
  if (cache) {
    cache->net = &net;
    cache->generation = net.generation();
    cache->activations.clear();
    cache->activations.reserve(net.num_layers() + 1);
    cache->activations.push_back(input);
  }
  Matrix a = input;
  for (int l = 0; l < net.num_layers(); ++l) {
    Matrix z = net.weight(l) * a;
    z.colwise() += net.bias(l).col(0);
    if (l + 1 < net.num_layers()) z = fast_tanh(z);
    a = std::move(z);
    if (cache) cache->activations.push_back(a);
  }
  return a;
}

Vector forward(const Mlp& net, const Vector& input) {
  return forward(net, Matrix(input), nullptr).col(0);
}

Gradients backward(const Mlp& net, const ForwardCache& cache,
                   const Matrix& output_grad, Matrix* input_grad) {
  if (cache.net != &net || cache.generation != net.generation() ||
      static_cast<int>(cache.activations.size()) != net.num_layers() + 1) {
    throw Error("stale_cache", "forward cache does not match the network");
  }
  const Matrix& out = cache.activations.back();
  if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols()) {
    throw Error("dimension", "output gradient shape does not match the output");
  }
  Gradients g;
  g.blocks.resize(2 * net.num_layers());
  Matrix delta = output_grad;  // dL/dz of the current layer
  for (int l = net.num_layers() - 1; l >= 0; --l) {
    const Matrix& a_prev = cache.activations[l];
    g.blocks[2 * l] = delta * a_prev.transpose();
    g.blocks[2 * l + 1] = delta.rowwise().sum();
    if (l > 0) {
      Matrix da = net.weight(l).transpose() * delta;
      delta = (da.array() * (1.0 - a_prev.array().square())).matrix();
    } else if (input_grad) {
      *input_grad = net.weight(0).transpose() * delta;
    }
  }
  return g;
}

// ---------------------------------------------------------------------------

double clamp_log_std(double log_std) {
  return std::clamp(log_std, kLogStdMin, kLogStdMax);
}

double gaussian_log_prob(std::span<const double> mean,
                         std::span<const double> log_std,
                         std::span<const double> x) {
  if (mean.size() != log_std.size() || mean.size() != x.size()) {
    throw Error("dimension", "gaussian head size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double ls = clamp_log_std(log_std[i]);
    const double z = (x[i] - mean[i]) * std::exp(-ls);
    total += -0.5 * z * z - ls - kHalfLog2Pi;
  }
  return total;
}

double gaussian_entropy(std::span<const double> log_std) {
  double total = 0.0;
  for (double ls : log_std) total += clamp_log_std(ls) + 0.5 + kHalfLog2Pi;
  return total;
}

GaussianSample gaussian_sample(std::span<const double> mean,
                               std::span<const double> log_std, Rng& rng) {
  if (mean.size() != log_std.size()) {
    throw Error("dimension", "gaussian head size mismatch");
  }
  GaussianSample s;
  s.value.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    s.value[i] = mean[i] + std::exp(clamp_log_std(log_std[i])) * standard_normal(rng);
  }
  s.log_prob = gaussian_log_prob(mean, log_std, s.value);
  return s;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  if (logits.empty()) return p;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double m = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - m);
  const double lse = m + std::log(total);
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

double categorical_entropy(std::span<const double> logits) {
  const std::vector<double> lp = log_softmax(logits);
  double h = 0.0;
  for (double l : lp) h -= std::exp(l) * l;
  return h;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = static_cast<int>(i);
  }
  return best;
}

CategoricalSample categorical_sample(std::span<const double> logits, Rng& rng) {
  const std::vector<double> lp = log_softmax(logits);
  const double u = uniform01(rng);
  double cumulative = 0.0;
  int index = static_cast<int>(lp.size()) - 1;
  for (std::size_t i = 0; i < lp.size(); ++i) {
    cumulative += std::exp(lp[i]);
    if (u < cumulative) {
      index = static_cast<int>(i);
      break;
    }
  }
  return {index, lp[index]};
}

// ---------------------------------------------------------------------------

OptimizerState OptimizerState::for_blocks(std::span<const Matrix* const> blocks,
                                          AdamConfig config) {
  OptimizerState s;
  s.config = config;
  for (const Matrix* b : blocks) {
    s.first_moment.push_back(Matrix::Zero(b->rows(), b->cols()));
    s.second_moment.push_back(Matrix::Zero(b->rows(), b->cols()));
  }
  return s;
}

OptimizerState OptimizerState::for_net(const Mlp& net, AdamConfig config) {
  const auto blocks = net.blocks();
  return for_blocks(blocks, config);
}

bool OptimizerState::operator==(const OptimizerState& o) const {
  if (!(config == o.config) || step != o.step ||
      first_moment.size() != o.first_moment.size()) {
    return false;
  }
  for (std::size_t i = 0; i < first_moment.size(); ++i) {
    if (first_moment[i] != o.first_moment[i] ||
        second_moment[i] != o.second_moment[i]) {
      return false;
    }
  }
  return true;
}

void adam_update(std::span<Matrix* const> params, std::span<const Matrix> grads,
                 OptimizerState& s) {
  if (params.size() != grads.size() || params.size() != s.first_moment.size()) {
    throw Error("dimension", "optimizer block count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols() ||
        s.first_moment[i].rows() != grads[i].rows() ||
        s.first_moment[i].cols() != grads[i].cols()) {
      throw Error("dimension", "optimizer block shape mismatch");
    }
  }
  ++s.step;
  const AdamConfig& c = s.config;
  const double t = static_cast<double>(s.step);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = s.first_moment[i];
    Matrix& v = s.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grads[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grads[i].cwiseProduct(grads[i]);
    params[i]->array() -= c.learning_rate * (m.array() / correction1) /
                          ((v.array() / correction2).sqrt() + c.epsilon);
  }
}

void adam_step(Mlp& net, const Gradients& grads, OptimizerState& state) {
  const auto blocks = net.blocks();
  adam_update(blocks, grads.blocks, state);
}

// ---------------------------------------------------------------------------

void write_u64(std::ostream& out, std::uint64_t value) {
  unsigned char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(bytes), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) {
    throw Error("parse", "unexpected end of binary data");
  }
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return value;
}

void write_f64(std::ostream& out, double value) {
  write_u64(out, std::bit_cast<std::uint64_t>(value));
}

double read_f64(std::istream& in) { return std::bit_cast<double>(read_u64(in)); }

void write_matrix(std::ostream& out, const Matrix& m) {
  write_u64(out, static_cast<std::uint64_t>(m.rows()));
  write_u64(out, static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) write_f64(out, m(i, j));
  }
}

Matrix read_matrix(std::istream& in) {
  const std::uint64_t rows = read_u64(in);
  const std::uint64_t cols = read_u64(in);
  if (rows > (1u << 20) || cols > (1u << 20)) {
    throw Error("parse", "implausible matrix shape in binary data");
  }
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = read_f64(in);
  }
  return m;
}

void write_mlp(std::ostream& out, const Mlp& net) {
  write_u64(out, net.widths().size());
  for (int w : net.widths()) write_u64(out, static_cast<std::uint64_t>(w));
  for (const Matrix* b : net.blocks()) write_matrix(out, *b);
}

Mlp read_mlp(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n < 2 || n > 64) throw Error("parse", "implausible layer count");
  std::vector<int> widths;
  for (std::uint64_t i = 0; i < n; ++i) widths.push_back(static_cast<int>(read_u64(in)));
  Mlp net(widths);
  for (Matrix* b : net.blocks()) {
    Matrix m = read_matrix(in);
    if (m.rows() != b->rows() || m.cols() != b->cols()) {
      throw Error("parse", "parameter block shape does not match widths");
    }
    *b = std::move(m);
  }
  return net;
}

void write_optimizer(std::ostream& out, const OptimizerState& s) {
  write_f64(out, s.config.learning_rate);
  write_f64(out, s.config.beta1);
  write_f64(out, s.config.beta2);
  write_f64(out, s.config.epsilon);
  write_u64(out, static_cast<std::uint64_t>(s.step));
  write_u64(out, s.first_moment.size());
  for (std::size_t i = 0; i < s.first_moment.size(); ++i) {
    write_matrix(out, s.first_moment[i]);
    write_matrix(out, s.second_moment[i]);
  }
}

OptimizerState read_optimizer(std::istream& in) {
  OptimizerState s;
  s.config.learning_rate = read_f64(in);
  s.config.beta1 = read_f64(in);
  s.config.beta2 = read_f64(in);
  s.config.epsilon = read_f64(in);
  s.step = static_cast<std::int64_t>(read_u64(in));
  const std::uint64_t n = read_u64(in);
  if (n > 4096) throw Error("parse", "implausible optimizer block count");
  for (std::uint64_t i = 0; i < n; ++i) {
    s.first_moment.push_back(read_matrix(in));
    s.second_moment.push_back(read_matrix(in));
  }
  return s;
}

}  // namespace ecolane
