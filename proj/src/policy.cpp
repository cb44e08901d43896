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

#include "ecolane/policy.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace ecolane {
namespace {

using nlohmann::json;

constexpr char kCheckpointMagic[8] = {'E', 'C', 'O', 'C', 'K', 'P', 'T', '1'};

void push_slot(std::array<double, kObservationFeatures>& f, int& i,
               const NeighborSlot& slot) {
  f[i++] = slot.present ? 1.0 : 0.0;
  f[i++] = slot.gap / kFeatureDistanceScale;
  f[i++] = slot.speed / kFeatureSpeedScale;
}

std::vector<double> one_hot(int k, int n) {
  std::vector<double> g(n, 0.0);
  g[k] = 1.0;
  return g;
}

double gated_mean(std::span<const double> gate, std::span<const double> pool) {
  double m = 0.0;
  for (std::size_t k = 0; k < gate.size(); ++k) m += gate[k] * pool[k];
  return m;
}

ActorOutput unpack(const Matrix& out, int col, double log_std) {
  ActorOutput a;
  a.residual_mean = out(0, col);
  a.residual_log_std = log_std;
  a.gate_logits.resize(out.rows() - 1);
  for (int k = 0; k + 1 < out.rows(); ++k) a.gate_logits[k] = out(k + 1, col);
  return a;
}

}  // namespace

std::array<double, kObservationFeatures> observation_features(const Observation& obs) {
  std::array<double, kObservationFeatures> f{};
  int i = 0;
  f[i++] = obs.ego_speed / kFeatureSpeedScale;
  f[i++] = obs.ego_distance_to_signal / kFeatureDistanceScale;
  push_slot(f, i, obs.leader);
  push_slot(f, i, obs.follower);
  for (const NeighborSlot& s : obs.adjacent) push_slot(f, i, s);
  f[i++] = obs.signal_phase == Phase::kRed ? 1.0 : 0.0;
  f[i++] = obs.time_to_change / kFeatureTimeScale;
  return f;
}

Vector policy_input(const Observation& obs, const EncodingBounds& bounds) {
  Vector x(kPolicyInputDim);
  const auto f = observation_features(obs);
  const ContextVector c = encode_context(obs.context, bounds);
  for (int i = 0; i < kObservationFeatures; ++i) x(i) = f[i];
  for (int i = 0; i < kContextDim; ++i) x(kObservationFeatures + i) = c[i];
  return x;
}

std::string_view to_string(GatingMode mode) {
  return mode == GatingMode::kHard ? "hard" : "soft";
}

GatingMode parse_gating(std::string_view name) {
  if (name == "hard") return GatingMode::kHard;
  if (name == "soft") return GatingMode::kSoft;
  throw Error("usage", "unknown gating mode '" + std::string(name) +
                           "' (expected hard or soft)");
}

Policy::Policy(PolicyConfig config, Mlp actor, Mlp critic, double log_std)
    : config_(std::move(config)),
      actor_(std::move(actor)),
      critic_(std::move(critic)),
      log_std_(Matrix::Constant(1, 1, log_std)) {
  if (actor_.input_dim() != kPolicyInputDim || critic_.input_dim() != kPolicyInputDim)
    throw Error("dimension", "policy networks must take " +
                                 std::to_string(kPolicyInputDim) + " inputs");
  if (actor_.output_dim() != 1 + config_.pool.size())
    throw Error("dimension", "actor output must be 1 + pool size");
  if (critic_.output_dim() != 1) throw Error("dimension", "critic output must be 1");
}

Policy Policy::create(const PolicyConfig& config, Rng& rng) {
  Mlp actor = Mlp::glorot(standard_widths(kPolicyInputDim, 1 + config.pool.size()),
                          rng, 0.0);
  Mlp critic = Mlp::glorot(standard_widths(kPolicyInputDim, 1), rng, 1.0);
  return Policy(config, std::move(actor), std::move(critic), kInitialLogStd);
}

std::vector<Matrix*> Policy::parameter_blocks() {
  std::vector<Matrix*> out = actor_.blocks();
  out.push_back(&log_std_);
  for (Matrix* m : critic_.blocks()) out.push_back(m);
  return out;
}

std::vector<const Matrix*> Policy::parameter_blocks() const {
  std::vector<const Matrix*> out = actor_.blocks();
  out.push_back(&log_std_);
  for (const Matrix* m : critic_.blocks()) out.push_back(m);
  return out;
}

ActorOutput Policy::actor_forward(const Vector& input) const {
  const Matrix out = forward(actor_, Matrix(input));
  return unpack(out, 0, log_std_(0, 0));
}

double Policy::critic_forward(const Vector& input) const {
  return forward(critic_, input)(0);
}

double compose(std::span<const double> gate, std::span<const double> pool,
               double residual) {
  if (gate.size() != pool.size() || gate.empty())
    throw Error("gate", "gate has " + std::to_string(gate.size()) +
                            " weights for a pool of " + std::to_string(pool.size()));
  double sum = 0.0;
  for (double g : gate) {
    if (!(g >= 0.0)) throw Error("gate", "gate weights must be non-negative");
    sum += g;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw Error("gate", "gate weights sum to " + std::to_string(sum));
  return std::clamp(gated_mean(gate, pool) + residual, kAccelMin, kAccelMax);
}

double action_log_prob(const ActorOutput& out, GatingMode gating, int gate_index,
                       double raw_command, std::span<const double> pool) {
  const int n = static_cast<int>(out.gate_logits.size());
  if (gate_index < 0 || gate_index >= n || static_cast<int>(pool.size()) != n)
    throw Error("dimension", "gate index or pool size does not match the actor");
  const std::vector<double> gate = gating == GatingMode::kHard
                                       ? one_hot(gate_index, n)
                                       : softmax(out.gate_logits);
  const double residual = raw_command - gated_mean(gate, pool);
  const double mean[1] = {out.residual_mean};
  const double ls[1] = {out.residual_log_std};
  const double x[1] = {residual};
  double lp = gaussian_log_prob(mean, ls, x);
  if (gating == GatingMode::kHard) lp += log_softmax(out.gate_logits)[gate_index];
  return lp;
}

std::vector<ActionRecord> act_batch(const Policy& policy,
                                    std::span<const Observation> observations,
                                    Rng& rng, ActMode mode) {
  const int n = static_cast<int>(observations.size());
  std::vector<ActionRecord> records(n);
  if (n == 0) return records;
  Matrix inputs(kPolicyInputDim, n);
  for (int j = 0; j < n; ++j)
    inputs.col(j) = policy_input(observations[j], policy.config().bounds);
  const Matrix actor_out = forward(policy.actor(), inputs);
  const Matrix values = forward(policy.critic(), inputs);
  const double log_std = clamp_log_std(policy.log_std()(0, 0));
  const GatingMode gating = policy.config().gating;

  for (int j = 0; j < n; ++j) {
    ActionRecord& r = records[j];
    const ActorOutput out = unpack(actor_out, j, policy.log_std()(0, 0));
    r.pool = policy.config().pool.evaluate(observations[j]);
    if (gating == GatingMode::kHard) {
      r.gate_index = mode == ActMode::kTrain
                         ? categorical_sample(out.gate_logits, rng).index
                         : argmax(out.gate_logits);
      r.gate = one_hot(r.gate_index, policy.pool_size());
    } else {
      r.gate = softmax(out.gate_logits);
      r.gate_index = argmax(r.gate);
    }
    r.residual = out.residual_mean;
    if (mode == ActMode::kTrain) r.residual += std::exp(log_std) * standard_normal(rng);
    r.raw_command = gated_mean(r.gate, r.pool) + r.residual;
    r.final_accel = compose(r.gate, r.pool, r.residual);
    r.joint_log_prob = action_log_prob(out, gating, r.gate_index, r.raw_command, r.pool);
    r.value = values(0, j);
  }
  return records;
}

ActionRecord act(const Policy& policy, const Observation& obs, Rng& rng, ActMode mode) {
  return act_batch(policy, std::span<const Observation>(&obs, 1), rng, mode).front();
}

Vector critic_batch(const Policy& policy, const Matrix& inputs) {
  return forward(policy.critic(), inputs).row(0).transpose();
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string checkpoint_manifest(const Checkpoint& ckpt) {
  const PolicyConfig& c = ckpt.policy.config();
  json pool = json::array();
  for (NominalId id : c.pool.members()) pool.push_back(std::string(to_string(id)));
  json bounds = json::array();
  for (const Bounds& b : c.bounds.numeric) bounds.push_back({b.lo, b.hi});
  json manifest = {
      {"format", "ecolane-policy"},
      {"version", kCheckpointVersion},
      {"library_version", std::string(kVersion)},
      {"pool", pool},
      {"gating", std::string(to_string(c.gating))},
      {"encoding_bounds", bounds},
      {"input_dim", kPolicyInputDim},
      {"actor_widths", ckpt.policy.actor().widths()},
      {"critic_widths", ckpt.policy.critic().widths()},
      {"iteration", ckpt.iteration},
  };
  return manifest.dump();
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream out(std::ios::binary);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_u64(out, kCheckpointVersion);
  const std::string manifest = checkpoint_manifest(ckpt);
  write_u64(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  write_mlp(out, ckpt.policy.actor());
  write_mlp(out, ckpt.policy.critic());
  write_matrix(out, ckpt.policy.log_std());
  write_optimizer(out, ckpt.optimizer);

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error("io", "cannot write checkpoint " + path.string());
  const std::string bytes = out.str();
  file.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!file) throw Error("io", "failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  in.read(magic, sizeof(magic));
  if (!in || !std::equal(magic, magic + sizeof(magic), kCheckpointMagic))
    throw Error("checkpoint", path.string() + " is not an ecolane checkpoint");
  try {
    const std::uint64_t version = read_u64(in);
    if (version != kCheckpointVersion)
      throw Error("checkpoint", "unsupported checkpoint version " + std::to_string(version));
    const std::uint64_t size = read_u64(in);
    if (size > (1u << 24)) throw Error("checkpoint", "corrupt manifest length");
    std::string text(size, '\0');
    in.read(text.data(), static_cast<std::streamsize>(size));
    if (!in) throw Error("checkpoint", "truncated manifest");
    const json manifest = json::parse(text);

    PolicyConfig config;
    std::vector<NominalId> members;
    for (const auto& name : manifest.at("pool")) {
      const auto id = parse_nominal(name.get<std::string>());
      if (!id) throw Error("checkpoint", "unknown pool member in manifest");
      members.push_back(*id);
    }
    config.pool = NominalPool(members);
    config.gating = parse_gating(manifest.at("gating").get<std::string>());
    const json& bounds = manifest.at("encoding_bounds");
    if (bounds.size() != config.bounds.numeric.size())
      throw Error("checkpoint", "manifest encoding bounds have the wrong length");
    for (std::size_t i = 0; i < bounds.size(); ++i)
      config.bounds.numeric[i] = {bounds[i][0].get<double>(), bounds[i][1].get<double>()};

    Mlp actor = read_mlp(in);
    Mlp critic = read_mlp(in);
    const Matrix log_std = read_matrix(in);
    if (log_std.rows() != 1 || log_std.cols() != 1)
      throw Error("checkpoint", "bad log-std block");
    Checkpoint ckpt;
    ckpt.policy = Policy(config, std::move(actor), std::move(critic), log_std(0, 0));
    ckpt.optimizer = read_optimizer(in);
    ckpt.iteration = manifest.at("iteration").get<std::int64_t>();
    in.peek();
    if (!in.eof()) throw Error("checkpoint", "trailing bytes after optimizer state");
    return ckpt;
  } catch (const json::exception& e) {
    throw Error("checkpoint", std::string("bad manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == "checkpoint") throw;
    throw Error("checkpoint", path.string() + ": " + e.what());
  }
}

void require_compatible(const Checkpoint& ckpt, const NominalPool& pool,
                        std::optional<GatingMode> gating) {
  const PolicyConfig& c = ckpt.policy.config();
  if (!(c.pool == pool))
    throw Error("checkpoint_mismatch", "checkpoint pool is '" + c.pool.to_string() +
                                           "' but '" + pool.to_string() + "' was requested");
  if (gating && *gating != c.gating)
    throw Error("checkpoint_mismatch",
                "checkpoint gating is '" + std::string(to_string(c.gating)) +
                    "' but '" + std::string(to_string(*gating)) + "' was requested");
}

}  // namespace ecolane
