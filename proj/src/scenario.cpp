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

#include "ecolane/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"

namespace ecolane {

using json = nlohmann::json;

namespace {

std::string fmt_num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

[[noreturn]] void invalid(std::string_view where, std::string_view field,
                          const std::string& what) {
  throw Error("validation",
              std::string(where) + "." + std::string(field) + ": " + what);
}

void require(bool ok, std::string_view where, std::string_view field,
             const std::string& what) {
  if (!ok) invalid(where, field, what);
}

std::size_t sample_index(const std::vector<double>& weights, std::size_t n,
                         Rng& rng) {
  if (n == 1) return 0;
  if (weights.empty()) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
  }
  return std::discrete_distribution<std::size_t>(weights.begin(),
                                                 weights.end())(rng);
}

void validate_weights(const std::vector<double>& weights, std::size_t n,
                      std::string_view field) {
  if (weights.empty()) return;
  require(weights.size() == n, "distribution", field,
          "weights must match choices in length");
  double total = 0.0;
  for (double w : weights) {
    require(std::isfinite(w) && w >= 0.0, "distribution", field,
            "weights must be finite and non-negative");
    total += w;
  }
  require(total > 0.0, "distribution", field, "weights must not all be zero");
}

}  // namespace

std::string_view to_string(VehicleType type) {
  switch (type) {
    case VehicleType::kSedan: return "sedan";
    case VehicleType::kSuv: return "suv";
    case VehicleType::kTruck: return "truck";
  }
  return "?";
}

std::string_view to_string(EngineType type) {
  switch (type) {
    case EngineType::kIce: return "ice";
    case EngineType::kHybrid: return "hybrid";
  }
  return "?";
}

VehicleType parse_vehicle_type(std::string_view name) {
  if (name == "sedan") return VehicleType::kSedan;
  if (name == "suv") return VehicleType::kSuv;
  if (name == "truck") return VehicleType::kTruck;
  throw Error("validation", "unknown vehicle_type '" + std::string(name) +
                                "' (expected sedan|suv|truck)");
}

EngineType parse_engine_type(std::string_view name) {
  if (name == "ice") return EngineType::kIce;
  if (name == "hybrid") return EngineType::kHybrid;
  throw Error("validation", "unknown engine_type '" + std::string(name) +
                                "' (expected ice|hybrid)");
}

void validate(const Context& c, std::string_view where) {
  auto finite = [&](double v, std::string_view field) {
    require(std::isfinite(v), where, field, "must be finite");
  };
  finite(c.green_duration, "green_duration");
  finite(c.red_duration, "red_duration");
  finite(c.signal_offset, "signal_offset");
  finite(c.speed_limit, "speed_limit");
  finite(c.lane_length, "lane_length");
  finite(c.road_grade, "road_grade");
  finite(c.vehicle_age, "vehicle_age");
  finite(c.arrival_rate, "arrival_rate");
  finite(c.av_penetration, "av_penetration");
  require(c.green_duration > 0.0, where, "green_duration",
          "must be > 0, got " + fmt_num(c.green_duration));
  require(c.red_duration > 0.0, where, "red_duration",
          "must be > 0, got " + fmt_num(c.red_duration));
  require(c.signal_offset >= 0.0 && c.signal_offset < c.cycle(), where,
          "signal_offset",
          "must be in [0, green_duration + red_duration), got " +
              fmt_num(c.signal_offset));
  require(c.speed_limit > 0.0, where, "speed_limit",
          "must be > 0, got " + fmt_num(c.speed_limit));
  require(c.lane_length > 0.0, where, "lane_length",
          "must be > 0, got " + fmt_num(c.lane_length));
  require(c.road_grade >= -0.15 && c.road_grade <= 0.15, where, "road_grade",
          "must be in [-0.15, 0.15], got " + fmt_num(c.road_grade));
  require(c.vehicle_age >= 0.0, where, "vehicle_age",
          "must be >= 0, got " + fmt_num(c.vehicle_age));
  require(c.arrival_rate >= 0.0, where, "arrival_rate",
          "must be >= 0, got " + fmt_num(c.arrival_rate));
  require(c.av_penetration >= 0.0 && c.av_penetration <= 1.0, where,
          "av_penetration",
          "must be in [0, 1], got " + fmt_num(c.av_penetration));
}

std::int64_t ScenarioSpec::num_steps() const {
  return static_cast<std::int64_t>(std::llround(horizon / dt));
}

void validate(const ScenarioSpec& spec, std::string_view where) {
  validate(spec.context, std::string(where) + ".context");
  require(std::isfinite(spec.horizon) && spec.horizon > 0.0, where, "horizon",
          "must be > 0, got " + fmt_num(spec.horizon));
  require(std::isfinite(spec.dt) && spec.dt > 0.0, where, "dt",
          "must be > 0, got " + fmt_num(spec.dt));
  const double steps = spec.horizon / spec.dt;
  require(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps),
          where, "horizon", "horizon / dt must be a whole number of steps");
}

// ---------------------------------------------------------------------------
// Distributions

FieldDist FieldDist::fixed(double value) {
  FieldDist d;
  d.kind = Kind::kFixed;
  d.lo = d.hi = value;
  return d;
}

FieldDist FieldDist::range(double lo, double hi) {
  FieldDist d;
  d.kind = Kind::kRange;
  d.lo = lo;
  d.hi = hi;
  return d;
}

FieldDist FieldDist::choice(std::vector<double> choices,
                            std::vector<double> weights) {
  FieldDist d;
  d.kind = Kind::kChoice;
  d.choices = std::move(choices);
  d.weights = std::move(weights);
  if (!d.choices.empty()) {
    d.lo = *std::min_element(d.choices.begin(), d.choices.end());
    d.hi = *std::max_element(d.choices.begin(), d.choices.end());
  }
  return d;
}

double FieldDist::min() const { return lo; }
double FieldDist::max() const { return hi; }

double FieldDist::sample(Rng& rng) const {
  switch (kind) {
    case Kind::kFixed:
      return lo;
    case Kind::kRange:
      if (lo == hi) return lo;
      return lo + (hi - lo) * uniform01(rng);
    case Kind::kChoice:
      return choices[sample_index(weights, choices.size(), rng)];
  }
  return lo;
}

ContextDistribution ContextDistribution::point(const Context& c) {
  ContextDistribution d;
  d.signal_plans = {SignalPlan{c.green_duration, c.red_duration}};
  d.offset_fraction = FieldDist::fixed(c.signal_offset / c.cycle());
  d.speed_limit = FieldDist::fixed(c.speed_limit);
  d.lane_length = FieldDist::fixed(c.lane_length);
  d.road_grade = FieldDist::fixed(c.road_grade);
  d.vehicle_type = {{c.vehicle_type}, {}};
  d.engine_type = {{c.engine_type}, {}};
  d.vehicle_age = FieldDist::fixed(c.vehicle_age);
  d.arrival_rate = FieldDist::fixed(c.arrival_rate);
  d.av_penetration = FieldDist::fixed(c.av_penetration);
  return d;
}

void validate(const ContextDistribution& d) {
  auto field = [](const FieldDist& f, std::string_view name) {
    if (f.kind == FieldDist::Kind::kChoice) {
      require(!f.choices.empty(), "distribution", name,
              "choices must not be empty");
      validate_weights(f.weights, f.choices.size(), name);
    }
    require(std::isfinite(f.lo) && std::isfinite(f.hi) && f.lo <= f.hi,
            "distribution", name, "range must be finite with lo <= hi");
  };
  require(!d.signal_plans.empty(), "distribution", "signal_plans",
          "must not be empty");
  validate_weights(d.signal_plan_weights, d.signal_plans.size(),
                   "signal_plans");
  field(d.offset_fraction, "offset_fraction");
  require(d.offset_fraction.lo >= 0.0 && d.offset_fraction.hi < 1.0,
          "distribution", "offset_fraction", "must lie in [0, 1)");
  field(d.speed_limit, "speed_limit");
  field(d.lane_length, "lane_length");
  field(d.road_grade, "road_grade");
  field(d.vehicle_age, "vehicle_age");
  field(d.arrival_rate, "arrival_rate");
  field(d.av_penetration, "av_penetration");
  require(!d.vehicle_type.choices.empty(), "distribution", "vehicle_type",
          "choices must not be empty");
  validate_weights(d.vehicle_type.weights, d.vehicle_type.choices.size(),
                   "vehicle_type");
  require(!d.engine_type.choices.empty(), "distribution", "engine_type",
          "choices must not be empty");
  validate_weights(d.engine_type.weights, d.engine_type.choices.size(),
                   "engine_type");

  // Corner contexts must be valid; every other draw lies between them.
  for (const SignalPlan& plan : d.signal_plans) {
    Context c;
    c.green_duration = plan.green;
    c.red_duration = plan.red;
    for (double frac : {d.offset_fraction.lo, d.offset_fraction.hi}) {
      for (int corner = 0; corner < 2; ++corner) {
        auto pick = [&](const FieldDist& f) { return corner ? f.hi : f.lo; };
        c.signal_offset = frac * c.cycle();
        c.speed_limit = pick(d.speed_limit);
        c.lane_length = pick(d.lane_length);
        c.road_grade = pick(d.road_grade);
        c.vehicle_age = pick(d.vehicle_age);
        c.arrival_rate = pick(d.arrival_rate);
        c.av_penetration = pick(d.av_penetration);
        validate(c, "distribution");
      }
    }
  }
}

Context sample_context(const ContextDistribution& d, Rng& rng) {
  // Fixed draw order; reproducibility depends on it.
  Context c;
  const SignalPlan& plan =
      d.signal_plans[sample_index(d.signal_plan_weights, d.signal_plans.size(),
                                  rng)];
  c.green_duration = plan.green;
  c.red_duration = plan.red;
  c.signal_offset = d.offset_fraction.sample(rng) * c.cycle();
  if (c.signal_offset >= c.cycle()) c.signal_offset = 0.0;
  c.speed_limit = d.speed_limit.sample(rng);
  c.lane_length = d.lane_length.sample(rng);
  c.road_grade = d.road_grade.sample(rng);
  c.vehicle_type = d.vehicle_type.choices[sample_index(
      d.vehicle_type.weights, d.vehicle_type.choices.size(), rng)];
  c.engine_type = d.engine_type.choices[sample_index(
      d.engine_type.weights, d.engine_type.choices.size(), rng)];
  c.vehicle_age = d.vehicle_age.sample(rng);
  c.arrival_rate = d.arrival_rate.sample(rng);
  c.av_penetration = d.av_penetration.sample(rng);
  return c;
}

// ---------------------------------------------------------------------------
// Encoding

namespace {

std::array<double, kNumContextNumeric> numeric_fields(const Context& c) {
  return {c.green_duration, c.red_duration,  c.signal_offset,
          c.speed_limit,    c.lane_length,   c.road_grade,
          c.vehicle_age,    c.arrival_rate,  c.av_penetration};
}

constexpr std::array<std::string_view, kNumContextNumeric> kNumericNames = {
    "green_duration", "red_duration", "signal_offset",
    "speed_limit",    "lane_length",  "road_grade",
    "vehicle_age",    "arrival_rate", "av_penetration"};

}  // namespace

EncodingBounds EncodingBounds::from(const ContextDistribution& d) {
  EncodingBounds b;
  double gmin = d.signal_plans[0].green, gmax = gmin;
  double rmin = d.signal_plans[0].red, rmax = rmin;
  double cmax = 0.0;
  for (const SignalPlan& p : d.signal_plans) {
    gmin = std::min(gmin, p.green);
    gmax = std::max(gmax, p.green);
    rmin = std::min(rmin, p.red);
    rmax = std::max(rmax, p.red);
    cmax = std::max(cmax, p.green + p.red);
  }
  b.numeric[0] = {gmin, gmax};
  b.numeric[1] = {rmin, rmax};
  b.numeric[2] = {0.0, d.offset_fraction.hi * cmax};
  b.numeric[3] = {d.speed_limit.lo, d.speed_limit.hi};
  b.numeric[4] = {d.lane_length.lo, d.lane_length.hi};
  b.numeric[5] = {d.road_grade.lo, d.road_grade.hi};
  b.numeric[6] = {d.vehicle_age.lo, d.vehicle_age.hi};
  b.numeric[7] = {d.arrival_rate.lo, d.arrival_rate.hi};
  b.numeric[8] = {d.av_penetration.lo, d.av_penetration.hi};
  return b;
}

EncodingBounds EncodingBounds::from(const std::vector<ScenarioSpec>& specs) {
  if (specs.empty()) {
    throw Error("validation", "cannot derive encoding bounds from no scenarios");
  }
  EncodingBounds b;
  const auto first = numeric_fields(specs.front().context);
  for (int i = 0; i < kNumContextNumeric; ++i) b.numeric[i] = {first[i], first[i]};
  for (const ScenarioSpec& s : specs) {
    const auto v = numeric_fields(s.context);
    for (int i = 0; i < kNumContextNumeric; ++i) {
      b.numeric[i].lo = std::min(b.numeric[i].lo, v[i]);
      b.numeric[i].hi = std::max(b.numeric[i].hi, v[i]);
    }
  }
  return b;
}

ContextVector encode_context(const Context& c, const EncodingBounds& bounds) {
  ContextVector out{};
  const auto v = numeric_fields(c);
  for (int i = 0; i < kNumContextNumeric; ++i) {
    const Bounds& b = bounds.numeric[i];
    const double tol = 1e-9 * std::max({1.0, std::abs(b.lo), std::abs(b.hi)});
    if (!(v[i] >= b.lo - tol && v[i] <= b.hi + tol)) {
      throw Error("encoding", std::string(kNumericNames[i]) + " = " +
                                  fmt_num(v[i]) + " outside bound [" +
                                  fmt_num(b.lo) + ", " + fmt_num(b.hi) + "]");
    }
    const double span = b.hi - b.lo;
    out[i] = span > 0.0 ? std::clamp((v[i] - b.lo) / span, 0.0, 1.0) : 0.0;
  }
  out[kNumContextNumeric + static_cast<int>(c.vehicle_type)] = 1.0;
  out[kNumContextNumeric + kNumVehicleTypes + static_cast<int>(c.engine_type)] =
      1.0;
  return out;
}

// ---------------------------------------------------------------------------
// File format

namespace {

class Reader {
 public:
  Reader(const json& node, std::string path) : node_(node), path_(std::move(path)) {}

  const json& node() const { return node_; }
  const std::string& path() const { return path_; }

  bool has(std::string_view key) const {
    return node_.is_object() && node_.contains(key);
  }

  Reader child(std::string_view key) const {
    if (!has(key)) fail(key, "missing required field");
    return Reader(node_.at(std::string(key)), path_ + "." + std::string(key));
  }

  double number(std::string_view key) const {
    const Reader r = child(key);
    if (!r.node_.is_number()) fail(key, "expected a number");
    return r.node_.get<double>();
  }

  double number_or(std::string_view key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }

  std::string string(std::string_view key) const {
    const Reader r = child(key);
    if (!r.node_.is_string()) fail(key, "expected a string");
    return r.node_.get<std::string>();
  }

  std::uint64_t u64(std::string_view key) const {
    const Reader r = child(key);
    if (!r.node_.is_number_unsigned() && !(r.node_.is_number_integer() &&
                                           r.node_.get<std::int64_t>() >= 0)) {
      fail(key, "expected a non-negative integer");
    }
    return r.node_.get<std::uint64_t>();
  }

  [[noreturn]] void fail(std::string_view key, const std::string& what) const {
    throw Error("schema", path_ + "." + std::string(key) + ": " + what);
  }

 private:
  const json& node_;
  std::string path_;
};

Context read_context(const Reader& r) {
  if (!r.node().is_object()) {
    throw Error("schema", r.path() + ": expected an object");
  }
  static const std::vector<std::string> kKnown = {
      "green_duration", "red_duration",  "signal_offset", "speed_limit",
      "lane_length",    "road_grade",    "vehicle_type",  "engine_type",
      "vehicle_age",    "arrival_rate",  "av_penetration"};
  for (const auto& [key, value] : r.node().items()) {
    if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
      throw Error("schema", r.path() + "." + key + ": unknown field");
    }
  }
  Context c;
  c.green_duration = r.number("green_duration");
  c.red_duration = r.number("red_duration");
  c.signal_offset = r.number_or("signal_offset", 0.0);
  c.speed_limit = r.number("speed_limit");
  c.lane_length = r.number("lane_length");
  c.road_grade = r.number_or("road_grade", 0.0);
  try {
    c.vehicle_type = r.has("vehicle_type")
                         ? parse_vehicle_type(r.string("vehicle_type"))
                         : VehicleType::kSedan;
    c.engine_type = r.has("engine_type")
                        ? parse_engine_type(r.string("engine_type"))
                        : EngineType::kIce;
  } catch (const Error& e) {
    if (e.kind() == "schema") throw;
    throw Error("validation", r.path() + ": " + e.what());
  }
  c.vehicle_age = r.number_or("vehicle_age", 0.0);
  c.arrival_rate = r.number("arrival_rate");
  c.av_penetration = r.number("av_penetration");
  validate(c, r.path());
  return c;
}

FieldDist read_field(const Reader& parent, std::string_view key,
                     FieldDist fallback) {
  if (!parent.has(key)) return fallback;
  const Reader r = parent.child(key);
  const json& n = r.node();
  if (n.is_number()) return FieldDist::fixed(n.get<double>());
  if (n.is_object() && n.contains("range")) {
    const json& range = n.at("range");
    if (!range.is_array() || range.size() != 2 || !range[0].is_number() ||
        !range[1].is_number()) {
      parent.fail(key, "range must be [lo, hi]");
    }
    return FieldDist::range(range[0].get<double>(), range[1].get<double>());
  }
  if (n.is_object() && n.contains("choices")) {
    std::vector<double> choices, weights;
    try {
      choices = n.at("choices").get<std::vector<double>>();
      if (n.contains("weights")) {
        weights = n.at("weights").get<std::vector<double>>();
      }
    } catch (const json::exception&) {
      parent.fail(key, "choices and weights must be arrays of numbers");
    }
    if (choices.empty()) parent.fail(key, "choices must not be empty");
    return FieldDist::choice(std::move(choices), std::move(weights));
  }
  parent.fail(key, "expected a number, {\"range\": [lo, hi]} or "
                   "{\"choices\": [...], \"weights\": [...]}");
}

template <typename T, typename Parse>
CategoricalDist<T> read_categorical(const Reader& parent, std::string_view key,
                                    CategoricalDist<T> fallback, Parse parse) {
  if (!parent.has(key)) return fallback;
  const json& n = parent.child(key).node();
  CategoricalDist<T> out;
  try {
    if (n.is_string()) {
      out.choices = {parse(n.get<std::string>())};
      return out;
    }
    if (n.is_object() && n.contains("choices")) {
      for (const auto& name : n.at("choices")) {
        out.choices.push_back(parse(name.get<std::string>()));
      }
      if (n.contains("weights")) {
        out.weights = n.at("weights").get<std::vector<double>>();
      }
      if (out.choices.empty()) parent.fail(key, "choices must not be empty");
      return out;
    }
  } catch (const json::exception&) {
    parent.fail(key, "choices must be an array of names");
  } catch (const Error& e) {
    if (e.kind() == "schema") throw;
    parent.fail(key, e.what());
  }
  parent.fail(key, "expected a name or {\"choices\": [...]}");
}

TrainingDistribution read_distribution(const Reader& r) {
  TrainingDistribution t;
  t.horizon = r.number_or("horizon", t.horizon);
  t.dt = r.number_or("dt", t.dt);
  ContextDistribution& d = t.contexts;
  if (r.has("signal_plans")) {
    const Reader plans = r.child("signal_plans");
    if (!plans.node().is_array() || plans.node().empty()) {
      r.fail("signal_plans", "expected a non-empty array");
    }
    d.signal_plans.clear();
    for (std::size_t i = 0; i < plans.node().size(); ++i) {
      const Reader p(plans.node()[i], plans.path() + "[" + std::to_string(i) + "]");
      d.signal_plans.push_back({p.number("green"), p.number("red")});
      if (p.has("weight")) d.signal_plan_weights.push_back(p.number("weight"));
    }
    if (!d.signal_plan_weights.empty() &&
        d.signal_plan_weights.size() != d.signal_plans.size()) {
      r.fail("signal_plans", "either every plan or no plan carries a weight");
    }
  }
  d.offset_fraction = read_field(r, "offset_fraction", d.offset_fraction);
  d.speed_limit = read_field(r, "speed_limit", d.speed_limit);
  d.lane_length = read_field(r, "lane_length", d.lane_length);
  d.road_grade = read_field(r, "road_grade", d.road_grade);
  d.vehicle_type = read_categorical(r, "vehicle_type", d.vehicle_type,
                                    parse_vehicle_type);
  d.engine_type =
      read_categorical(r, "engine_type", d.engine_type, parse_engine_type);
  d.vehicle_age = read_field(r, "vehicle_age", d.vehicle_age);
  d.arrival_rate = read_field(r, "arrival_rate", d.arrival_rate);
  d.av_penetration = read_field(r, "av_penetration", d.av_penetration);
  validate(d);
  ScenarioSpec probe;
  probe.horizon = t.horizon;
  probe.dt = t.dt;
  validate(probe, r.path());
  return t;
}

json field_json(const FieldDist& f) {
  switch (f.kind) {
    case FieldDist::Kind::kFixed:
      return f.lo;
    case FieldDist::Kind::kRange:
      return json{{"range", {f.lo, f.hi}}};
    case FieldDist::Kind::kChoice: {
      json j{{"choices", f.choices}};
      if (!f.weights.empty()) j["weights"] = f.weights;
      return j;
    }
  }
  return nullptr;
}

template <typename T>
json categorical_json(const CategoricalDist<T>& d) {
  json names = json::array();
  for (T v : d.choices) names.push_back(std::string(to_string(v)));
  json j{{"choices", names}};
  if (!d.weights.empty()) j["weights"] = d.weights;
  return j;
}

}  // namespace

ScenarioFile parse_scenario_file(std::string_view text) {
  ScenarioFile file;
  if (std::all_of(text.begin(), text.end(),
                  [](unsigned char ch) { return std::isspace(ch); })) {
    return file;
  }
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error("parse", e.what());
  }
  const Reader r(root, "$");
  if (!root.is_object()) throw Error("schema", "$: expected an object");
  if (!r.has("schema_version")) {
    r.fail("schema_version", "missing required field");
  }
  const double version = r.number("schema_version");
  if (version != kScenarioSchemaVersion) {
    r.fail("schema_version", "unsupported version " + fmt_num(version) +
                                 " (expected " +
                                 std::to_string(kScenarioSchemaVersion) + ")");
  }
  if (r.has("scenarios")) {
    const Reader list = r.child("scenarios");
    if (!list.node().is_array()) r.fail("scenarios", "expected an array");
    for (std::size_t i = 0; i < list.node().size(); ++i) {
      const Reader s(list.node()[i], "$.scenarios[" + std::to_string(i) + "]");
      if (!s.node().is_object()) {
        throw Error("schema", s.path() + ": expected an object");
      }
      ScenarioSpec spec;
      spec.name = s.has("name") ? s.string("name") : "scenario_" + std::to_string(i);
      spec.seed = s.u64("seed");
      spec.horizon = s.number("horizon");
      spec.dt = s.number_or("dt", 0.1);
      spec.context = read_context(s.child("context"));
      validate(spec, s.path());
      file.scenarios.push_back(std::move(spec));
    }
  }
  if (r.has("distribution")) {
    file.distribution = read_distribution(r.child("distribution"));
  }
  return file;
}

ScenarioFile load_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open scenario file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_scenario_file(buf.str());
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<ScenarioSpec> load_scenarios(const std::filesystem::path& path) {
  return load_scenario_file(path).scenarios;
}

std::string serialize_scenario_file(const ScenarioFile& file) {
  json root;
  root["schema_version"] = kScenarioSchemaVersion;
  json list = json::array();
  for (const ScenarioSpec& s : file.scenarios) {
    const Context& c = s.context;
    list.push_back(json{
        {"name", s.name},
        {"seed", s.seed},
        {"horizon", s.horizon},
        {"dt", s.dt},
        {"context",
         {{"green_duration", c.green_duration},
          {"red_duration", c.red_duration},
          {"signal_offset", c.signal_offset},
          {"speed_limit", c.speed_limit},
          {"lane_length", c.lane_length},
          {"road_grade", c.road_grade},
          {"vehicle_type", std::string(to_string(c.vehicle_type))},
          {"engine_type", std::string(to_string(c.engine_type))},
          {"vehicle_age", c.vehicle_age},
          {"arrival_rate", c.arrival_rate},
          {"av_penetration", c.av_penetration}}}});
  }
  root["scenarios"] = list;
  if (file.distribution) {
    const TrainingDistribution& t = *file.distribution;
    const ContextDistribution& d = t.contexts;
    json plans = json::array();
    for (std::size_t i = 0; i < d.signal_plans.size(); ++i) {
      json p{{"green", d.signal_plans[i].green}, {"red", d.signal_plans[i].red}};
      if (!d.signal_plan_weights.empty()) p["weight"] = d.signal_plan_weights[i];
      plans.push_back(p);
    }
    root["distribution"] = json{
        {"horizon", t.horizon},
        {"dt", t.dt},
        {"signal_plans", plans},
        {"offset_fraction", field_json(d.offset_fraction)},
        {"speed_limit", field_json(d.speed_limit)},
        {"lane_length", field_json(d.lane_length)},
        {"road_grade", field_json(d.road_grade)},
        {"vehicle_type", categorical_json(d.vehicle_type)},
        {"engine_type", categorical_json(d.engine_type)},
        {"vehicle_age", field_json(d.vehicle_age)},
        {"arrival_rate", field_json(d.arrival_rate)},
        {"av_penetration", field_json(d.av_penetration)}};
  }
  return root.dump(2) + "\n";
}

void override_penetration(ScenarioFile& file, double penetration) {
  if (!(penetration >= 0.0 && penetration <= 1.0)) {
    throw Error("validation", "--penetration-override: must be in [0, 1]");
  }
  for (ScenarioSpec& s : file.scenarios) s.context.av_penetration = penetration;
  if (file.distribution) {
    file.distribution->contexts.av_penetration = FieldDist::fixed(penetration);
  }
}

}  // namespace ecolane
