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

#include "ecolane/emission.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace ecolane {

const EmissionModel& EmissionModel::defaults() {
  static const EmissionModel model;
  return model;
}

double EmissionModel::factor(const Context& c) const {
  return type_factor[static_cast<int>(c.vehicle_type)] *
         engine_factor[static_cast<int>(c.engine_type)] *
         (1.0 + age_slope * c.vehicle_age);
}

double EmissionModel::idle_floor(const Context& c) const {
  return factor(c) * idle;
}

double EmissionModel::power(double v, double a, double grade) const {
  return v * (a + gravity * grade + roll + aero * v * v);
}

double EmissionModel::rate(double v, double a, const Context& c) const {
  const double p = std::max(0.0, power(v, a, c.road_grade));
  return factor(c) *
         (idle + k_power * p + k_power2 * p * p + k_accel * std::max(0.0, a));
}

double emission_rate(double v, double a, const Context& c) {
  return EmissionModel::defaults().rate(v, a, c);
}

namespace {

constexpr const char* kHeader = "# ecolane emission coefficients";

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

std::string serialize_emission_table(const EmissionModel& m) {
  std::ostringstream os;
  os << kHeader << " v" << m.version << "\n";
  os << "key\tvalue\n";
  os << "idle\t" << num(m.idle) << "\n";
  os << "k_power\t" << num(m.k_power) << "\n";
  os << "k_power2\t" << num(m.k_power2) << "\n";
  os << "k_accel\t" << num(m.k_accel) << "\n";
  os << "gravity\t" << num(m.gravity) << "\n";
  os << "roll\t" << num(m.roll) << "\n";
  os << "aero\t" << num(m.aero) << "\n";
  os << "type_sedan\t" << num(m.type_factor[0]) << "\n";
  os << "type_suv\t" << num(m.type_factor[1]) << "\n";
  os << "type_truck\t" << num(m.type_factor[2]) << "\n";
  os << "engine_ice\t" << num(m.engine_factor[0]) << "\n";
  os << "engine_hybrid\t" << num(m.engine_factor[1]) << "\n";
  os << "age_slope\t" << num(m.age_slope) << "\n";
  return os.str();
}

EmissionModel load_emission_table(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open emission table " + path.string());
  std::string line;
  std::getline(in, line);
  const std::string prefix = std::string(kHeader) + " v";
  if (line.rfind(prefix, 0) != 0) {
    throw Error("parse", path.string() + ":1: missing emission table header");
  }
  EmissionModel m;
  m.version = std::stoi(line.substr(prefix.size()));
  if (m.version != 1) {
    throw Error("parse", path.string() + ": unsupported table version " +
                             std::to_string(m.version));
  }
  std::map<std::string, double*> slots = {
      {"idle", &m.idle},
      {"k_power", &m.k_power},
      {"k_power2", &m.k_power2},
      {"k_accel", &m.k_accel},
      {"gravity", &m.gravity},
      {"roll", &m.roll},
      {"aero", &m.aero},
      {"type_sedan", &m.type_factor[0]},
      {"type_suv", &m.type_factor[1]},
      {"type_truck", &m.type_factor[2]},
      {"engine_ice", &m.engine_factor[0]},
      {"engine_hybrid", &m.engine_factor[1]},
      {"age_slope", &m.age_slope}};
  std::map<std::string, bool> seen;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#' || line == "key\tvalue") continue;
    std::istringstream fields(line);
    std::string key;
    double value = 0.0;
    if (!(fields >> key >> value)) {
      throw Error("parse", path.string() + ":" + std::to_string(lineno) +
                               ": expected '<key>\\t<value>'");
    }
    auto it = slots.find(key);
    if (it == slots.end()) {
      throw Error("parse", path.string() + ":" + std::to_string(lineno) +
                               ": unknown coefficient '" + key + "'");
    }
    *it->second = value;
    seen[key] = true;
  }
  for (const auto& [key, slot] : slots) {
    if (!seen.count(key)) {
      throw Error("parse", path.string() + ": missing coefficient '" + key + "'");
    }
  }
  if (m.idle <= 0.0) throw Error("validation", "idle must be > 0");
  return m;
}

}  // namespace ecolane
