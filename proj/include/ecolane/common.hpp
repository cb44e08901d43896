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

#ifndef ECOLANE_COMMON_HPP_
#define ECOLANE_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecolane {

// Every failure surfaced by the library is an Error carrying a short,
// stable kind tag ("parse", "validation", "dimension", ...). The CLI prints
// it as a single "error: <kind>: <message>" line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

// Caller-owned random generator. No global RNG state anywhere.
using Rng = std::mt19937_64;

// Mixes a base seed with a stream index so that sub-streams (workers,
// iterations, evaluation seeds) are decorrelated but reproducible.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

// Uniform real in [0, 1).
double uniform01(Rng& rng);

// Standard normal variate.
double standard_normal(Rng& rng);

// Lowercase hex SHA-256 of the given bytes.
std::string sha256_hex(std::string_view bytes);

// Library version recorded in manifests and exported headers.
inline constexpr std::string_view kVersion = "1.0.0";

// Verbosity is read once from ECOLANE_LOG (error|warn|info|debug).
void init_logging();
void log_info(const std::string& message);
void log_debug(const std::string& message);
void log_warn(const std::string& message);

}  // namespace ecolane

#endif  // ECOLANE_COMMON_HPP_
