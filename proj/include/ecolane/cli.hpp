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

// Command-line front end: train, eval, simulate, compare, export.
// Failures print one line "error: <kind>: <message>" and exit non-zero.

#ifndef ECOLANE_CLI_HPP_
#define ECOLANE_CLI_HPP_

#include <iosfwd>

namespace ecolane {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitUsage = 2;

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ecolane

#endif  // ECOLANE_CLI_HPP_
