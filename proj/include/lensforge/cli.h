// Copyright 2026 The Lensforge Authors.
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


// Command-line front end. Exit codes: 0 success, 1 runtime failure or a
// failed batch line, 2 invalid arguments, 3 model load failure, 4 the
// serve address cannot be bound. Errors are one line on stderr starting
// with "error:".

#ifndef LENSFORGE_CLI_H_
#define LENSFORGE_CLI_H_

#include <ostream>
#include <string>
#include <vector>

namespace lensforge {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitLoad = 3;
inline constexpr int kExitBind = 4;

// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lensforge

#endif  // LENSFORGE_CLI_H_
