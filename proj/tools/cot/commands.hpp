// Copyright 2026-present the cot project
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

#pragma once

#include <optional>
#include <string>

namespace cot::cli {

enum ExitCode { kOk = 0, kError = 1, kWarning = 2 };

struct Invocation {
  std::string command;  // estimate, analytic, kl, price, compare, gen-samples
  std::string config_path;
  std::optional<int> threads;
  std::optional<std::string> out;
};

// Never throws; reports failures on stderr as one JSON line.
int run(const Invocation& inv);

}  // namespace cot::cli
