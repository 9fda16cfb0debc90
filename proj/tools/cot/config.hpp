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

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "cot/constraints.hpp"
#include "cot/measures.hpp"
#include "cot/numeric_solver.hpp"
#include "cot/pricing.hpp"

namespace cot::cli {

struct PriorConfig {
  std::optional<PriorSpec> spec;
  std::optional<std::string> samples_path;
  std::size_t n = 2000;  // sample count when drawing from spec
};

struct ConstraintConfig {
  ConstraintKind kind;
  std::optional<double> fbar;
  std::optional<PriorSpec> surrogate;
  double lambda = 1.0;
};

struct PricingConfig {
  std::vector<LabeledOption> options;
  std::optional<PriorSpec> surrogate;
  double penalty = 1000.0;
  std::optional<BarrierConfig> smoothing;
  std::size_t kl_samples = 0;  // 0: same as the prior sample count
};

struct RunConfig {
  PriorConfig prior;
  std::vector<ConstraintConfig> constraints;
  SolverConfig solver;
  std::string method = "numeric";  // analytic | numeric | kl | all
  std::optional<PricingConfig> pricing;
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  double residual_rtol = 0.02;
  double residual_atol = 1e-3;
  std::optional<double> kl_y_max;
  nlohmann::json echo;  // the config as read
};

PriorSpec prior_spec_from_json(const nlohmann::json& j,
                               const std::string& path = "prior.spec");
nlohmann::json to_json(const PriorSpec& spec);

// Throws ConfigError naming the offending key path.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

// fbar given directly or E[f] under the surrogate. Requires nothing else.
std::vector<ConstraintSpec> resolve_constraints(const RunConfig& cfg);

}  // namespace cot::cli
