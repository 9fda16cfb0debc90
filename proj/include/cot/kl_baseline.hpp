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

#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "cot/measures.hpp"

namespace cot {

// Prior conditioned on [a, b].
struct KlIndicator {
  double a;
  double b;
  double mass;
};

// Prior times exp(sum_k lambda_k (y - omega_k)_+) on [lo, y_max].
struct KlRelu {
  std::vector<double> omegas;
  std::vector<double> lambdas;
  std::vector<double> targets;
  double log_z;  // log of the normalising constant
  double lo;
  double y_max;
};

class KlSolution {
 public:
  KlSolution(const PriorSpec& prior, std::variant<KlIndicator, KlRelu> tilt);

  const PriorSpec& prior() const { return prior_.spec(); }
  const std::variant<KlIndicator, KlRelu>& tilt() const { return tilt_; }
  double lo() const;
  double hi() const;
  double z() const;

  double density(double y) const;
  // Quadrature split at the tilt's kinks and at the extra cut points.
  double expectation(const std::function<double(double)>& f,
                     std::vector<double> cuts = {}) const;
  // E[(y - omega_k)_+] - target_k with a finer rule than the solver's.
  std::vector<double> residuals() const;

 private:
  Prior1D prior_;
  std::variant<KlIndicator, KlRelu> tilt_;
};

KlSolution kl_indicator(const PriorSpec& prior, double a, double b);
KlSolution kl_relu_single(const PriorSpec& prior, double omega, double fbar,
                          std::optional<double> y_max = std::nullopt);
KlSolution kl_relu_multi(const PriorSpec& prior, std::span<const double> omegas,
                         std::span<const double> fbars,
                         std::optional<double> y_max = std::nullopt);

// Prior quantile at 1 - 1e-9, the default truncation point.
double kl_default_ymax(const PriorSpec& prior);

double kl_density(const KlSolution& s, double y);
EmpiricalMeasure kl_sample(const KlSolution& s, std::size_t n,
                           std::uint64_t seed);

nlohmann::json to_json(const KlSolution& s);

}  // namespace cot
