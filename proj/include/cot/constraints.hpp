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

#include <array>
#include <span>
#include <variant>

#include <nlohmann/json_fwd.hpp>

#include "cot/measures.hpp"

namespace cot {

struct Relu {
  double omega = 0.0;
};

// 1 outside the closed interval [a, b].
struct IndicatorOutsideInterval {
  double a = 0.0;
  double b = 0.0;
};

// 1 outside the closed disk of the given radius centred at the origin.
struct IndicatorOutsideDisk {
  double radius = 1.0;
};

// 1 outside the closed half-plane {z1 >= threshold}.
struct IndicatorOutsideHalfplane {
  double threshold = 0.0;
};

// 1{y >= x0}.
struct Heaviside {
  double x0 = 0.0;
};

using ConstraintKind = std::variant<Relu, IndicatorOutsideInterval,
                                    IndicatorOutsideDisk,
                                    IndicatorOutsideHalfplane, Heaviside>;

struct ConstraintSpec {
  ConstraintKind kind;
  double fbar = 0.0;
  double lambda = 1.0;  // penalty weight in the numeric solver
};

int dimension(const ConstraintKind& kind);
void validate(const ConstraintSpec& spec);

double evaluate(const ConstraintKind& kind, std::span<const double> y);
double evaluate(const ConstraintKind& kind, double y);

// Smooth surrogate and its gradient. grad must have the point's dimension.
// eps == 0 falls back to the exact function with zero gradient.
double mollified(const ConstraintKind& kind, double eps,
                 std::span<const double> y, std::span<double> grad);
double mollified(const ConstraintKind& kind, double eps, double y,
                 double* grad = nullptr);

// E_m[f^eps] - fbar; eps == 0 uses the exact function.
double residual(const ConstraintSpec& spec, const EmpiricalMeasure& m,
                double eps = 0.0);

// Expected constraint value under a surrogate prior, closed form where
// available.
double target_from_surrogate(const ConstraintKind& kind,
                             const PriorSpec& surrogate);

// {"kind": "relu", "omega": ...} and friends. Unknown kinds or keys throw
// ConfigError naming the key.
nlohmann::json to_json(const ConstraintKind& kind);
ConstraintKind constraint_kind_from_json(const nlohmann::json& j);

}  // namespace cot
