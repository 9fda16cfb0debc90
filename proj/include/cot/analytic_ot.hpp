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
#include <functional>
#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cot/constraints.hpp"
#include "cot/measures.hpp"

namespace cot {

struct Identity {};
struct ConstantShift {
  double lambda = 0.0;
};
struct ProjectTo {
  double w = 0.0;
};
using ShiftAction = std::variant<Identity, ConstantShift, ProjectTo>;

// Acts on x in [lo, hi). The first piece may start at -inf and the last may
// end at +inf.
struct ShiftPiece {
  double lo;
  double hi;
  ShiftAction action;
};

double apply(const ShiftAction& a, double x);

class ShiftMap {
 public:
  ShiftMap() = default;
  // Drops empty pieces, turns zero shifts into Identity and merges equal
  // neighbours. Pieces must be sorted and non-overlapping.
  explicit ShiftMap(std::vector<ShiftPiece> pieces);

  double operator()(double x) const;
  const std::vector<ShiftPiece>& pieces() const { return pieces_; }
  bool covers(double lo, double hi) const;
  bool is_monotone() const;

 private:
  std::vector<ShiftPiece> pieces_;
};

struct Atom {
  double loc;
  double mass;
};

// Source prior restricted to [lo, hi) and translated by shift.
struct ContinuousPiece {
  double lo;
  double hi;
  double shift;
};

class MixedMeasure {
 public:
  MixedMeasure(const PriorSpec& prior, std::vector<ContinuousPiece> continuous,
               std::vector<Atom> atoms);

  static MixedMeasure from_map(const ShiftMap& map, const PriorSpec& prior);

  const PriorSpec& prior() const { return prior_.spec(); }
  const std::vector<ContinuousPiece>& continuous() const { return continuous_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  double total_mass() const;
  double expectation(const std::function<double(double)>& f) const;
  // Density of the continuous part (zero for discrete priors).
  double density(double y) const;
  double cdf(double y) const;
  EmpiricalMeasure sample(std::size_t n, std::uint64_t seed) const;

 private:
  Prior1D prior_;
  std::vector<ContinuousPiece> continuous_;
  std::vector<Atom> atoms_;
};

struct IndicatorSolution {
  ShiftMap map;
  MixedMeasure measure;
  double c_a;
  double c_b;
  double cost;
};

IndicatorSolution solve_indicator_interval(const PriorSpec& prior, double a,
                                           double b);

struct ReluSingleSolution {
  double lambda;
  double x_star;
  int system;  // 1: threshold omega - lambda, 2: threshold omega - lambda/2
  ShiftMap map;
  MixedMeasure measure;
  double cost;
};

ReluSingleSolution solve_relu_single(const PriorSpec& prior, double omega,
                                     double fbar);

struct ReluRecursionState {
  int k;               // 0-based stage index
  double x_next;       // threshold of stage k+1 (its lower end)
  double lambda_next;  // shift of stage k+1
  double delta_omega;
  double delta_ftilde;
};

struct ReluMultiSolution {
  std::vector<double> lambdas;     // one shift per stage
  std::vector<double> thresholds;  // lower end of each stage
  ShiftMap map;
  MixedMeasure measure;
  double cost;
  std::string route;  // "recursion" or "joint"
  std::vector<double> residuals;
  std::vector<ReluRecursionState> states;
  double recursion_cost;  // +inf when the recursion found no candidate
  double joint_cost;      // +inf when the joint solve failed
};

ReluMultiSolution solve_relu_multi(const PriorSpec& prior,
                                   std::span<const double> omegas,
                                   std::span<const double> fbars);

// Exact stage-wise recursion only. Throws InfeasibleTargets(k).
ReluMultiSolution solve_relu_recursion(const PriorSpec& prior,
                                       std::span<const double> omegas,
                                       std::span<const double> fbars);

// Quadrature of (T(x) - x)^2 against the prior.
double transport_cost(const ShiftMap& map, const PriorSpec& prior);
EmpiricalMeasure pushforward(const ShiftMap& map, const EmpiricalMeasure& m);

// Closed-form partial moments of the pushforward.
double relu_expectation(const ShiftMap& map, const Prior1D& prior,
                        double omega);
double exact_cost(const ShiftMap& map, const Prior1D& prior);

enum class Region2D { Disk, Halfplane };

struct RegionProjection {
  Region2D region;
  double radius;  // disk radius or half-plane threshold
  std::array<double, 2> operator()(std::array<double, 2> z) const;
  bool inside(std::array<double, 2> z) const;
};

// Prior restricted to the region plus its outside mass projected onto the
// boundary. The boundary density is evaluated on demand.
struct RegionSolution {
  Gaussian2D prior;
  RegionProjection map;
  double alpha;
  double cost;
  // Disk: angular density in theta. Half-plane: density in z2.
  double boundary_density(double t) const;
  EmpiricalMeasure pushforward(const EmpiricalMeasure& m) const;
};

RegionSolution solve_indicator_disk(const PriorSpec& prior, double radius);
RegionSolution solve_indicator_halfplane(const PriorSpec& prior,
                                         double threshold);

struct OracleResult {
  double cost;
  std::vector<std::size_t> assignment;  // grid index per atom
  std::vector<double> multipliers;  // NaN where the target pins the grid
};

// Grid-restricted Kantorovich problem solved through its Lagrangian dual.
OracleResult brute_force_oracle(std::span<const double> atoms,
                                std::span<const double> weights,
                                std::span<const double> grid,
                                std::span<const ConstraintSpec> constraints);

nlohmann::json to_json(const ShiftMap& map);
nlohmann::json to_json(const ShiftMap& map, const MixedMeasure& measure,
                       double cost);
nlohmann::json to_json(const RegionSolution& s);

}  // namespace cot
