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
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cot/error.hpp"

namespace cot {

struct Lognormal {
  double mu = 0.0;
  double sigma = 1.0;
};

struct Normal1D {
  double mu = 0.0;
  double sigma = 1.0;
};

struct Gaussian2D {
  std::array<double, 2> mean{0.0, 0.0};
  // Row-major 2x2 covariance.
  std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};
};

struct UniformDisk {
  double radius = 1.0;
};

// Finitely supported 1D prior. Weights are normalized on validation.
struct Discrete1D {
  std::vector<double> atoms;
  std::vector<double> weights;
};

using PriorSpec =
    std::variant<Lognormal, Normal1D, Gaussian2D, UniformDisk, Discrete1D>;

int dimension(const PriorSpec& spec);
// Throws InvalidSpec on non-positive scales, non-SPD covariance, bad atoms.
void validate(const PriorSpec& spec);
std::string describe(const PriorSpec& spec);

// Platform-independent stream: mt19937_64 with explicit conversions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  // Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

class EmpiricalMeasure {
 public:
  EmpiricalMeasure() = default;
  // points is row-major n x dim. Empty weights means uniform 1/n.
  EmpiricalMeasure(int dim, std::vector<double> points,
                   std::vector<double> weights = {}, std::uint64_t seed = 0,
                   std::string origin = "");

  int dim() const { return dim_; }
  std::size_t size() const { return dim_ ? points_.size() / dim_ : 0; }
  bool empty() const { return size() == 0; }

  std::span<const double> point(std::size_t i) const {
    return {points_.data() + i * dim_, static_cast<std::size_t>(dim_)};
  }
  double coord(std::size_t i, int k) const { return points_[i * dim_ + k]; }
  const std::vector<double>& points() const { return points_; }
  std::vector<double>& mutable_points() { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::uint64_t seed() const { return seed_; }
  const std::string& origin() const { return origin_; }

 private:
  int dim_ = 1;
  std::vector<double> points_;
  std::vector<double> weights_;
  std::uint64_t seed_ = 0;
  std::string origin_;
};

EmpiricalMeasure sample(const PriorSpec& spec, std::size_t n,
                        std::uint64_t seed);

double pdf(const PriorSpec& spec, std::span<const double> point);
double pdf(const PriorSpec& spec, double x);
double cdf(const PriorSpec& spec, double x);
// E[X 1{X >= a}] for a lognormal; the full mean when a <= 0.
double partial_expectation(const Lognormal& ln, double a);
// P(X >= a) for a lognormal.
double tail_probability(const Lognormal& ln, double a);

struct KdeModel {
  int dim = 1;
  std::vector<double> centers;  // row-major
  std::vector<double> weights;
  double bandwidth = 0.0;
};

// Silverman rule h = s * (4 / ((d + 2) n))^(1 / (d + 4)) with s the mean of
// the per-coordinate sample standard deviations.
double kde_bandwidth(const EmpiricalMeasure& m);
KdeModel make_kde(const EmpiricalMeasure& m, double bandwidth = 0.0);
double kde_density(const KdeModel& model, std::span<const double> point);

double empirical_expectation(
    const EmpiricalMeasure& m,
    const std::function<double(std::span<const double>)>& f);

void write_csv(std::ostream& os, const EmpiricalMeasure& m);
void write_csv(const std::string& path, const EmpiricalMeasure& m);
EmpiricalMeasure read_csv(std::istream& is, const std::string& origin = "");
EmpiricalMeasure read_csv(const std::string& path);

// 1D prior with closed-form partial moments on [a, b]. Discrete atoms are
// spread uniformly over a cell of half-width smear() so thresholds can split
// them; the extra transport cost is O(smear^2).
class Prior1D {
 public:
  explicit Prior1D(const PriorSpec& spec);

  const PriorSpec& spec() const { return spec_; }
  bool is_discrete() const { return !atoms_.empty(); }
  double smear() const { return smear_; }

  double pdf(double x) const;
  double cdf(double x) const;
  double sf(double x) const;
  double quantile(double p) const;
  double support_lo() const;
  double support_hi() const;

  // Integral of x^k over [a, b], k = 0, 1, 2. Limits may be infinite.
  double moment(int k, double a, double b) const;
  double mass(double a, double b) const { return moment(0, a, b); }
  double mean() const;
  // E[(X - w)_+].
  double call(double w) const;

  // Atom locations and weights for discrete priors.
  const std::vector<double>& atoms() const { return atoms_; }
  const std::vector<double>& atom_weights() const { return weights_; }

 private:
  double discrete_moment(int k, double a, double b) const;

  PriorSpec spec_;
  std::vector<double> atoms_, weights_;
  std::vector<double> prefix_[3];
  double smear_ = 0.0;
};

}  // namespace cot
