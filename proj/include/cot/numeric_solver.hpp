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
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "cot/constraints.hpp"
#include "cot/kernels.hpp"
#include "cot/measures.hpp"

namespace cot {

// Complement of the domain D over which the gap barrier integrates 1/density.
// Must be one of the "outside" indicator kinds.
using BarrierDomain = ConstraintKind;

struct BarrierConfig {
  double lambda_delta = 1.0;
  double lambda_0 = 1.0;
  double t = 1.0;
  std::optional<double> M_delta;  // default 2x the initial KDE energy
  std::optional<double> M_0;      // default 2x the initial gap functional
  std::optional<BarrierDomain> domain;  // default: central 98% of x (1D)
  std::optional<double> phi_eps;        // default: bandwidth
  // Raise M to 1.05x the measured value when y = x is not strictly feasible.
  bool auto_raise = true;
};

struct SolverConfig {
  std::optional<double> eps0;  // default range(x) / 4
  double beta = 3.0;
  int J = 8;
  int T_max = 5000;
  std::optional<double> tol;  // default 1e-8 * range(x)
  double armijo_alpha = 0.3;
  double delta = 0.1;
  double eta0 = 1e-2;
  std::optional<BarrierConfig> barrier;
  std::optional<double> bandwidth;  // default kde_bandwidth(x)
  int threads = 1;
  std::optional<kernels::Backend> backend;
};

void validate(const SolverConfig& cfg);
// Fills eps0, tol, bandwidth and the barrier domain / phi_eps from x. M bounds
// are left to run(), which needs the initial functionals.
SolverConfig resolve_defaults(const SolverConfig& cfg, const EmpiricalMeasure& x);

// KDE energy (1/(n^2 h^d)) sum_ij K((y_i - y_j)/h) and gap functional
// n h^(2d) sum_i phi(y_i) / (sum_j K((y_i - y_j)/h))^2.
struct BarrierFunctionals {
  double energy = 0.0;
  double gap = 0.0;
};

// The full penalized objective with its analytic gradient. Points are
// row-major n x d with uniform weights 1/n.
class Objective {
 public:
  Objective(const EmpiricalMeasure& x, std::vector<ConstraintSpec> constraints,
            SolverConfig cfg);

  std::size_t n() const { return n_; }
  int dim() const { return dim_; }
  const SolverConfig& config() const { return cfg_; }
  double bandwidth() const { return h_; }

  // strict: throw BarrierInfeasible on a non-positive log argument; otherwise
  // return +inf there (used for trial points in the line search).
  double value(std::span<const double> y, double eps, bool strict = true) const;
  double value_grad(std::span<const double> y, double eps,
                    std::span<double> grad) const;
  BarrierFunctionals functionals(std::span<const double> y) const;
  // Per-constraint E[f^eps] - fbar.
  std::vector<double> residuals(std::span<const double> y, double eps) const;

 private:
  struct Sums;
  void pair_sums(std::span<const double> y, const double* w, double* A,
                 double* B, Sums& s) const;
  double phi(std::span<const double> yi, double* grad) const;

  std::size_t n_;
  int dim_;
  std::vector<double> x_;
  std::vector<ConstraintSpec> constraints_;
  SolverConfig cfg_;
  double h_ = 0.0;
  kernels::Backend backend_;
};

double objective(const EmpiricalMeasure& y, const EmpiricalMeasure& x,
                 const std::vector<ConstraintSpec>& constraints,
                 const SolverConfig& cfg, double eps);
std::vector<double> gradient(const EmpiricalMeasure& y,
                             const EmpiricalMeasure& x,
                             const std::vector<ConstraintSpec>& constraints,
                             const SolverConfig& cfg, double eps);

struct ArmijoResult {
  double eta = 0.0;
  std::vector<double> y;
  double value = 0.0;
};

// Backtracking from (1 + delta) eta_prev with the sufficient decrease test
// L(y - eta g) <= L(y) - alpha eta |g|^2. f0 = L(y).
ArmijoResult armijo_step(std::span<const double> y, std::span<const double> grad,
                         double eta_prev, const SolverConfig& cfg,
                         const std::function<double(std::span<const double>)>& L,
                         double f0);

// (B_delta, B_0) = (-log(M_delta - energy), -log(M_0 - gap)). Uses
// cfg.bandwidth when set, otherwise the rule-of-thumb bandwidth of y.
std::pair<double, double> barrier_terms(const EmpiricalMeasure& y,
                                        const SolverConfig& cfg);

struct TraceRow {
  int round = 0;
  int iter = 0;
  double eps = 0.0;
  double objective = 0.0;
  double eta = 0.0;
  double grad_norm = 0.0;
};

struct SolverResult {
  EmpiricalMeasure y;
  std::vector<TraceRow> trace;
  std::vector<std::vector<double>> residuals;  // exact, per round
  std::vector<bool> converged;                 // per round
  double transport_cost = 0.0;
  SolverConfig resolved;  // with defaults and M bounds filled in
  BarrierFunctionals initial_functionals;
  std::vector<std::string> warnings;
  std::string backend;
};

SolverResult run(const EmpiricalMeasure& x,
                 const std::vector<ConstraintSpec>& constraints,
                 const SolverConfig& cfg);

nlohmann::json to_json(const SolverConfig& cfg);
nlohmann::json to_json(const SolverResult& r, std::size_t max_rows = 10000);

}  // namespace cot
