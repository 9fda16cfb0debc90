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

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "cot/error.hpp"

namespace cot::numerics {

struct Bracket {
  double lo;
  double hi;
};

// Brent's method. Requires a sign change on the bracket. Returns x with
// |f(x)| <= tol or a final bracket narrower than tol.
double find_root_scalar(const std::function<double(double)>& f, Bracket b,
                        double tol);

// Expands [lo, hi] geometrically around its midpoint until f changes sign.
// The total width never exceeds max_width. Throws NoSignChange otherwise.
Bracket grow_bracket(const std::function<double(double)>& f, Bracket b,
                     double max_width);

struct NewtonResult {
  Eigen::VectorXd x;
  double residual = 0.0;  // infinity norm of F(x)
  int iterations = 0;
};

class NewtonFailure : public Error {
 public:
  NewtonFailure(ErrorKind kind, const std::string& what, Eigen::VectorXd best,
                double residual)
      : Error(kind, what), best_(std::move(best)), residual_(residual) {}
  const Eigen::VectorXd& best() const { return best_; }
  double residual() const { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

using VectorFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using MatrixFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

// Damped Newton for small square systems. A full step that does not reduce
// the residual is halved up to 30 times.
NewtonResult newton_system(const VectorFn& F, const MatrixFn& J,
                           const Eigen::VectorXd& x0, double tol,
                           int max_iter);

struct QuadratureRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;  // sum to 2
  int order = 0;
  int panels = 32;

  static QuadratureRule gauss_legendre(int order, int panels = 32);
};

const QuadratureRule& default_rule();

// Composite Gauss-Legendre on [lo, hi]. Infinite limits are mapped with
// x = lo + u / (1 - u) (and its mirror images), never truncated.
double integrate(const std::function<double(double)>& f, double lo, double hi,
                 const QuadratureRule& rule = default_rule());

// Same as integrate but splits [lo, hi] at the given interior points first.
double integrate_split(const std::function<double(double)>& f, double lo,
                       double hi, std::vector<double> cuts,
                       const QuadratureRule& rule = default_rule());

double normal_cdf(double z);
double normal_sf(double z);  // 1 - Phi(z) without cancellation
double normal_pdf(double z);
double normal_quantile(double p);

}  // namespace cot::numerics
