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

#include "cot/numerics.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <numbers>

namespace cot::numerics {

namespace {

double checked(const std::function<double(double)>& f, double x) {
  const double v = f(x);
  if (!std::isfinite(v)) {
    fail(ErrorKind::NonFinite, "function value not finite at x=" +
                                   std::to_string(x));
  }
  return v;
}

}  // namespace

double find_root_scalar(const std::function<double(double)>& f, Bracket br,
                        double tol) {
  double a = br.lo, b = br.hi;
  double fa = checked(f, a), fb = checked(f, b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0) == (fb > 0)) {
    fail(ErrorKind::NoSignChange, "no sign change on bracket");
  }
  double c = a, fc = fa, d = b - a, e = d;
  constexpr double kEps = std::numeric_limits<double>::epsilon();
  for (int it = 0; it < 500; ++it) {
    if ((fb > 0) == (fc > 0)) {
      c = a;
      fc = fa;
      d = e = b - a;
    }
    if (std::fabs(fc) < std::fabs(fb)) {
      a = b;
      b = c;
      c = a;
      fa = fb;
      fb = fc;
      fc = fa;
    }
    const double tol1 = 2.0 * kEps * std::fabs(b) + 0.5 * tol;
    const double xm = 0.5 * (c - b);
    if (std::fabs(xm) <= tol1 || fb == 0.0 || std::fabs(fb) <= tol) return b;
    if (std::fabs(e) >= tol1 && std::fabs(fa) > std::fabs(fb)) {
      double p, q, r;
      const double s = fb / fa;
      if (a == c) {
        p = 2.0 * xm * s;
        q = 1.0 - s;
      } else {
        q = fa / fc;
        r = fb / fc;
        p = s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0));
        q = (q - 1.0) * (r - 1.0) * (s - 1.0);
      }
      if (p > 0) q = -q;
      p = std::fabs(p);
      if (2.0 * p < std::min(3.0 * xm * q - std::fabs(tol1 * q),
                             std::fabs(e * q))) {
        e = d;
        d = p / q;
      } else {
        d = xm;
        e = d;
      }
    } else {
      d = xm;
      e = d;
    }
    a = b;
    fa = fb;
    b += std::fabs(d) > tol1 ? d : (xm > 0 ? tol1 : -tol1);
    fb = checked(f, b);
  }
  return b;
}

Bracket grow_bracket(const std::function<double(double)>& f, Bracket b,
                     double max_width) {
  double flo = checked(f, b.lo), fhi = checked(f, b.hi);
  while ((flo > 0) == (fhi > 0) && flo != 0.0 && fhi != 0.0) {
    const double w = b.hi - b.lo;
    if (w >= max_width) {
      fail(ErrorKind::NoSignChange, "bracket growth exhausted");
    }
    // Expand toward the side with the smaller magnitude.
    if (std::fabs(flo) < std::fabs(fhi)) {
      b.lo -= w;
      flo = checked(f, b.lo);
    } else {
      b.hi += w;
      fhi = checked(f, b.hi);
    }
  }
  return b;
}

NewtonResult newton_system(const VectorFn& F, const MatrixFn& J,
                           const Eigen::VectorXd& x0, double tol,
                           int max_iter) {
  Eigen::VectorXd x = x0;
  Eigen::VectorXd fx = F(x);
  auto norm = [](const Eigen::VectorXd& v) {
    return v.size() ? v.cwiseAbs().maxCoeff() : 0.0;
  };
  if (!fx.allFinite()) fail(ErrorKind::NonFinite, "F(x0) not finite");
  double r = norm(fx);
  Eigen::VectorXd best = x;
  double best_r = r;
  for (int it = 0; it < max_iter; ++it) {
    if (r <= tol) return {x, r, it};
    const Eigen::MatrixXd jac = J(x);
    if (!jac.allFinite()) fail(ErrorKind::NonFinite, "Jacobian not finite");
    Eigen::FullPivLU<Eigen::MatrixXd> lu(jac);
    if (!lu.isInvertible()) {
      throw NewtonFailure(ErrorKind::SingularJacobian, "singular Jacobian",
                          best, best_r);
    }
    const Eigen::VectorXd step = lu.solve(-fx);
    double t = 1.0;
    Eigen::VectorXd xn, fn;
    double rn = std::numeric_limits<double>::infinity();
    for (int h = 0; h <= 30; ++h) {
      xn = x + t * step;
      fn = F(xn);
      rn = fn.allFinite() ? norm(fn) : std::numeric_limits<double>::infinity();
      if (rn < r) break;
      t *= 0.5;
    }
    if (!std::isfinite(rn)) {
      throw NewtonFailure(ErrorKind::NonFinite, "residual not finite", best,
                          best_r);
    }
    x = xn;
    fx = fn;
    r = rn;
    if (r < best_r) {
      best = x;
      best_r = r;
    }
  }
  if (r <= tol) return {x, r, max_iter};
  throw NewtonFailure(ErrorKind::MaxIterExceeded, "Newton iteration limit",
                      best, best_r);
}

QuadratureRule QuadratureRule::gauss_legendre(int order, int panels) {
  if (order < 1 || panels < 1) {
    fail(ErrorKind::InvalidSpec, "quadrature order and panels must be >= 1");
  }
  QuadratureRule rule;
  rule.order = order;
  rule.panels = panels;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const int n = order;
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    // Recompute derivative at the converged node.
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n == 1 ? 1.0 : n * (z * p1 - p0) / (z * z - 1.0);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    rule.nodes[i] = -z;
    rule.nodes[n - 1 - i] = z;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

const QuadratureRule& default_rule() {
  static const QuadratureRule rule = QuadratureRule::gauss_legendre(64, 32);
  return rule;
}

namespace {

double composite(const std::function<double(double)>& g, double a, double b,
                 const QuadratureRule& rule) {
  const double width = (b - a) / rule.panels;
  double total = 0.0;
  for (int p = 0; p < rule.panels; ++p) {
    const double lo = a + p * width;
    const double hi = p + 1 == rule.panels ? b : lo + width;
    const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
    double s = 0.0;
    for (int i = 0; i < rule.order; ++i) {
      const double v = g(mid + half * rule.nodes[i]);
      if (!std::isfinite(v)) {
        fail(ErrorKind::NonFinite, "integrand not finite");
      }
      s += rule.weights[i] * v;
    }
    total += half * s;
  }
  return total;
}

}  // namespace

double integrate(const std::function<double(double)>& f, double lo, double hi,
                 const QuadratureRule& rule) {
  if (std::isnan(lo) || std::isnan(hi)) {
    fail(ErrorKind::NonFinite, "integration limit is NaN");
  }
  if (lo == hi) return 0.0;
  if (lo > hi) return -integrate(f, hi, lo, rule);
  const bool lo_inf = std::isinf(lo), hi_inf = std::isinf(hi);
  if (!lo_inf && !hi_inf) return composite(f, lo, hi, rule);
  if (lo_inf && hi_inf) {
    return integrate(f, lo, 0.0, rule) + integrate(f, 0.0, hi, rule);
  }
  if (hi_inf) {
    auto g = [&](double u) {
      const double om = 1.0 - u;
      return f(lo + u / om) / (om * om);
    };
    return composite(g, 0.0, 1.0, rule);
  }
  auto g = [&](double u) {
    const double om = 1.0 - u;
    return f(hi - u / om) / (om * om);
  };
  return composite(g, 0.0, 1.0, rule);
}

double integrate_split(const std::function<double(double)>& f, double lo,
                       double hi, std::vector<double> cuts,
                       const QuadratureRule& rule) {
  std::sort(cuts.begin(), cuts.end());
  double total = 0.0, a = lo;
  for (double c : cuts) {
    if (!(c > a) || !(c < hi)) continue;
    total += integrate(f, a, c, rule);
    a = c;
  }
  return total + integrate(f, a, hi, rule);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * (0.5 * std::numbers::inv_sqrtpi *
                                   std::numbers::sqrt2);
}

double normal_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace cot::numerics
