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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <random>

#include "cot/constraints.hpp"
#include "cot/numerics.hpp"

using namespace cot;

namespace {

double mv(const ConstraintKind& k, double eps, std::span<const double> y,
          double* g = nullptr) {
  double buf[2];
  const double v = mollified(k, eps, y, std::span<double>(buf, y.size()));
  if (g) std::copy(buf, buf + y.size(), g);
  return v;
}

}  // namespace

TEST_CASE("evaluate examples") {
  CHECK(evaluate(Relu{1}, 3.0) == 2.0);
  CHECK(evaluate(IndicatorOutsideInterval{-1, 1}, 0.0) == 0.0);
  CHECK(evaluate(IndicatorOutsideInterval{-1, 1}, 1.0) == 0.0);
  CHECK(evaluate(IndicatorOutsideInterval{-1, 1}, 1.5) == 1.0);
  const double p[2] = {0.6, 0.8};
  CHECK(evaluate(IndicatorOutsideDisk{1}, std::span<const double>(p, 2)) == 0.0);
  const double q[2] = {-0.6, 3};
  CHECK(evaluate(IndicatorOutsideHalfplane{-0.5}, std::span<const double>(q, 2)) == 1.0);
  CHECK(evaluate(Heaviside{0}, 0.0) == 1.0);
  CHECK(evaluate(Heaviside{0}, -1e-12) == 0.0);
  try {
    evaluate(IndicatorOutsideDisk{1}, 0.0);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("heaviside mollifier examples") {
  double g;
  CHECK(mollified(Heaviside{0}, 0.3, 0.0, &g) == 0.5);
  CHECK(std::abs(mollified(Heaviside{0}, 0.1, 1.0, &g) - 1) < 1e-8);
  // The exact derivative 0.5 sech^2(10) / 0.1 is 4.12e-8.
  CHECK(g == doctest::Approx(0.5 / std::pow(std::cosh(10.0), 2) / 0.1).epsilon(1e-10));
  CHECK(std::abs(g) < 1e-7);
  mollified(Heaviside{0}, 0.5, 0.0, &g);
  CHECK(g == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("mollifiers converge away from kinks") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-3, 3);
  const ConstraintKind kinds1[] = {Relu{0.4}, IndicatorOutsideInterval{-1, 0.5}, Heaviside{-0.2}};
  const ConstraintKind kinds2[] = {IndicatorOutsideDisk{1.2}, IndicatorOutsideHalfplane{0.3}};
  int checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const double y = U(rng);
    for (const auto& k : kinds1) {
      bool near = false;
      for (double kink : {0.4, -1.0, 0.5, -0.2}) near |= std::abs(y - kink) < 1e-3;
      if (near) continue;
      CHECK(std::abs(mv(k, 1e-6, std::span<const double>(&y, 1)) - evaluate(k, y)) <= 1e-4);
      ++checked;
    }
    const double p[2] = {U(rng), U(rng)};
    const double r = std::hypot(p[0], p[1]);
    for (const auto& k : kinds2) {
      const bool near = std::abs(r - 1.2) < 1e-3 || std::abs(p[0] - 0.3) < 1e-3;
      if (near) continue;
      const std::span<const double> s(p, 2);
      CHECK(std::abs(mv(k, 1e-6, s) - evaluate(k, s)) <= 1e-4);
    }
  }
  CHECK(checked > 2500);
}

TEST_CASE("mollifier gradients match finite differences") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-2, 2), E(0.05, 1.0);
  const ConstraintKind kinds[] = {Relu{0.4}, IndicatorOutsideInterval{-1, 0.5}, Heaviside{-0.2},
                                  IndicatorOutsideDisk{1.2}, IndicatorOutsideHalfplane{0.3}};
  for (int t = 0; t < 300; ++t) {
    const double eps = E(rng);
    for (const auto& k : kinds) {
      const int d = dimension(k);
      double y[2] = {U(rng), U(rng)}, g[2];
      mv(k, eps, std::span<const double>(y, d), g);
      for (int c = 0; c < d; ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(y[c]));
        double yp[2] = {y[0], y[1]}, ym[2] = {y[0], y[1]};
        yp[c] += h;
        ym[c] -= h;
        const double fd = (mv(k, eps, std::span<const double>(yp, d)) -
                           mv(k, eps, std::span<const double>(ym, d))) /
                          (2 * h);
        CHECK(std::abs(fd - g[c]) <= 1e-5 * std::max(1.0, std::abs(g[c])));
      }
    }
  }
}

TEST_CASE("relu and heaviside mollifiers are nondecreasing") {
  for (const ConstraintKind& k : {ConstraintKind(Relu{0.1}), ConstraintKind(Heaviside{0.1})}) {
    double prev = -1;
    for (double y = -5; y <= 5; y += 1e-3) {
      const double v = mv(k, 0.07, std::span<const double>(&y, 1));
      CHECK(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("residual examples") {
  const EmpiricalMeasure m(1, {-1.0, 1.0});
  CHECK(residual({Heaviside{0}, 0.7}, m, 0) == doctest::Approx(-0.2));
  const double own = (evaluate(Relu{0.3}, -1.0) + evaluate(Relu{0.3}, 1.0)) / 2;
  CHECK(std::abs(residual({Relu{0.3}, own}, m, 0)) <= 1e-12);
  const EmpiricalMeasure in(1, {-0.5, 0.2, 0.9});
  CHECK(residual({IndicatorOutsideInterval{-1, 1}, 0.0}, in, 0) == 0.0);
  CHECK_THROWS_AS(residual({Relu{0}, 0.1}, EmpiricalMeasure(), 0), Error);
}

TEST_CASE("residual is permutation invariant") {
  std::vector<double> pts = {0.3, -1.2, 2.5, 0.0, 1.1, -0.4};
  const ConstraintSpec c{Relu{0.2}, 0.5};
  const double r0 = residual(c, EmpiricalMeasure(1, pts), 0);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    std::shuffle(pts.begin(), pts.end(), rng);
    CHECK(residual(c, EmpiricalMeasure(1, pts), 0) == doctest::Approx(r0).epsilon(1e-15));
  }
}

TEST_CASE("targets from surrogates") {
  // A near-point mass at omega pays nothing.
  CHECK(target_from_surrogate(Relu{2.0}, Lognormal{std::log(2.0), 1e-9}) < 1e-8);
  CHECK(target_from_surrogate(IndicatorOutsideInterval{-10, 10}, Normal1D{0, 0.1}) < 1e-12);
  const double expect = std::exp(2.5) * numerics::normal_cdf(1.0) - 7.3891 * 0.5;
  CHECK(std::abs(target_from_surrogate(Relu{7.3891}, Lognormal{2, 1}) - expect) < 1e-6);
  // Closed form against quadrature.
  const double quad = numerics::integrate(
      [](double y) { return std::max(y - 7.3891, 0.0) * pdf(PriorSpec(Lognormal{2, 1}), y); },
      7.3891, std::numeric_limits<double>::infinity());
  CHECK(std::abs(target_from_surrogate(Relu{7.3891}, Lognormal{2, 1}) - quad) < 1e-8);
  CHECK(target_from_surrogate(Heaviside{0}, Normal1D{0, 1}) == doctest::Approx(0.5));
  try {
    target_from_surrogate(IndicatorOutsideDisk{1}, Normal1D{});
    FAIL("expected Unsupported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unsupported);
  }
}

TEST_CASE("validation") {
  CHECK_THROWS_AS(validate({IndicatorOutsideInterval{1, -1}, 0.1}), Error);
  CHECK_THROWS_AS(validate({Relu{0}, -0.1}), Error);
  CHECK_THROWS_AS(validate({Heaviside{0}, 1.5}), Error);
  CHECK_THROWS_AS(validate({IndicatorOutsideDisk{0}, 0.1}), Error);
}

TEST_CASE("constraint json round trip") {
  const ConstraintKind ks[] = {Relu{1.5}, IndicatorOutsideInterval{-1, 2}, IndicatorOutsideDisk{3},
                               IndicatorOutsideHalfplane{-0.5}, Heaviside{0.25}};
  for (const auto& k : ks) {
    const auto back = constraint_kind_from_json(to_json(k));
    CHECK(to_json(back) == to_json(k));
  }
  try {
    constraint_kind_from_json(nlohmann::json{{"kind", "relu"}, {"omega", 1}, {"omgea", 2}});
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    CHECK(std::string(e.what()).find("omgea") != std::string::npos);
  }
}
