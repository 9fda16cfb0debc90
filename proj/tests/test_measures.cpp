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

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "cot/measures.hpp"
#include "cot/numerics.hpp"

using namespace cot;
using numerics::integrate;
using numerics::normal_cdf;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_and_se(const EmpiricalMeasure& m, const std::function<double(double)>& f,
                   double* se) {
  double s = 0, s2 = 0;
  const double n = m.size();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = f(m.coord(i, 0));
    s += v;
    s2 += v * v;
  }
  const double mu = s / n;
  *se = std::sqrt((s2 / n - mu * mu) / n);
  return mu;
}

}  // namespace

TEST_CASE("sampling") {
  CHECK(sample(Normal1D{}, 0, 1).empty());
  double se;
  const auto m = sample(Lognormal{1, 1}, 100000, 7);
  const double mean = mean_and_se(m, [](double x) { return x; }, &se);
  CHECK(std::abs(mean - std::exp(1.5)) < 3 * se);
  const auto d = sample(UniformDisk{1}, 1000, 3);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d.coord(i, 0) * d.coord(i, 0) + d.coord(i, 1) * d.coord(i, 1) <= 1.0);
  }
  const auto a = sample(Gaussian2D{}, 500, 9), b = sample(Gaussian2D{}, 500, 9);
  CHECK(a.points() == b.points());
}

TEST_CASE("gaussian 2d sampling reproduces the covariance") {
  Gaussian2D g{{1, -1}, {2, 0.6, 0.6, 0.5}};
  const auto m = sample(g, 200000, 4);
  double s[2] = {0, 0}, c[3] = {0, 0, 0};
  for (std::size_t i = 0; i < m.size(); ++i) {
    s[0] += m.coord(i, 0);
    s[1] += m.coord(i, 1);
  }
  s[0] /= m.size();
  s[1] /= m.size();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double a = m.coord(i, 0) - s[0], b = m.coord(i, 1) - s[1];
    c[0] += a * a;
    c[1] += a * b;
    c[2] += b * b;
  }
  CHECK(s[0] == doctest::Approx(1).epsilon(0.01));
  CHECK(c[0] / m.size() == doctest::Approx(2).epsilon(0.02));
  CHECK(c[1] / m.size() == doctest::Approx(0.6).epsilon(0.03));
  CHECK(c[2] / m.size() == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("pdf and cdf examples") {
  CHECK(pdf(Normal1D{}, 0.0) == doctest::Approx(0.3989422804014327));
  CHECK(cdf(Lognormal{1, 1}, std::exp(1.0)) == doctest::Approx(0.5).epsilon(1e-14));
  const double z[2] = {2, 0};
  CHECK(pdf(UniformDisk{1}, std::span<const double>(z, 2)) == 0.0);
  CHECK(pdf(Lognormal{1, 1}, -1.0) == 0.0);
}

TEST_CASE("cdf properties and pdf as its derivative") {
  std::mt19937_64 rng(1);
  const PriorSpec specs[] = {Normal1D{0.3, 1.7}, Lognormal{1, 1}, Lognormal{2, 0.4}};
  for (const auto& s : specs) {
    const Prior1D p(s);
    CHECK(cdf(s, -1e300) == 0.0);
    CHECK(cdf(s, 1e300) == doctest::Approx(1.0));
    double prev = 0;
    std::uniform_real_distribution<double> U(0.01, 0.99);
    for (int t = 0; t < 100; ++t) {
      const double x = p.quantile(U(rng));
      const double h = 1e-5 * std::max(1.0, std::abs(x));
      const double fd = (cdf(s, x + h) - cdf(s, x - h)) / (2 * h);
      CHECK(std::abs(fd - pdf(s, x)) <= 1e-5 * std::max(1.0, pdf(s, x)));
    }
    for (double x = -5; x < 40; x += 0.25) {
      CHECK(cdf(s, x) >= prev);
      prev = cdf(s, x);
    }
  }
}

TEST_CASE("lognormal partial expectation") {
  const Lognormal ln{1, 1};
  CHECK(partial_expectation(ln, 0) == doctest::Approx(std::exp(1.5)));
  CHECK(std::abs(partial_expectation(ln, 7.3891) - 2.2408) < 5e-5);
  CHECK(partial_expectation(ln, 1e300) < 1e-300);
  for (double a : {0.3, 1.0, 2.7, 10.0, 50.0}) {
    const double below =
        integrate([&](double y) { return y * pdf(PriorSpec(ln), y); }, 0, a);
    CHECK(std::abs(partial_expectation(ln, a) + below - std::exp(1.5)) < 1e-8);
  }
  CHECK(tail_probability(ln, std::exp(1.0)) == doctest::Approx(0.5));
}

TEST_CASE("bandwidth") {
  CHECK_THROWS_AS(kde_bandwidth(EmpiricalMeasure(1, {1.0})), Error);
  CHECK_THROWS_AS(kde_bandwidth(EmpiricalMeasure(1, {2.0, 2.0, 2.0})), Error);
  try {
    kde_bandwidth(EmpiricalMeasure(1, {1.0}));
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateSample);
  }
  const auto m = sample(Normal1D{}, 1000, 2);
  double s = 0, s2 = 0;
  for (double x : m.points()) {
    s += x;
    s2 += x * x;
  }
  const double sd = std::sqrt((s2 - s * s / 1000) / 999);
  CHECK(kde_bandwidth(m) == doctest::Approx(sd * std::pow(4.0 / 3000, 0.2)).epsilon(1e-12));
}

TEST_CASE("kde density") {
  KdeModel one{1, {0.0}, {1.0}, 1.0};
  const double q = 0;
  CHECK(kde_density(one, std::span<const double>(&q, 1)) ==
        doctest::Approx(0.3989422804014327));
  KdeModel two{1, {-1.0, 1.0}, {0.5, 0.5}, 0.7};
  const double l = -1e-300, r = 1e-300;
  CHECK(kde_density(two, std::span<const double>(&l, 1)) ==
        doctest::Approx(kde_density(two, std::span<const double>(&r, 1))));
  const auto m = sample(Lognormal{0, 0.5}, 300, 5);
  const auto model = make_kde(m);
  const double tot = integrate(
      [&](double y) { return kde_density(model, std::span<const double>(&y, 1)); }, -kInf,
      kInf);
  CHECK(std::abs(tot - 1.0) < 1e-6);
  for (double y = -3; y < 10; y += 0.5) {
    CHECK(kde_density(model, std::span<const double>(&y, 1)) >= 0.0);
  }
}

TEST_CASE("kde integrates to one in 2d") {
  const auto m = sample(Gaussian2D{}, 50, 5);
  const auto model = make_kde(m);
  // Product Gauss-Legendre on a box wide enough for all centres.
  double tot = 0;
  const auto& rule = numerics::default_rule();
  const double lo = -8, hi = 8;
  const auto inner = [&](double x) {
    return integrate(
        [&](double y) {
          const double p[2] = {x, y};
          return kde_density(model, std::span<const double>(p, 2));
        },
        lo, hi, numerics::QuadratureRule::gauss_legendre(16, 16));
  };
  tot = integrate(inner, lo, hi, numerics::QuadratureRule::gauss_legendre(16, 16));
  (void)rule;
  CHECK(std::abs(tot - 1.0) < 1e-6);
}

TEST_CASE("empirical expectation") {
  const EmpiricalMeasure m(1, {1, 2, 3});
  CHECK(empirical_expectation(m, [](std::span<const double>) { return 4.5; }) ==
        doctest::Approx(4.5));
  CHECK(empirical_expectation(m, [](std::span<const double> p) { return p[0]; }) ==
        doctest::Approx(2.0));
  CHECK_THROWS_AS(
      empirical_expectation(EmpiricalMeasure(), [](std::span<const double>) { return 1.0; }),
      Error);
  const auto s = sample(Lognormal{2, 1}, 100000, 12);
  const double w = std::exp(2.0);
  double se;
  const double v = mean_and_se(s, [&](double x) { return std::max(x - w, 0.0); }, &se);
  const double exact = std::exp(2.5) * normal_cdf(1.0) - w * normal_cdf(0.0);
  CHECK(std::abs(v - exact) < 3 * se);
}

TEST_CASE("weights must sum to one") {
  CHECK_THROWS_AS(EmpiricalMeasure(1, {1, 2}, {0.5, 0.6}), Error);
  CHECK_THROWS_AS(EmpiricalMeasure(1, {1, 2}, {1.5, -0.5}), Error);
  CHECK_NOTHROW(EmpiricalMeasure(1, {1, 2}, {0.25, 0.75}));
}

TEST_CASE("csv round trip") {
  const auto m = sample(Gaussian2D{}, 20, 8);
  std::stringstream ss;
  write_csv(ss, m);
  CHECK(ss.str().rfind("x1,x2\n", 0) == 0);
  const auto r = read_csv(ss);
  CHECK(r.dim() == 2);
  CHECK(r.points() == m.points());
}

TEST_CASE("discrete prior moments are exact") {
  const Discrete1D d{{-1, 0, 2}, {0.2, 0.5, 0.3}};
  const Prior1D p(d);
  CHECK(p.mass(-kInf, kInf) == doctest::Approx(1.0));
  CHECK(p.mean() == doctest::Approx(0.4));
  CHECK(p.moment(2, -kInf, kInf) == doctest::Approx(0.2 + 1.2).epsilon(1e-9));
  CHECK(p.call(1.0) == doctest::Approx(0.3));
  // A cut through an atom splits it in half.
  CHECK(p.mass(0.0, kInf) == doctest::Approx(0.25 + 0.3));
}
