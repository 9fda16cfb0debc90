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
#include <nlohmann/json.hpp>

#include "cot/constraints.hpp"
#include "cot/kl_baseline.hpp"
#include "cot/numerics.hpp"

using namespace cot;
using numerics::normal_cdf;
using numerics::normal_pdf;

namespace {

const KlRelu& relu(const KlSolution& s) { return std::get<KlRelu>(s.tilt()); }

// Composite Simpson on a uniform grid, independent of the library rule.
double simpson(const std::function<double(double)>& f, double a, double b, int n = 200000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4 : 2);
  return s * h / 3;
}

}  // namespace

TEST_CASE("indicator tilt") {
  const auto wide = kl_indicator(Normal1D{0, 0.1}, -10, 10);
  for (double y : {-0.2, 0.0, 0.15}) {
    CHECK(kl_density(wide, y) == doctest::Approx(pdf(PriorSpec(Normal1D{0, 0.1}), y)).epsilon(1e-12));
  }
  const auto s = kl_indicator(Normal1D{0, 1}, -1, 1);
  CHECK(kl_density(s, 0.3) / normal_pdf(0.3) == doctest::Approx(1 / 0.682689492).epsilon(1e-8));
  CHECK(kl_density(s, 1.5) == 0.0);
  try {
    kl_indicator(Normal1D{0, 1}, 60, 70);
    FAIL("expected ZeroMass");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ZeroMass);
  }
}

TEST_CASE("single relu tilt with the prior's own payoff") {
  const Normal1D p{0, 1};
  const double ymax = 12;
  const double own = numerics::integrate([](double y) { return y * normal_pdf(y); }, 0, ymax) /
                     normal_cdf(ymax);
  const auto s = kl_relu_single(p, 0.0, own, ymax);
  CHECK(std::abs(relu(s).lambdas[0]) < 1e-10);
  CHECK(std::abs(s.z() - 1) < 1e-8);
  const auto up = kl_relu_single(p, 0.0, own * 1.5, ymax);
  CHECK(relu(up).lambdas[0] > 0);
  const auto down = kl_relu_single(p, 0.0, own * 0.5, ymax);
  CHECK(relu(down).lambdas[0] < 0);
}

TEST_CASE("single relu tilt against a dense-grid bisection") {
  const auto s = kl_relu_single(Normal1D{0, 1}, 0.0, 0.6, 12.0);
  auto mean = [](double g) {
    auto w = [&](double y) { return normal_pdf(y) * std::exp(g * std::max(y, 0.0)); };
    const double z = simpson(w, -12, 12);
    return simpson([&](double y) { return std::max(y, 0.0) * w(y); }, -12, 12) / z;
  };
  double lo = 0, hi = 5;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean(mid) < 0.6 ? lo : hi) = mid;
  }
  CHECK(std::abs(relu(s).lambdas[0] - 0.5 * (lo + hi)) < 1e-6);
}

TEST_CASE("unattainable targets fail the bracket") {
  try {
    kl_relu_single(Normal1D{0, 1}, 0.0, 50.0, 12.0);
    FAIL("expected BracketFailure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BracketFailure);
  }
}

TEST_CASE("multi relu tilt reduces to the single solver") {
  for (double f : {0.2, 0.6, 1.0}) {
    const auto a = kl_relu_single(Normal1D{0.5, 2}, 1.0, f, 20.0);
    const double ws[] = {1.0}, fs[] = {f};
    const auto b = kl_relu_multi(Normal1D{0.5, 2}, ws, fs, 20.0);
    CHECK(std::abs(relu(a).lambdas[0] - relu(b).lambdas[0]) < 1e-8);
  }
}

TEST_CASE("multi relu tilt with the prior's own payoffs") {
  const Lognormal p{1, 1};
  const double ws[] = {1.0, 2.0, 3.0};
  const double ymax = kl_default_ymax(p);
  const Prior1D pr(p);
  const double mass = pr.mass(0, ymax);
  std::vector<double> fs;
  for (double w : ws) {
    fs.push_back((pr.moment(1, w, ymax) - w * pr.mass(w, ymax)) / mass);
  }
  const auto s = kl_relu_multi(p, ws, fs);
  for (double l : relu(s).lambdas) CHECK(std::abs(l) < 1e-9);
  CHECK(std::abs(s.z() - mass) < 1e-8);
  CHECK(std::abs(s.z() - 1) < 1e-8);
}

TEST_CASE("three relu tilt from a lognormal surrogate") {
  const Lognormal p{1, 1};
  const double ws[] = {1.0, 2.0, 3.0};
  std::vector<double> fs;
  for (double w : ws) fs.push_back(target_from_surrogate(Relu{w}, Lognormal{2, 1}));
  const auto s = kl_relu_multi(p, ws, fs);
  const double ymax = relu(s).y_max;
  // Independent check with Simpson on a log grid.
  auto dens = [&](double u) {
    const double y = std::exp(u);
    return kl_density(s, y) * y;
  };
  const double lo = std::log(1e-12), hi = std::log(ymax);
  const double z = simpson(dens, lo, hi, 400000);
  CHECK(std::abs(z - 1) < 1e-6);
  for (int k = 0; k < 3; ++k) {
    const double v = simpson([&](double u) { return std::max(std::exp(u) - ws[k], 0.0) * dens(u); },
                             lo, hi, 400000);
    CHECK(std::abs(v - fs[k]) < 1e-8 * std::max(1.0, fs[k]) * 10);
  }
  for (double r : s.residuals()) CHECK(std::abs(r) <= 1e-8);
  // Continuity at each kink.
  for (double w : ws) {
    CHECK(std::abs(kl_density(s, w * (1 - 1e-13)) - kl_density(s, w)) <= 1e-10);
  }
  // First branch is the prior over Z.
  CHECK(kl_density(s, 0.5) == doctest::Approx(pdf(PriorSpec(p), 0.5) / s.z()).epsilon(1e-12));
  CHECK(kl_density(s, ymax * 1.01) == 0.0);
}

TEST_CASE("raising one target raises its multiplier") {
  const Lognormal p{1, 1};
  const double ws[] = {1.0, 2.0, 3.0};
  std::vector<double> base;
  for (double w : ws) base.push_back(target_from_surrogate(Relu{w}, Lognormal{1.5, 1}));
  for (int k = 0; k < 3; ++k) {
    double prev = -std::numeric_limits<double>::infinity();
    for (int step = 0; step < 5; ++step) {
      auto fs = base;
      fs[k] *= 1.0 + 0.002 * step;
      const auto s = kl_relu_multi(p, ws, fs);
      CHECK(relu(s).lambdas[k] > prev);
      prev = relu(s).lambdas[k];
    }
  }
}

TEST_CASE("kl samples reproduce the targets") {
  const Lognormal p{1, 1};
  const double ws[] = {1.0, 2.0, 3.0};
  std::vector<double> fs;
  for (double w : ws) fs.push_back(target_from_surrogate(Relu{w}, Lognormal{2, 1}));
  const auto s = kl_relu_multi(p, ws, fs);
  const auto x = kl_sample(s, 100000, 3);
  for (int k = 0; k < 3; ++k) {
    double m = 0, m2 = 0;
    for (double v : x.points()) {
      const double r = std::max(v - ws[k], 0.0);
      m += r;
      m2 += r * r;
    }
    m /= x.size();
    const double se = std::sqrt((m2 / x.size() - m * m) / x.size());
    CHECK(std::abs(m - fs[k]) < 3 * se);
  }
  const auto again = kl_sample(s, 100, 3);
  for (std::size_t i = 0; i < 100; ++i) CHECK(again.coord(i, 0) == x.coord(i, 0));
}

TEST_CASE("newton on the scalar tilt equation matches the bracketed root") {
  const auto s = kl_relu_single(Normal1D{0, 1}, 0.5, 0.4, 12.0);
  const double ws[] = {0.5}, fs[] = {0.4};
  const auto m = kl_relu_multi(Normal1D{0, 1}, ws, fs, 12.0);
  CHECK(std::abs(relu(s).lambdas[0] - relu(m).lambdas[0]) < 1e-10);
}

TEST_CASE("kl json") {
  const double ws[] = {1.0, 2.0};
  const double fs[] = {1.5, 0.9};
  const auto s = kl_relu_multi(Lognormal{1, 1}, ws, fs);
  const auto j = to_json(s);
  CHECK(j["omegas"].size() == 2);
  CHECK(j["lambdas"].size() == 2);
  CHECK(j["Z"].get<double>() > 0);
  CHECK(j["y_max"].get<double>() > 2);
}
