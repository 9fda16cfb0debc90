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
#include <nlohmann/json.hpp>
#include <random>

#include "cot/numerics.hpp"
#include "cot/pricing.hpp"

using namespace cot;
using numerics::normal_cdf;

namespace {

// Simpson in u = log x against the lognormal density, with the payoff's
// kinks as exact break points.
double lognormal_quad(const OptionSpec& o, const Lognormal& ln) {
  auto f = [&](double u) {
    const double z = (u - ln.mu) / ln.sigma;
    return payoff(o, std::exp(u)) * std::exp(-0.5 * z * z) /
           (ln.sigma * std::sqrt(2 * std::numbers::pi));
  };
  std::vector<double> pts = {ln.mu - 12 * ln.sigma, ln.mu + 12 * ln.sigma};
  for (double k : payoff_kinks(o)) {
    if (k > 0) pts.push_back(std::clamp(std::log(k), pts[0], pts[1]));
  }
  std::sort(pts.begin(), pts.end());
  double s = 0;
  for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
    const double a = pts[p], b = pts[p + 1];
    if (!(b > a)) continue;
    const int n = 20000;
    const double h = (b - a) / n;
    // One-sided limits so jumps sit on the boundaries.
    double t = f(a + 1e-10 * (b - a)) + f(b - 1e-10 * (b - a));
    for (int i = 1; i < n; ++i) t += f(a + i * h) * (i % 2 ? 4 : 2);
    s += t * h / 3;
  }
  return s;
}

// E[X^k 1{X >= a}] for a lognormal.
double lognormal_moment(const Lognormal& ln, int k, double a) {
  return std::exp(k * ln.mu + 0.5 * k * k * ln.sigma * ln.sigma) *
         normal_cdf((ln.mu + k * ln.sigma * ln.sigma - std::log(a)) / ln.sigma);
}

// Exact E[g(X)^2].
double second_moment(const OptionSpec& o, const Lognormal& ln) {
  auto M = [&](int k, double a) { return lognormal_moment(ln, k, a); };
  return std::visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VanillaCall>) {
          return M(2, v.omega) - 2 * v.omega * M(1, v.omega) + v.omega * v.omega * M(0, v.omega);
        } else if constexpr (std::is_same_v<T, DownAndOutCall>) {
          const double a = std::max(v.H0, v.s);
          return M(2, a) - 2 * v.s * M(1, a) + v.s * v.s * M(0, a);
        } else if constexpr (std::is_same_v<T, CashOrNothing>) {
          return v.C * v.C * M(0, v.s);
        } else {
          return M(2, v.s);
        }
      },
      o);
}

OptionSpec random_option(std::mt19937_64& rng, int kind) {
  std::uniform_real_distribution<double> U(0.5, 15);
  switch (kind) {
    case 0: return VanillaCall{U(rng)};
    case 1: return DownAndOutCall{U(rng), U(rng)};
    case 2: return CashOrNothing{1 + U(rng) / 3, U(rng)};
    default: return AssetOrNothing{U(rng)};
  }
}

}  // namespace

TEST_CASE("payoff examples") {
  CHECK(payoff(DownAndOutCall{20.0855, 1.6487}, 10.0) == 0.0);
  CHECK(payoff(DownAndOutCall{20.0855, 1.6487}, 25.0) == doctest::Approx(25 - 1.6487));
  CHECK(payoff(CashOrNothing{4, 2.7381}, 3.0) == 4.0);
  CHECK(payoff(CashOrNothing{4, 2.7381}, 2.0) == 0.0);
  CHECK(payoff(AssetOrNothing{7.3891}, 10.0) == 10.0);
  CHECK(payoff(AssetOrNothing{7.3891}, 7.0) == 0.0);
  CHECK(payoff(VanillaCall{2}, 5.0) == 3.0);
  // Strikes below the barrier: the barrier is the binding threshold.
  CHECK(payoff(DownAndOutCall{2.7183, 2.1170}, 2.5) == 0.0);
}

TEST_CASE("constant payoff prices to the cash amount") {
  const OptionSpec bond = CashOrNothing{4, 0};
  const auto x = sample(Lognormal{1, 1}, 1000, 3);
  CHECK(price(bond, x) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(closed_form_price(CashOrNothing{4, 1e-300}, Lognormal{1, 1}) == 4.0);
  // A normal law puts Phi(-5) of its mass below the zero strike.
  CHECK(price(bond, PriorSpec(Normal1D{5, 1})) ==
        doctest::Approx(4.0 * normal_cdf(5.0)).epsilon(1e-12));
}

TEST_CASE("prior prices from the case study table") {
  const Lognormal p{1, 1};
  const OptionSpec cash = CashOrNothing{4, 2.7381};
  const OptionSpec asset = AssetOrNothing{7.3891};
  CHECK(std::abs(closed_form_price(cash, p) - 2.0000) <= 0.02);
  CHECK(std::abs(closed_form_price(cash, p) - 4 * (1 - normal_cdf(std::log(2.7381) - 1))) <= 1e-14);
  CHECK(std::abs(closed_form_price(asset, p) - 2.2408) <= 0.005);
  // Quadrature through the mixed-measure path (identity map).
  const MixedMeasure id(p, {{0.0, std::numeric_limits<double>::infinity(), 0.0}}, {});
  CHECK(std::abs(price(cash, id) - 2.0000) <= 0.02);
  CHECK(std::abs(price(asset, id) - 2.2408) <= 0.005);
  CHECK(std::abs(price(cash, id) - closed_form_price(cash, p)) <= 1e-9);
}

TEST_CASE("closed forms") {
  CHECK(closed_form_price(AssetOrNothing{7.3891}, Lognormal{1, 1}) ==
        doctest::Approx(std::exp(1.5) * 0.5).epsilon(1e-5));
  const double v = closed_form_price(VanillaCall{7.3891}, Lognormal{2, 1});
  // The quoted 6.5546 is 5e-4 below its own formula, which evaluates to 6.5551.
  CHECK(std::abs(v - 6.5546) <= 1e-3);
  CHECK(std::abs(v - (std::exp(2.5) * normal_cdf(1.0) - 7.3891 * 0.5)) <= 1e-4);
  // Against independent log-space Simpson for every kind.
  std::mt19937_64 rng(17);
  for (int kind = 0; kind < 4; ++kind) {
    for (int t = 0; t < 5; ++t) {
      const auto o = random_option(rng, kind);
      for (const Lognormal ln : {Lognormal{1, 1}, Lognormal{2, 0.5}}) {
        const double q = lognormal_quad(o, ln);
        CHECK(std::abs(closed_form_price(o, ln) - q) <= 1e-8 * std::max(1.0, q));
      }
    }
  }
}

TEST_CASE("monte carlo agrees with the closed forms") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> M(0.5, 2), S(0.4, 1.2);
  for (int kind = 0; kind < 4; ++kind) {
    for (int t = 0; t < 20; ++t) {
      const Lognormal ln{M(rng), S(rng)};
      const auto o = random_option(rng, kind);
      const auto x = sample(ln, 20000, 1000 * kind + t);
      double m = 0;
      for (double v : x.points()) m += payoff(o, v);
      m /= x.size();
      CHECK(price(o, x) == doctest::Approx(m).epsilon(1e-12));
      const double cf = closed_form_price(o, ln);
      // Standard error from the exact payoff variance, not the sample one.
      const double se = std::sqrt((second_moment(o, ln) - cf * cf) / x.size());
      INFO("kind " << kind << " trial " << t);
      CHECK(std::abs(m - cf) <= 4 * se + 1e-12);
    }
  }
}

TEST_CASE("prices are nonincreasing in the strike") {
  const auto x = sample(Lognormal{1, 1}, 3000, 9);
  const double ws[] = {2.0, 5.0};
  const double fs[] = {2.0, 0.8};
  const auto kl = kl_relu_multi(Lognormal{1, 1}, ws, fs);
  const PricingMeasure measures[] = {x, kl};
  for (const auto& m : measures) {
    double pc = INFINITY, pa = INFINITY, pv = INFINITY;
    for (double s = 0.1; s < 30; s += 0.37) {
      const double c = price(CashOrNothing{4, s}, m);
      const double a = price(AssetOrNothing{s}, m);
      const double v = price(VanillaCall{s}, m);
      CHECK(c <= pc + 1e-12);
      CHECK(a <= pa + 1e-12);
      CHECK(v <= pv + 1e-12);
      pc = c;
      pa = a;
      pv = v;
    }
  }
}

TEST_CASE("mixed measure prices split at atoms and pieces") {
  const Lognormal p{1, 1};
  // Everything above 2 is moved onto the atom at 2.
  const MixedMeasure m(p, {{0.0, 2.0, 0.0}}, {{2.0, tail_probability(p, 2.0)}});
  const OptionSpec o = AssetOrNothing{1.0};
  const double expect =
      partial_expectation(p, 1.0) - partial_expectation(p, 2.0) + 2 * tail_probability(p, 2.0);
  CHECK(price(o, m) == doctest::Approx(expect).epsilon(1e-10));
  const OptionSpec c = CashOrNothing{4, 2.0};
  CHECK(price(c, m) == doctest::Approx(4 * tail_probability(p, 2.0)).epsilon(1e-12));
}

TEST_CASE("relative errors") {
  CHECK(relative_error(10.053, 10.053) == 0.0);
  CHECK(std::abs(relative_error(2.7121, 10.053) + 0.7302) <= 5e-4);
  CHECK(std::abs(relative_error(0.6735, 5.7588) + 0.8830) <= 5e-4);
  CHECK(std::isnan(relative_error(1.0, 0.0)));
}

TEST_CASE("option validation and json") {
  CHECK_THROWS_AS(validate(OptionSpec(VanillaCall{0})), Error);
  CHECK_THROWS_AS(validate(OptionSpec(DownAndOutCall{-1, 2})), Error);
  CHECK_THROWS_AS(validate(OptionSpec(CashOrNothing{0, 2})), Error);
  for (const auto& o : case_study_options()) {
    CHECK(to_json(option_from_json(to_json(o.option))) == to_json(o.option));
  }
  try {
    option_from_json(nlohmann::json{{"kind", "cash_or_nothing"}, {"C", 4}, {"s", 2}, {"k", 1}});
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
    CHECK(std::string(e.what()).find("'k'") != std::string::npos);
  }
  CHECK_THROWS_AS(option_from_json(nlohmann::json{{"kind", "barrier"}}), Error);
}

TEST_CASE("parametric fit") {
  const auto x = sample(Lognormal{1, 1}, 50000, 4);
  const auto f = fit_parametric(x);
  REQUIRE(std::holds_alternative<Lognormal>(f));
  CHECK(std::abs(std::get<Lognormal>(f).mu - 1) < 0.02);
  CHECK(std::abs(std::get<Lognormal>(f).sigma - 1) < 0.02);
  const auto y = sample(Normal1D{-1, 2}, 50000, 4);
  REQUIRE(std::holds_alternative<Normal1D>(fit_parametric(y)));
}

TEST_CASE("calibration with the prior's own quotes leaves samples in place") {
  const auto x = sample(Lognormal{1, 1}, 300, 2);
  std::vector<Quote> q;
  for (double w : {2.0, 4.0, 8.0}) q.push_back({w, price(VanillaCall{w}, x)});
  CalibrationOptions o;
  o.solver.T_max = 1000;
  const auto c = calibrate(x, q, CalibrationMethod::OT, o);
  REQUIRE(c.solver);
  CHECK(c.solver->transport_cost <= 1e-6);
  const std::vector<Quote> bad = {{4.0, 1.0}, {2.0, 2.0}};
  CHECK_THROWS_AS(calibrate(x, bad, CalibrationMethod::OT, o), Error);
  CHECK_THROWS_AS(calibrate(x, {}, CalibrationMethod::KL, o), Error);
}

TEST_CASE("kl calibration on the case study quotes") {
  const auto x = sample(Lognormal{1, 1}, 2000, 1);
  std::vector<Quote> q;
  for (int k = 1; k <= 3; ++k) {
    const double w = std::exp(double(k));
    q.push_back({w, target_from_surrogate(Relu{w}, Lognormal{2, 1})});
  }
  const auto c = calibrate(x, q, CalibrationMethod::KL);
  const auto& kl = std::get<KlSolution>(c.measure);
  for (double r : kl.residuals()) CHECK(std::abs(r) <= 1e-8);
  for (const auto& qq : q) {
    CHECK(price(VanillaCall{qq.omega}, kl) == doctest::Approx(qq.fbar).epsilon(1e-7));
  }
}

TEST_CASE("report layout and determinism") {
  const auto x = sample(Lognormal{1, 1}, 500, 1);
  const std::vector<NamedMeasure> ms = {{"Prior", x}};
  const auto r = report(case_study_options(), ms, Lognormal{2, 1});
  CHECK(r.rows.size() == 12);
  const auto& row = r.at("g2", 1, "Prior");
  const double ref = r.at("g2", 1, "Surrogate").price;
  CHECK(ref == doctest::Approx(4 * tail_probability(Lognormal{2, 1}, 2.7381)));
  CHECK(row.rel_error == doctest::Approx((row.price - ref) / ref));
  const auto csv = to_csv(r);
  CHECK(csv.rfind("option,param_set,method,price,rel_error\n", 0) == 0);
  CHECK(csv == to_csv(report(case_study_options(), ms, Lognormal{2, 1})));
  CHECK(to_json(r)["rows"].size() == 12);
  CHECK_THROWS_AS(r.at("g9", 1, "Prior"), Error);
}
