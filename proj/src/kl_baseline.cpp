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

#include "cot/kl_baseline.hpp"

#include <algorithm>
// pchip.hpp in Boost 1.74 calls isnan unqualified; fpclassify provides it.
#include <boost/math/special_functions/fpclassify.hpp>
#include <boost/math/interpolators/pchip.hpp>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>

#include "cot/numerics.hpp"

namespace cot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kMaxExponent = 700.0;

const numerics::QuadratureRule& check_rule() {
  static const auto rule = numerics::QuadratureRule::gauss_legendre(96, 48);
  return rule;
}

void require_continuous(const Prior1D& p) {
  if (p.is_discrete()) {
    fail(ErrorKind::Unsupported, "KL tilts need a prior with a density");
  }
}

double tilt_exponent(std::span<const double> omegas,
                     std::span<const double> lambdas, double y) {
  double s = 0;
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (y > omegas[k]) s += lambdas[k] * (y - omegas[k]);
  }
  return s;
}

// Normalised moments of the tilted prior on [lo, ymax].
struct TiltMoments {
  double log_z;
  std::vector<double> m1;                // E[(y - w_k)_+]
  std::vector<std::vector<double>> m2;   // E[(y - w_k)_+ (y - w_j)_+]
};

TiltMoments tilt_moments(const Prior1D& prior, std::span<const double> omegas,
                         std::span<const double> lambdas, double lo,
                         double ymax, bool second,
                         const numerics::QuadratureRule& rule) {
  const std::size_t K = omegas.size();
  std::vector<double> cuts;
  double c = 0;
  for (std::size_t k = 0; k < K; ++k) {
    if (omegas[k] > lo && omegas[k] < ymax) cuts.push_back(omegas[k]);
    c = std::max(c, tilt_exponent(omegas, lambdas, std::clamp(omegas[k], lo, ymax)));
  }
  c = std::max(c, tilt_exponent(omegas, lambdas, ymax));
  double smin = 0;
  for (double y : {ymax}) smin = std::min(smin, tilt_exponent(omegas, lambdas, y));
  for (std::size_t k = 0; k < K; ++k)
    smin = std::min(smin, tilt_exponent(omegas, lambdas, std::clamp(omegas[k], lo, ymax)));
  if (c > kMaxExponent || c - smin > 2 * kMaxExponent) {
    fail(ErrorKind::DivergentTilt, "tilt exponent exceeds the overflow guard");
  }
  auto weight = [&](double y) {
    const double p = prior.pdf(y);
    return p > 0 ? p * std::exp(tilt_exponent(omegas, lambdas, y) - c) : 0.0;
  };
  const double z = numerics::integrate_split(weight, lo, ymax, cuts, rule);
  if (!(z > 0) || !std::isfinite(z)) {
    fail(ErrorKind::NonFinite, "tilted normalising constant not positive");
  }
  TiltMoments out{std::log(z) + c, std::vector<double>(K), {}};
  for (std::size_t k = 0; k < K; ++k) {
    out.m1[k] = numerics::integrate_split(
                    [&](double y) {
                      return y > omegas[k] ? (y - omegas[k]) * weight(y) : 0.0;
                    },
                    lo, ymax, cuts, rule) /
                z;
  }
  if (second) {
    out.m2.assign(K, std::vector<double>(K));
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t j = k; j < K; ++j) {
        const double v =
            numerics::integrate_split(
                [&](double y) {
                  const double a = std::max(y - omegas[k], 0.0);
                  const double b = std::max(y - omegas[j], 0.0);
                  return a * b > 0 ? a * b * weight(y) : 0.0;
                },
                lo, ymax, cuts, rule) /
            z;
        out.m2[k][j] = out.m2[j][k] = v;
      }
    }
  }
  return out;
}

double domain_lo(const Prior1D& p) { return p.support_lo(); }

}  // namespace

double kl_default_ymax(const PriorSpec& prior) {
  return Prior1D(prior).quantile(1.0 - 1e-9);
}

KlSolution::KlSolution(const PriorSpec& prior,
                       std::variant<KlIndicator, KlRelu> tilt)
    : prior_(prior), tilt_(std::move(tilt)) {}

double KlSolution::lo() const {
  if (auto* t = std::get_if<KlIndicator>(&tilt_)) return t->a;
  return std::get<KlRelu>(tilt_).lo;
}

double KlSolution::hi() const {
  if (auto* t = std::get_if<KlIndicator>(&tilt_)) return t->b;
  return std::get<KlRelu>(tilt_).y_max;
}

double KlSolution::z() const {
  if (auto* t = std::get_if<KlIndicator>(&tilt_)) return t->mass;
  return std::exp(std::get<KlRelu>(tilt_).log_z);
}

double KlSolution::density(double y) const {
  if (y < lo() || y > hi()) return 0.0;
  const double p = prior_.pdf(y);
  if (auto* t = std::get_if<KlIndicator>(&tilt_)) return p / t->mass;
  const auto& r = std::get<KlRelu>(tilt_);
  if (p <= 0) return 0.0;
  return p * std::exp(tilt_exponent(r.omegas, r.lambdas, y) - r.log_z);
}

double KlSolution::expectation(const std::function<double(double)>& f,
                               std::vector<double> cuts) const {
  if (auto* r = std::get_if<KlRelu>(&tilt_)) {
    cuts.insert(cuts.end(), r->omegas.begin(), r->omegas.end());
  }
  return numerics::integrate_split(
      [&](double y) {
        const double d = density(y);
        return d > 0 ? f(y) * d : 0.0;
      },
      lo(), hi(), cuts);
}

std::vector<double> KlSolution::residuals() const {
  const auto* r = std::get_if<KlRelu>(&tilt_);
  if (!r) return {};
  const TiltMoments m = tilt_moments(prior_, r->omegas, r->lambdas, r->lo,
                                     r->y_max, false, check_rule());
  std::vector<double> out(r->omegas.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = m.m1[k] - r->targets[k];
  return out;
}

KlSolution kl_indicator(const PriorSpec& spec, double a, double b) {
  if (!(a <= b)) fail(ErrorKind::InvalidSpec, "interval needs a <= b");
  const Prior1D prior(spec);
  require_continuous(prior);
  const double mass = a > prior.quantile(0.5) ? prior.sf(a) - prior.sf(b)
                                              : prior.cdf(b) - prior.cdf(a);
  if (!(mass > 1e-300)) {
    fail(ErrorKind::ZeroMass, "prior puts no mass on the interval");
  }
  return KlSolution(spec, KlIndicator{a, b, mass});
}

KlSolution kl_relu_single(const PriorSpec& spec, double omega, double fbar,
                          std::optional<double> y_max) {
  const Prior1D prior(spec);
  require_continuous(prior);
  if (fbar < 0) fail(ErrorKind::NegativeTarget, "negative RELU target");
  const double ymax = y_max ? *y_max : kl_default_ymax(spec);
  const double lo = domain_lo(prior);
  if (!(ymax > omega)) {
    fail(ErrorKind::BracketFailure, "truncation point below the threshold");
  }
  const double w[1] = {omega};
  auto g = [&](double gamma) {
    const double l[1] = {gamma};
    return tilt_moments(prior, w, l, lo, ymax, false, numerics::default_rule())
               .m1[0] -
           fbar;
  };
  const double gmax = kMaxExponent / (ymax - omega);
  double hi = std::min(1.0, gmax), lo_g = -1.0;
  while (g(hi) < 0) {
    if (hi >= gmax) fail(ErrorKind::BracketFailure, "target above reachable range");
    hi = std::min(2 * hi, gmax);
  }
  while (g(lo_g) > 0) {
    if (lo_g < -1e12) fail(ErrorKind::BracketFailure, "target below reachable range");
    lo_g *= 2;
  }
  const double gamma =
      numerics::find_root_scalar(g, {lo_g, hi}, 1e-14 * (1 + fbar));
  const double l[1] = {gamma};
  const auto m = tilt_moments(prior, w, l, lo, ymax, false, numerics::default_rule());
  return KlSolution(spec, KlRelu{{omega}, {gamma}, {fbar}, m.log_z, lo, ymax});
}

KlSolution kl_relu_multi(const PriorSpec& spec, std::span<const double> omegas,
                         std::span<const double> fbars,
                         std::optional<double> y_max) {
  const Prior1D prior(spec);
  require_continuous(prior);
  if (omegas.empty() || omegas.size() != fbars.size()) {
    fail(ErrorKind::InvalidSpec, "need matching non-empty omegas and targets");
  }
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (fbars[k] < 0) fail(ErrorKind::NegativeTarget, "negative RELU target");
    if (k && !(omegas[k] > omegas[k - 1])) {
      fail(ErrorKind::InconsistentOrder, "thresholds must be increasing");
    }
  }
  const double ymax = y_max ? *y_max : kl_default_ymax(spec);
  const double lo = domain_lo(prior);
  const int K = static_cast<int>(omegas.size());
  auto lam_span = [](const Eigen::VectorXd& v) {
    return std::span<const double>(v.data(), v.size());
  };
  auto F = [&](const Eigen::VectorXd& lam) {
    Eigen::VectorXd r(K);
    try {
      const auto m = tilt_moments(prior, omegas, lam_span(lam), lo, ymax, false,
                                  numerics::default_rule());
      for (int k = 0; k < K; ++k) r[k] = m.m1[k] - fbars[k];
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::DivergentTilt) throw;
      r.setConstant(std::numeric_limits<double>::quiet_NaN());
    }
    return r;
  };
  auto J = [&](const Eigen::VectorXd& lam) {
    const auto m = tilt_moments(prior, omegas, lam_span(lam), lo, ymax, true,
                                numerics::default_rule());
    Eigen::MatrixXd jac(K, K);
    for (int k = 0; k < K; ++k)
      for (int j = 0; j < K; ++j) jac(k, j) = m.m2[k][j] - m.m1[k] * m.m1[j];
    return jac;
  };
  const double fmax = *std::max_element(fbars.begin(), fbars.end());
  Eigen::VectorXd lam;
  try {
    lam = numerics::newton_system(F, J, Eigen::VectorXd::Zero(K),
                                  1e-11 * (1 + fmax), 200)
              .x;
  } catch (const numerics::NewtonFailure& e) {
    throw Error(ErrorKind::DivergentTilt,
                std::string("tilt did not converge: ") + e.what());
  }
  const auto m = tilt_moments(prior, omegas, lam_span(lam), lo, ymax, false,
                              numerics::default_rule());
  return KlSolution(spec, KlRelu{{omegas.begin(), omegas.end()},
                                 {lam.data(), lam.data() + K},
                                 {fbars.begin(), fbars.end()},
                                 m.log_z,
                                 lo,
                                 ymax});
}

double kl_density(const KlSolution& s, double y) { return s.density(y); }

EmpiricalMeasure kl_sample(const KlSolution& s, std::size_t n,
                           std::uint64_t seed) {
  const Prior1D prior(s.prior());
  double a = s.lo(), b = s.hi();
  if (!std::isfinite(a)) a = prior.quantile(1e-12);
  if (!std::isfinite(b)) b = prior.quantile(1.0 - 1e-12);
  // Knots: half spread in prior quantile, half spread linearly.
  constexpr int kKnots = 2048;
  const double ua = prior.cdf(a), ub = prior.cdf(b);
  std::vector<double> knots;
  for (int i = 0; i < kKnots / 2; ++i) {
    const double t = static_cast<double>(i) / (kKnots / 2 - 1);
    knots.push_back(a + t * (b - a));
    const double q = prior.quantile(ua + t * (ub - ua));
    if (std::isfinite(q)) knots.push_back(std::clamp(q, a, b));
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  static const auto small = numerics::QuadratureRule::gauss_legendre(16, 1);
  std::vector<double> F{0.0}, Y{knots.front()};
  double acc = 0;
  for (std::size_t i = 1; i < knots.size(); ++i) {
    acc += numerics::integrate([&](double y) { return s.density(y); },
                               knots[i - 1], knots[i], small);
    if (acc > F.back()) {
      F.push_back(acc);
      Y.push_back(knots[i]);
    }
  }
  const double total = F.back();
  for (auto& v : F) v /= total;
  using boost::math::interpolators::pchip;
  auto inv = pchip<std::vector<double>>(std::move(F), std::move(Y));
  Rng rng(seed);
  std::vector<double> pts(n);
  for (auto& p : pts) p = std::clamp(inv(rng.uniform()), a, b);
  return EmpiricalMeasure(1, std::move(pts), {}, seed, "kl");
}

nlohmann::json to_json(const KlSolution& s) {
  if (auto* t = std::get_if<KlIndicator>(&s.tilt())) {
    return {{"kind", "indicator"}, {"a", t->a}, {"b", t->b}, {"mass", t->mass}};
  }
  const auto& r = std::get<KlRelu>(s.tilt());
  return {{"kind", "relu"},
          {"omegas", r.omegas},
          {"lambdas", r.lambdas},
          {"targets", r.targets},
          {"Z", std::exp(r.log_z)},
          {"log_Z", r.log_z},
          {"y_max", r.y_max},
          {"residuals", s.residuals()}};
}

}  // namespace cot
