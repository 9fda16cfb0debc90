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

#include "cot/analytic_ot.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numbers>
#include <optional>

#include "cot/numerics.hpp"

namespace cot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

bool same_action(const ShiftAction& a, const ShiftAction& b) {
  if (a.index() != b.index()) return false;
  if (auto* s = std::get_if<ConstantShift>(&a))
    return s->lambda == std::get<ConstantShift>(b).lambda;
  if (auto* p = std::get_if<ProjectTo>(&a))
    return p->w == std::get<ProjectTo>(b).w;
  return true;
}

// y = clamp(x + lam, wlo, whi) on [lo, hi), split into elementary pieces.
void clamp_pieces(std::vector<ShiftPiece>& out, double lo, double hi,
                  double lam, double wlo, double whi) {
  if (!(lo < hi)) return;
  const double a = wlo - lam, b = whi - lam;
  if (lo < std::min(hi, a)) out.push_back({lo, std::min(hi, a), ProjectTo{wlo}});
  const double s = std::max(lo, a), e = std::min(hi, b);
  if (s < e) out.push_back({s, e, ConstantShift{lam}});
  if (std::max(lo, b) < hi) out.push_back({std::max(lo, b), hi, ProjectTo{whi}});
}

double piece_cost(const ShiftPiece& p, const Prior1D& prior) {
  return std::visit(
      overloaded{[](const Identity&) { return 0.0; },
                 [&](const ConstantShift& s) {
                   return s.lambda * s.lambda * prior.mass(p.lo, p.hi);
                 },
                 [&](const ProjectTo& t) {
                   const double m0 = prior.mass(p.lo, p.hi);
                   const double m1 = prior.moment(1, p.lo, p.hi);
                   const double m2 = prior.moment(2, p.lo, p.hi);
                   return std::max(0.0, t.w * t.w * m0 - 2 * t.w * m1 + m2);
                 }},
      p.action);
}

double piece_relu(const ShiftPiece& p, const Prior1D& prior, double omega) {
  auto shifted = [&](double s) {
    const double lo = std::max(p.lo, omega - s);
    if (!(lo < p.hi)) return 0.0;
    return prior.moment(1, lo, p.hi) + (s - omega) * prior.mass(lo, p.hi);
  };
  return std::visit(
      overloaded{[&](const Identity&) { return shifted(0.0); },
                 [&](const ConstantShift& s) { return shifted(s.lambda); },
                 [&](const ProjectTo& t) {
                   return t.w > omega ? (t.w - omega) * prior.mass(p.lo, p.hi)
                                      : 0.0;
                 }},
      p.action);
}

double pieces_cost(const std::vector<ShiftPiece>& ps, const Prior1D& prior) {
  double c = 0;
  for (const auto& p : ps) c += piece_cost(p, prior);
  return c;
}

double prior_scale(const Prior1D& p) {
  const double q1 = p.quantile(0.01), q9 = p.quantile(0.99);
  return std::max(1.0, q9 - q1);
}

void check_targets(std::span<const double> omegas,
                   std::span<const double> fbars) {
  if (omegas.empty() || omegas.size() != fbars.size()) {
    fail(ErrorKind::InvalidSpec, "need matching non-empty omegas and targets");
  }
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    if (!std::isfinite(omegas[k]) || !std::isfinite(fbars[k])) {
      fail(ErrorKind::InvalidSpec, "non-finite threshold or target");
    }
    if (fbars[k] < 0) fail(ErrorKind::NegativeTarget, "negative RELU target");
    if (k > 0 && !(omegas[k] > omegas[k - 1])) {
      fail(ErrorKind::InconsistentOrder, "thresholds must be increasing");
    }
  }
}

// Smallest-cost candidate with ties broken by |lambda| then threshold.
struct Candidate {
  double lambda;
  double x;
  double cost;
  int system;
};

bool better(const Candidate& a, const Candidate& b) {
  const double tol = 1e-12 * std::max(1.0, std::fabs(b.cost));
  if (a.cost < b.cost - tol) return true;
  if (a.cost > b.cost + tol) return false;
  if (std::fabs(a.lambda) != std::fabs(b.lambda))
    return std::fabs(a.lambda) < std::fabs(b.lambda);
  return a.x < b.x;
}

// Root of an increasing g on [lo, inf) with g(lo) <= 0.
std::optional<double> increasing_root(const std::function<double(double)>& g,
                                      double lo, double step, double limit) {
  const double g0 = g(lo);
  if (g0 == 0) return lo;
  if (g0 > 0) return std::nullopt;
  double hi = lo + step;
  while (g(hi) < 0) {
    if (hi - lo > limit) return std::nullopt;
    step *= 2;
    hi = lo + step;
  }
  return numerics::find_root_scalar(g, {lo, hi}, 1e-15 * (1 + std::fabs(hi)));
}

// Root of an increasing g on (-inf, hi] with g(hi) >= 0.
std::optional<double> increasing_root_down(
    const std::function<double(double)>& g, double hi, double step,
    double limit) {
  const double g1 = g(hi);
  if (g1 == 0) return hi;
  if (g1 < 0) return std::nullopt;
  double lo = hi - step;
  while (g(lo) > 0) {
    if (hi - lo > limit) return std::nullopt;
    step *= 2;
    lo = hi - step;
  }
  return numerics::find_root_scalar(g, {lo, hi}, 1e-15 * (1 + std::fabs(lo)));
}

}  // namespace

double apply(const ShiftAction& a, double x) {
  return std::visit(overloaded{[&](const Identity&) { return x; },
                               [&](const ConstantShift& s) { return x + s.lambda; },
                               [&](const ProjectTo& t) { return t.w; }},
                    a);
}

ShiftMap::ShiftMap(std::vector<ShiftPiece> pieces) {
  for (auto& p : pieces) {
    if (std::isnan(p.lo) || std::isnan(p.hi)) {
      fail(ErrorKind::InvalidSpec, "NaN piece boundary");
    }
    if (!(p.lo < p.hi)) continue;
    if (auto* s = std::get_if<ConstantShift>(&p.action); s && s->lambda == 0) {
      p.action = Identity{};
    }
    if (!pieces_.empty()) {
      auto& last = pieces_.back();
      if (p.lo < last.hi) fail(ErrorKind::InvalidSpec, "overlapping pieces");
      if (p.lo == last.hi && same_action(p.action, last.action)) {
        last.hi = p.hi;
        continue;
      }
    }
    pieces_.push_back(p);
  }
}

double ShiftMap::operator()(double x) const {
  auto it = std::upper_bound(
      pieces_.begin(), pieces_.end(), x,
      [](double v, const ShiftPiece& p) { return v < p.hi; });
  if (it == pieces_.end() || x < it->lo) {
    fail(ErrorKind::CoverageGap, "point outside the map's domain");
  }
  return apply(it->action, x);
}

bool ShiftMap::covers(double lo, double hi) const {
  if (pieces_.empty()) return false;
  if (pieces_.front().lo > lo || pieces_.back().hi < hi) return false;
  for (std::size_t i = 1; i < pieces_.size(); ++i) {
    if (pieces_[i].lo != pieces_[i - 1].hi) return false;
  }
  return true;
}

bool ShiftMap::is_monotone() const {
  for (std::size_t i = 1; i < pieces_.size(); ++i) {
    const auto& a = pieces_[i - 1];
    const auto& b = pieces_[i];
    const double left = apply(a.action, a.hi);
    const double right = apply(b.action, b.lo);
    if (std::isfinite(left) && std::isfinite(right) &&
        left > right + 1e-12 * (1 + std::fabs(right))) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------
// MixedMeasure

MixedMeasure::MixedMeasure(const PriorSpec& prior,
                           std::vector<ContinuousPiece> continuous,
                           std::vector<Atom> atoms)
    : prior_(prior), continuous_(std::move(continuous)) {
  std::sort(atoms.begin(), atoms.end(),
            [](const Atom& a, const Atom& b) { return a.loc < b.loc; });
  for (const auto& a : atoms) {
    if (!atoms_.empty() && atoms_.back().loc == a.loc) {
      atoms_.back().mass += a.mass;
    } else {
      atoms_.push_back(a);
    }
  }
}

MixedMeasure MixedMeasure::from_map(const ShiftMap& map,
                                    const PriorSpec& prior) {
  const Prior1D p(prior);
  std::vector<ContinuousPiece> cont;
  std::vector<Atom> atoms;
  for (const auto& piece : map.pieces()) {
    std::visit(overloaded{[&](const Identity&) {
                            cont.push_back({piece.lo, piece.hi, 0.0});
                          },
                          [&](const ConstantShift& s) {
                            cont.push_back({piece.lo, piece.hi, s.lambda});
                          },
                          [&](const ProjectTo& t) {
                            atoms.push_back({t.w, p.mass(piece.lo, piece.hi)});
                          }},
               piece.action);
  }
  return MixedMeasure(prior, std::move(cont), std::move(atoms));
}

double MixedMeasure::total_mass() const {
  double m = 0;
  for (const auto& c : continuous_) m += prior_.mass(c.lo, c.hi);
  for (const auto& a : atoms_) m += a.mass;
  return m;
}

double MixedMeasure::expectation(const std::function<double(double)>& f) const {
  double s = 0;
  for (const auto& a : atoms_) s += a.mass * f(a.loc);
  for (const auto& c : continuous_) {
    if (prior_.is_discrete()) {
      const auto& xs = prior_.atoms();
      const double h = prior_.smear();
      for (std::size_t i = 0; i < xs.size(); ++i) {
        const double m = prior_.mass(std::max(c.lo, xs[i] - h),
                                     std::min(c.hi, xs[i] + h));
        if (m > 0) s += m * f(xs[i] + c.shift);
      }
      continue;
    }
    const double lo = std::max(c.lo, prior_.support_lo());
    const double hi = std::min(c.hi, prior_.support_hi());
    if (!(lo < hi)) continue;
    s += numerics::integrate(
        [&](double x) {
          const double d = prior_.pdf(x);
          return d > 0 ? f(x + c.shift) * d : 0.0;
        },
        lo, hi);
  }
  return s;
}

double MixedMeasure::density(double y) const {
  if (prior_.is_discrete()) return 0.0;
  double d = 0;
  for (const auto& c : continuous_) {
    const double x = y - c.shift;
    if (x >= c.lo && x < c.hi) d += prior_.pdf(x);
  }
  return d;
}

double MixedMeasure::cdf(double y) const {
  double s = 0;
  for (const auto& c : continuous_) {
    s += prior_.mass(c.lo, std::min(c.hi, y - c.shift));
  }
  for (const auto& a : atoms_) {
    if (a.loc <= y) s += a.mass;
  }
  return s;
}

EmpiricalMeasure MixedMeasure::sample(std::size_t n, std::uint64_t seed) const {
  std::vector<double> mass;
  for (const auto& c : continuous_) mass.push_back(prior_.mass(c.lo, c.hi));
  for (const auto& a : atoms_) mass.push_back(a.mass);
  std::vector<double> cum(mass.size());
  double tot = 0;
  for (std::size_t i = 0; i < mass.size(); ++i) cum[i] = (tot += mass[i]);
  Rng rng(seed);
  std::vector<double> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = rng.uniform() * tot;
    std::size_t j = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
    if (j >= cum.size()) j = cum.size() - 1;
    if (j >= continuous_.size()) {
      pts.push_back(atoms_[j - continuous_.size()].loc);
      continue;
    }
    const auto& c = continuous_[j];
    const double flo = prior_.cdf(c.lo);
    const double x = prior_.quantile(flo + rng.uniform() * mass[j]);
    pts.push_back(std::clamp(x, c.lo, std::nextafter(c.hi, c.lo)) + c.shift);
  }
  return EmpiricalMeasure(1, std::move(pts), {}, seed, "mixed");
}

// ---------------------------------------------------------------------------
// Moments of a map's pushforward

double relu_expectation(const ShiftMap& map, const Prior1D& prior,
                        double omega) {
  double s = 0;
  for (const auto& p : map.pieces()) s += piece_relu(p, prior, omega);
  return s;
}

double exact_cost(const ShiftMap& map, const Prior1D& prior) {
  return pieces_cost(map.pieces(), prior);
}

double transport_cost(const ShiftMap& map, const PriorSpec& spec) {
  const Prior1D prior(spec);
  if (!map.covers(prior.support_lo(), prior.support_hi())) {
    fail(ErrorKind::CoverageGap, "map does not cover the prior's support");
  }
  if (prior.is_discrete()) {
    double c = 0;
    for (std::size_t i = 0; i < prior.atoms().size(); ++i) {
      const double x = prior.atoms()[i];
      const double d = map(x) - x;
      c += prior.atom_weights()[i] * d * d;
    }
    return c;
  }
  double c = 0;
  for (const auto& p : map.pieces()) {
    if (std::holds_alternative<Identity>(p.action)) continue;
    const double lo = std::max(p.lo, prior.support_lo());
    const double hi = std::min(p.hi, prior.support_hi());
    if (!(lo < hi)) continue;
    c += numerics::integrate(
        [&](double x) {
          const double d = apply(p.action, x) - x;
          const double w = prior.pdf(x);
          return w > 0 ? d * d * w : 0.0;
        },
        lo, hi);
  }
  return c;
}

EmpiricalMeasure pushforward(const ShiftMap& map, const EmpiricalMeasure& m) {
  if (m.dim() != 1) {
    fail(ErrorKind::DimensionMismatch, "1D map applied to 2D samples");
  }
  std::vector<double> y(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) y[i] = map(m.coord(i, 0));
  return EmpiricalMeasure(1, std::move(y), m.weights(), m.seed(),
                          "pushforward:" + m.origin());
}

// ---------------------------------------------------------------------------
// Indicator on an interval

IndicatorSolution solve_indicator_interval(const PriorSpec& spec, double a,
                                           double b) {
  if (!(a <= b) || !std::isfinite(a) || !std::isfinite(b)) {
    fail(ErrorKind::InvalidSpec, "interval needs finite a <= b");
  }
  const Prior1D prior(spec);
  double c_a, c_b;
  if (prior.is_discrete()) {
    // The region is closed: atoms on the boundary stay inside.
    c_a = c_b = 0;
    for (std::size_t i = 0; i < prior.atoms().size(); ++i) {
      if (prior.atoms()[i] < a) c_a += prior.atom_weights()[i];
      if (prior.atoms()[i] > b) c_b += prior.atom_weights()[i];
    }
  } else {
    c_a = prior.cdf(a);
    c_b = prior.sf(b);
  }
  ShiftMap map({{-kInf, a, ProjectTo{a}},
                {a, b, Identity{}},
                {b, kInf, ProjectTo{b}}});
  MixedMeasure measure = MixedMeasure::from_map(map, spec);
  return {map, measure, c_a, c_b, exact_cost(map, prior)};
}

// ---------------------------------------------------------------------------
// Single RELU

namespace {

struct StageResult {
  std::vector<Candidate> candidates;
};

// Top stage: y = max(x + lam, omega) on [x, inf).
std::vector<Candidate> top_stage(const Prior1D& prior, double omega,
                                 double fbar, double limit) {
  std::vector<Candidate> out;
  const double scale = prior_scale(prior);
  const double p0 = prior.call(omega);
  auto band_cost = [&](double x) {
    // Mass in [omega, x) is mapped by lower stages to at best omega.
    if (!(x > omega)) return 0.0;
    std::vector<ShiftPiece> ps{{omega, x, ProjectTo{omega}}};
    return pieces_cost(ps, prior);
  };
  auto stage_cost = [&](double x, double lam) {
    std::vector<ShiftPiece> ps;
    clamp_pieces(ps, x, kInf, lam, omega, kInf);
    return pieces_cost(ps, prior) + band_cost(x);
  };
  // System 1: threshold omega - lam, E = C(omega - lam).
  {
    auto g = [&](double lam) { return prior.call(omega - lam) - fbar; };
    std::optional<double> lam;
    if (fbar >= p0) {
      lam = increasing_root(g, 0.0, scale, limit);
    } else {
      lam = increasing_root_down(g, 0.0, scale, limit);
    }
    if (lam) {
      const double x = omega - *lam;
      out.push_back({*lam, x, stage_cost(x, *lam), 1});
    }
  }
  // System 2: threshold omega - lam / 2, needs lam > 0.
  if (fbar > p0) {
    auto g = [&](double lam) {
      const double x = omega - 0.5 * lam;
      return prior.call(x) + 0.5 * lam * prior.sf(x) - fbar;
    };
    auto lam = increasing_root(g, 0.0, scale, limit);
    if (lam && *lam > 0) {
      const double x = omega - 0.5 * *lam;
      out.push_back({*lam, x, stage_cost(x, *lam), 2});
    }
  }
  return out;
}

}  // namespace

ReluSingleSolution solve_relu_single(const PriorSpec& spec, double omega,
                                     double fbar) {
  if (!std::isfinite(omega) || !std::isfinite(fbar)) {
    fail(ErrorKind::InvalidSpec, "non-finite threshold or target");
  }
  if (fbar < 0) fail(ErrorKind::NegativeTarget, "negative RELU target");
  const Prior1D prior(spec);
  if (fbar == 0) {
    // Everything above omega collapses onto omega.
    ShiftMap map({{-kInf, omega, Identity{}}, {omega, kInf, ProjectTo{omega}}});
    return {-kInf, omega, 1, map, MixedMeasure::from_map(map, spec),
            exact_cost(map, prior)};
  }
  const double limit = std::ldexp(1.0, 20) * (1.0 + prior_scale(prior));
  auto cands = top_stage(prior, omega, fbar, limit);
  if (cands.empty()) {
    fail(ErrorKind::NoFeasibleCandidate, "no admissible RELU candidate");
  }
  Candidate best = cands.front();
  for (const auto& c : cands) {
    if (better(c, best)) best = c;
  }
  std::vector<ShiftPiece> ps;
  clamp_pieces(ps, -kInf, best.x, 0.0, -kInf, omega);
  clamp_pieces(ps, best.x, kInf, best.lambda, omega, kInf);
  ShiftMap map(std::move(ps));
  return {best.lambda, best.x, best.system, map,
          MixedMeasure::from_map(map, spec), exact_cost(map, prior)};
}

// ---------------------------------------------------------------------------
// Multi RELU: stage-wise recursion

ReluMultiSolution solve_relu_recursion(const PriorSpec& spec,
                                       std::span<const double> omegas,
                                       std::span<const double> fbars) {
  check_targets(omegas, fbars);
  const Prior1D prior(spec);
  const int K = static_cast<int>(omegas.size());
  const double scale = prior_scale(prior);
  const double limit = std::ldexp(1.0, 20) * (omegas.back() - omegas.front() + 1.0) +
                       std::ldexp(1.0, 20) * scale;

  std::vector<double> lam(K), xs(K);
  std::vector<ReluRecursionState> states;
  // Round-off shifts would leave zero-mass bands and atoms behind.
  auto snap = [&](Candidate& c, double w) {
    if (std::fabs(c.lambda) <= 1e-12 * scale &&
        std::fabs(c.x - w) <= 2 * std::fabs(c.lambda) + 1e-15 * (1 + std::fabs(w))) {
      c.lambda = 0;
      c.x = w;
    }
  };
  {
    const double w = omegas[K - 1], f = fbars[K - 1];
    if (f == 0) {
      lam[K - 1] = -kInf;
      xs[K - 1] = kInf;
    } else {
      auto cands = top_stage(prior, w, f, limit);
      if (cands.empty()) {
        throw Error(ErrorKind::InfeasibleTargets,
                    "no candidate for stage " + std::to_string(K - 1), K - 1);
      }
      Candidate best = cands.front();
      for (const auto& c : cands) {
        if (better(c, best)) best = c;
      }
      snap(best, w);
      lam[K - 1] = best.lambda;
      xs[K - 1] = best.x;
    }
  }
  for (int k = K - 2; k >= 0; --k) {
    const double wk = omegas[k], wn = omegas[k + 1];
    const double dw = wn - wk;
    const double xn = xs[k + 1];
    const double dft = fbars[k] - fbars[k + 1] - dw * prior.mass(xn, kInf);
    states.push_back({k, xn, lam[k + 1], dw, dft});
    auto seg = [&](double x, double l) {
      std::vector<ShiftPiece> ps;
      clamp_pieces(ps, x, xn, l, wk, wn);
      return ps;
    };
    auto seg_value = [&](double x, double l) {
      double s = 0;
      for (const auto& p : seg(x, l)) {
        s += std::visit(
            overloaded{[](const Identity&) { return 0.0; },
                       [&](const ConstantShift& c) {
                         return prior.moment(1, p.lo, p.hi) +
                                (c.lambda - wk) * prior.mass(p.lo, p.hi);
                       },
                       [&](const ProjectTo& t) {
                         return (t.w - wk) * prior.mass(p.lo, p.hi);
                       }},
            p.action);
      }
      return s;
    };
    auto seg_cost = [&](double x, double l) {
      double c = pieces_cost(seg(x, l), prior);
      if (x > wk) {
        std::vector<ShiftPiece> band{{wk, std::min(x, xn), ProjectTo{wk}}};
        c += pieces_cost(band, prior);
      }
      return c;
    };
    std::vector<Candidate> cands;
    if (dft >= 0) {
      // Threshold omega_k - lam / 2 with lam >= 0.
      {
        const double lo = std::max(0.0, 2 * (wk - xn));
        auto g = [&](double l) { return seg_value(wk - 0.5 * l, l) - dft; };
        if (std::isfinite(lo)) {
          auto l = increasing_root(g, lo, scale, limit);
          if (l) cands.push_back({*l, wk - 0.5 * *l, seg_cost(wk - 0.5 * *l, *l), 2});
        }
      }
      // Threshold omega_k - lam.
      {
        const double lo = wk - xn;
        auto g = [&](double l) { return seg_value(wk - l, l) - dft; };
        if (std::isfinite(lo)) {
          auto l = increasing_root(g, lo, scale, limit);
          if (l) cands.push_back({*l, wk - *l, seg_cost(wk - *l, *l), 1});
        }
      }
      // Whole segment collapses onto omega_{k+1}.
      {
        const double need = dft / dw;
        const double below = prior.mass(-kInf, xn);
        if (need <= below && need > 0) {
          const double x = prior.quantile(below - need);
          if (x <= xn) {
            const double l = wn - x;
            cands.push_back({l, x, seg_cost(x, l), 5});
          }
        }
      }
    }
    std::optional<Candidate> best;
    for (const auto& c : cands) {
      if (!(c.x <= xn)) continue;
      const double err = std::fabs(seg_value(c.x, c.lambda) - dft);
      if (err > 1e-9 * (1 + std::fabs(fbars[k]))) continue;
      if (!best || better(c, *best)) best = c;
    }
    if (!best) {
      throw Error(ErrorKind::InfeasibleTargets,
                  "no candidate for stage " + std::to_string(k), k);
    }
    snap(*best, wk);
    lam[k] = best->lambda;
    xs[k] = best->x;
  }
  std::reverse(states.begin(), states.end());

  std::vector<ShiftPiece> ps;
  clamp_pieces(ps, -kInf, xs[0], 0.0, -kInf, omegas[0]);
  for (int k = 0; k < K; ++k) {
    const double hi = k + 1 < K ? xs[k + 1] : kInf;
    const double whi = k + 1 < K ? omegas[k + 1] : kInf;
    if (std::isfinite(lam[k])) clamp_pieces(ps, xs[k], hi, lam[k], omegas[k], whi);
  }
  if (xs[K - 1] == kInf && ps.back().hi < kInf) {
    ps.push_back({ps.back().hi, kInf, ProjectTo{omegas[K - 1]}});
  }
  ShiftMap map(std::move(ps));
  ReluMultiSolution sol{lam, xs, map, MixedMeasure::from_map(map, spec),
                        exact_cost(map, prior), "recursion", {}, states,
                        0.0, kInf};
  double worst = 0;
  int worst_k = 0;
  for (int k = 0; k < K; ++k) {
    const double r = relu_expectation(map, prior, omegas[k]) - fbars[k];
    sol.residuals.push_back(r);
    if (std::fabs(r) > worst) {
      worst = std::fabs(r);
      worst_k = k;
    }
  }
  if (worst > 1e-8 * (1 + *std::max_element(fbars.begin(), fbars.end())) ||
      !map.is_monotone()) {
    throw Error(ErrorKind::InfeasibleTargets,
                "recursion candidate violates constraint " +
                    std::to_string(worst_k),
                worst_k);
  }
  sol.recursion_cost = sol.cost;
  return sol;
}

// ---------------------------------------------------------------------------
// Multi RELU: joint stationarity conditions
//
// For shifts lam_1..lam_K (lam_0 = 0) every point is sent to the minimiser
// of (y - x)^2 - G(y), where G is continuous, piecewise linear with slope
// 2 lam_j on [omega_j, omega_{j+1}] and G(omega_1) = 0. The dual function
// D(lam) = cost - sum_k nu_k F_k with nu_k = 2 (lam_k - lam_{k-1}) is concave
// and its stationary points satisfy every constraint.

namespace {

struct Form {
  double a, b, c;   // value a x^2 + b x + c
  double lo, hi;    // validity in x
  ShiftAction action;
};

class JointProblem {
 public:
  JointProblem(const Prior1D& prior, std::span<const double> omegas,
               std::span<const double> fbars)
      : prior_(prior),
        w_(omegas.begin(), omegas.end()),
        f_(fbars.begin(), fbars.end()),
        K_(static_cast<int>(omegas.size())) {}

  int size() const { return K_; }

  ShiftMap envelope(const Eigen::VectorXd& lam) const {
    std::vector<double> G(K_ + 1, 0.0);  // G at omega_j, 0-based j
    for (int j = 1; j < K_; ++j) {
      G[j] = G[j - 1] + 2 * lam[j - 1] * (w_[j] - w_[j - 1]);
    }
    // Segment s = 0 is (-inf, omega_1], segment s >= 1 starts at omega_s.
    std::vector<std::vector<Form>> seg(K_ + 1);
    for (int s = 0; s <= K_; ++s) {
      const double l = s == 0 ? 0.0 : lam[s - 1];
      const double lo = s == 0 ? -kInf : w_[s - 1];
      const double hi = s == K_ ? kInf : w_[s];
      const double Glo = s == 0 ? 0.0 : G[s - 1];
      const double Ghi = s == K_ ? 0.0 : G[s];
      auto& fs = seg[s];
      if (std::isfinite(lo)) {
        fs.push_back({1.0, -2 * lo, lo * lo - Glo, -kInf, lo - l, ProjectTo{lo}});
      }
      if (s == 0) {
        fs.push_back({0.0, 0.0, 0.0, -kInf, hi, Identity{}});
      } else {
        fs.push_back({0.0, -2 * l, -l * l - Glo + 2 * l * lo, lo - l,
                      std::isfinite(hi) ? hi - l : kInf, ConstantShift{l}});
      }
      if (std::isfinite(hi)) {
        fs.push_back({1.0, -2 * hi, hi * hi - Ghi, hi - l, kInf, ProjectTo{hi}});
      }
    }
    std::vector<double> bp;
    std::vector<const Form*> all;
    for (const auto& fs : seg) {
      for (const auto& f : fs) {
        all.push_back(&f);
        if (std::isfinite(f.lo)) bp.push_back(f.lo);
        if (std::isfinite(f.hi)) bp.push_back(f.hi);
      }
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t j = i + 1; j < all.size(); ++j) {
        const double a = all[i]->a - all[j]->a;
        const double b = all[i]->b - all[j]->b;
        const double c = all[i]->c - all[j]->c;
        if (a == 0) {
          if (b != 0) bp.push_back(-c / b);
          continue;
        }
        const double disc = b * b - 4 * a * c;
        if (disc < 0) continue;
        const double q = -0.5 * (b + std::copysign(std::sqrt(disc), b));
        if (q != 0) bp.push_back(c / q);
        bp.push_back(q / a);
      }
    }
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    auto winner = [&](double x) {
      double best = kInf;
      const Form* arg = nullptr;
      for (const auto& fs : seg) {
        for (const auto& f : fs) {
          if (x < f.lo || x > f.hi) continue;
          const double v = (f.a * x + f.b) * x + f.c;
          if (v < best) {
            best = v;
            arg = &f;
          }
        }
      }
      return arg->action;
    };
    std::vector<ShiftPiece> ps;
    double lo = -kInf;
    for (std::size_t i = 0; i <= bp.size(); ++i) {
      const double hi = i < bp.size() ? bp[i] : kInf;
      double mid;
      if (!std::isfinite(lo) && !std::isfinite(hi)) {
        mid = 0;
      } else if (!std::isfinite(lo)) {
        mid = hi - 1 - std::fabs(hi);
      } else if (!std::isfinite(hi)) {
        mid = lo + 1 + std::fabs(lo);
      } else {
        mid = 0.5 * (lo + hi);
      }
      ps.push_back({lo, hi, winner(mid)});
      lo = hi;
    }
    return ShiftMap(std::move(ps));
  }

  Eigen::VectorXd residuals(const ShiftMap& map) const {
    Eigen::VectorXd F(K_);
    for (int k = 0; k < K_; ++k) F[k] = relu_expectation(map, prior_, w_[k]) - f_[k];
    return F;
  }

  // Returns D and fills the residuals and ascent gradient.
  double dual(const Eigen::VectorXd& lam, Eigen::VectorXd* F,
              Eigen::VectorXd* grad) const {
    const ShiftMap map = envelope(lam);
    *F = residuals(map);
    double D = exact_cost(map, prior_);
    for (int k = 0; k < K_; ++k) {
      const double nu = 2 * (lam[k] - (k ? lam[k - 1] : 0.0));
      D -= nu * (*F)[k];
    }
    if (grad) {
      grad->resize(K_);
      for (int k = 0; k < K_; ++k) {
        (*grad)[k] = -2 * (*F)[k] + (k + 1 < K_ ? 2 * (*F)[k + 1] : 0.0);
      }
    }
    return D;
  }

  std::optional<Eigen::VectorXd> solve(Eigen::VectorXd lam, double tol,
                                       double limit) const {
    Eigen::VectorXd F, g;
    double D = dual(lam, &F, &g);
    Eigen::VectorXd best = lam;
    double best_r = F.cwiseAbs().maxCoeff();
    for (int it = 0; it < 400; ++it) {
      const double r = F.cwiseAbs().maxCoeff();
      if (r < best_r) {
        best = lam;
        best_r = r;
      }
      if (r <= tol) return lam;
      if (lam.cwiseAbs().maxCoeff() > limit) return std::nullopt;
      Eigen::MatrixXd H(K_, K_);
      for (int j = 0; j < K_; ++j) {
        const double d = 1e-6 * (1 + std::fabs(lam[j]));
        Eigen::VectorXd lp = lam, lm = lam, Fp, Fm, gp, gm;
        lp[j] += d;
        lm[j] -= d;
        dual(lp, &Fp, &gp);
        dual(lm, &Fm, &gm);
        H.col(j) = (gp - gm) / (2 * d);
      }
      const Eigen::MatrixXd A = -0.5 * (H + H.transpose());
      Eigen::VectorXd dir;
      double mu = 0;
      const double base = std::max(1e-12, A.diagonal().cwiseAbs().maxCoeff());
      for (int tries = 0; tries < 40; ++tries) {
        Eigen::LLT<Eigen::MatrixXd> llt(A + mu * Eigen::MatrixXd::Identity(K_, K_));
        if (llt.info() == Eigen::Success) {
          dir = llt.solve(g);
          if (dir.allFinite() && dir.dot(g) > 0) break;
        }
        mu = mu == 0 ? 1e-10 * base : mu * 10;
        dir.resize(0);
      }
      if (dir.size() == 0) dir = g;
      double t = 1;
      bool moved = false;
      for (int h = 0; h < 60; ++h) {
        Eigen::VectorXd ln = lam + t * dir, Fn, gn;
        const double Dn = dual(ln, &Fn, &gn);
        const double rn = Fn.cwiseAbs().maxCoeff();
        const bool up = Dn >= D + 1e-4 * t * dir.dot(g);
        const bool flat = Dn >= D - 1e-12 * (1 + std::fabs(D)) && rn < r;
        if (std::isfinite(Dn) && (up || flat)) {
          lam = ln;
          F = Fn;
          g = gn;
          D = Dn;
          moved = true;
          break;
        }
        t *= 0.5;
      }
      if (!moved) break;
    }
    if (F.cwiseAbs().maxCoeff() < best_r) {
      best = lam;
      best_r = F.cwiseAbs().maxCoeff();
    }
    return polish(best, tol);
  }

  // Near a dual kink (an atom split across a jump) the ascent stalls while the
  // residuals are still visible; finish with damped Newton on |F| itself.
  std::optional<Eigen::VectorXd> polish(Eigen::VectorXd lam, double tol) const {
    Eigen::VectorXd F = residuals(envelope(lam));
    double r = F.norm();
    for (double step : {1e-7, 1e-9, 1e-11, 1e-13}) {
      for (int it = 0; it < 60 && F.cwiseAbs().maxCoeff() > tol; ++it) {
        Eigen::MatrixXd Jm(K_, K_);
        for (int j = 0; j < K_; ++j) {
          const double d = step * (1 + std::fabs(lam[j]));
          Eigen::VectorXd lp = lam, lm = lam;
          lp[j] += d;
          lm[j] -= d;
          Jm.col(j) = (residuals(envelope(lp)) - residuals(envelope(lm))) / (2 * d);
        }
        const Eigen::VectorXd dir =
            Jm.completeOrthogonalDecomposition().solve(-F);
        if (!dir.allFinite()) break;
        bool moved = false;
        for (double t = 1; t > 1e-6; t *= 0.5) {
          const Eigen::VectorXd ln = lam + t * dir;
          const Eigen::VectorXd Fn = residuals(envelope(ln));
          if (Fn.allFinite() && Fn.norm() < r) {
            lam = ln;
            F = Fn;
            r = Fn.norm();
            moved = true;
            break;
          }
        }
        if (!moved) break;
      }
    }
    return F.cwiseAbs().maxCoeff() <= 100 * tol ? std::optional(lam) : std::nullopt;
  }

 private:
  const Prior1D& prior_;
  std::vector<double> w_, f_;
  int K_;
};

// inf{x : T(x) >= w} for a monotone map.
double first_reaching(const ShiftMap& map, double w) {
  for (const auto& p : map.pieces()) {
    if (auto* t = std::get_if<ProjectTo>(&p.action)) {
      if (t->w >= w) return p.lo;
      continue;
    }
    const double s = std::holds_alternative<ConstantShift>(p.action)
                         ? std::get<ConstantShift>(p.action).lambda
                         : 0.0;
    const double x = std::max(p.lo, w - s);
    if (x < p.hi) return x;
  }
  return kInf;
}

}  // namespace

ReluMultiSolution solve_relu_multi(const PriorSpec& spec,
                                   std::span<const double> omegas,
                                   std::span<const double> fbars) {
  check_targets(omegas, fbars);
  const Prior1D prior(spec);
  const int K = static_cast<int>(omegas.size());
  std::optional<ReluMultiSolution> rec;
  int failed_k = K - 1;
  try {
    rec = solve_relu_recursion(spec, omegas, fbars);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::InfeasibleTargets) throw;
    failed_k = e.index();
  }

  const JointProblem jp(prior, omegas, fbars);
  Eigen::VectorXd lam0 = Eigen::VectorXd::Zero(K);
  if (rec) {
    for (int k = 0; k < K; ++k) {
      lam0[k] = std::isfinite(rec->lambdas[k]) ? rec->lambdas[k] : 0.0;
    }
  }
  const double fmax = *std::max_element(fbars.begin(), fbars.end());
  const double tol = 1e-11 * (1 + fmax);
  const double limit = std::ldexp(1.0, 20) * (omegas.back() - omegas.front() + 1.0 +
                                              prior_scale(prior));
  auto lam = jp.solve(lam0, tol, limit);
  if (!lam && rec) lam = jp.solve(Eigen::VectorXd::Zero(K), tol, limit);

  std::optional<ReluMultiSolution> joint;
  if (lam) {
    ShiftMap map = jp.envelope(*lam);
    ReluMultiSolution s{{lam->data(), lam->data() + K}, {}, map,
                        MixedMeasure::from_map(map, spec), exact_cost(map, prior),
                        "joint", {}, rec ? rec->states : std::vector<ReluRecursionState>{},
                        rec ? rec->cost : kInf, 0.0};
    s.joint_cost = s.cost;
    const Eigen::VectorXd F = jp.residuals(map);
    s.residuals.assign(F.data(), F.data() + K);
    for (int k = 0; k < K; ++k) s.thresholds.push_back(first_reaching(map, omegas[k]));
    if (F.cwiseAbs().maxCoeff() <= 1e-8 * (1 + fmax) && map.is_monotone()) {
      joint = std::move(s);
    }
  }
  if (!rec && !joint) {
    throw Error(ErrorKind::InfeasibleTargets,
                "targets not attainable; stage " + std::to_string(failed_k),
                failed_k);
  }
  if (rec && joint) {
    rec->joint_cost = joint->cost;
    joint->recursion_cost = rec->cost;
    const double tie = 1e-12 * std::max(1.0, rec->cost);
    if (joint->cost < rec->cost - tie) return *joint;
    return *rec;
  }
  return rec ? *rec : *joint;
}

// ---------------------------------------------------------------------------
// Two-dimensional regions

std::array<double, 2> RegionProjection::operator()(
    std::array<double, 2> z) const {
  if (region == Region2D::Halfplane) {
    return {std::max(z[0], radius), z[1]};
  }
  const double r = std::hypot(z[0], z[1]);
  if (r <= radius) return z;
  return {z[0] * radius / r, z[1] * radius / r};
}

bool RegionProjection::inside(std::array<double, 2> z) const {
  if (region == Region2D::Halfplane) return z[0] >= radius;
  return z[0] * z[0] + z[1] * z[1] <= radius * radius;
}

namespace {

const numerics::QuadratureRule& region_rule() {
  static const auto rule = numerics::QuadratureRule::gauss_legendre(48, 16);
  return rule;
}

const Gaussian2D& gaussian_prior(const PriorSpec& spec) {
  validate(spec);
  auto* g = std::get_if<Gaussian2D>(&spec);
  if (!g) fail(ErrorKind::Unsupported, "region solutions need a Gaussian2D prior");
  return *g;
}

double gauss_pdf(const Gaussian2D& g, double z1, double z2) {
  const double z[2] = {z1, z2};
  return pdf(PriorSpec(g), std::span<const double>(z, 2));
}

}  // namespace

double RegionSolution::boundary_density(double t) const {
  const double R = map.radius;
  if (map.region == Region2D::Disk) {
    return numerics::integrate(
        [&](double r) {
          return gauss_pdf(prior, r * std::cos(t), r * std::sin(t)) * r;
        },
        R, kInf);
  }
  return numerics::integrate([&](double z1) { return gauss_pdf(prior, z1, t); },
                             -kInf, R);
}

EmpiricalMeasure RegionSolution::pushforward(const EmpiricalMeasure& m) const {
  if (m.dim() != 2) {
    fail(ErrorKind::DimensionMismatch, "region map needs 2D samples");
  }
  std::vector<double> y(m.points());
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto z = map({y[2 * i], y[2 * i + 1]});
    y[2 * i] = z[0];
    y[2 * i + 1] = z[1];
  }
  return EmpiricalMeasure(2, std::move(y), m.weights(), m.seed(),
                          "pushforward:" + m.origin());
}

RegionSolution solve_indicator_disk(const PriorSpec& spec, double radius) {
  const Gaussian2D& g = gaussian_prior(spec);
  if (!(radius > 0)) fail(ErrorKind::InvalidSpec, "disk radius must be > 0");
  const auto& rule = region_rule();
  auto outer = [&](int power) {
    return numerics::integrate(
        [&](double t) {
          const double c = std::cos(t), s = std::sin(t);
          return numerics::integrate(
              [&](double r) {
                const double d = r - radius;
                return gauss_pdf(g, r * c, r * s) * r * (power ? d * d : 1.0);
              },
              radius, kInf, rule);
        },
        0.0, 2 * std::numbers::pi, rule);
  };
  return {g, {Region2D::Disk, radius}, outer(0), outer(2)};
}

RegionSolution solve_indicator_halfplane(const PriorSpec& spec,
                                         double threshold) {
  const Gaussian2D& g = gaussian_prior(spec);
  if (!std::isfinite(threshold)) fail(ErrorKind::InvalidSpec, "threshold not finite");
  const double m = g.mean[0], s = std::sqrt(g.cov[0]);
  auto marginal = [&](double z) { return numerics::normal_pdf((z - m) / s) / s; };
  const double alpha = numerics::integrate(marginal, -kInf, threshold);
  const double cost = numerics::integrate(
      [&](double z) {
        const double d = threshold - z;
        return d * d * marginal(z);
      },
      -kInf, threshold);
  return {g, {Region2D::Halfplane, threshold}, alpha, cost};
}

// ---------------------------------------------------------------------------
// Brute-force oracle

namespace {

class OracleDual {
 public:
  OracleDual(std::span<const double> atoms, std::span<const double> weights,
             std::span<const double> grid,
             std::span<const ConstraintSpec> cons)
      : n_(atoms.size()), m_(grid.size()), K_(cons.size()), w_(weights.begin(), weights.end()) {
    cost_.resize(n_ * m_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < m_; ++j) {
        const double d = atoms[i] - grid[j];
        cost_[i * m_ + j] = d * d;
      }
    fv_.resize(K_ * m_);
    for (std::size_t k = 0; k < K_; ++k) {
      fbar_.push_back(cons[k].fbar);
      for (std::size_t j = 0; j < m_; ++j) fv_[k * m_ + j] = evaluate(cons[k].kind, grid[j]);
    }
  }

  // Dual value; fills the supergradient and the argmin per atom.
  double value(const std::vector<double>& nu, std::vector<double>* sub,
               std::vector<std::size_t>* arg) const {
    std::vector<double> pen(m_, 0.0);
    for (std::size_t k = 0; k < K_; ++k)
      for (std::size_t j = 0; j < m_; ++j) pen[j] += nu[k] * fv_[k * m_ + j];
    double D = 0;
    if (sub) sub->assign(fbar_.begin(), fbar_.end());
    if (arg) arg->resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      double best = kInf;
      std::size_t bj = 0;
      for (std::size_t j = 0; j < m_; ++j) {
        const double v = cost_[i * m_ + j] - pen[j];
        if (v < best) {
          best = v;
          bj = j;
        }
      }
      D += w_[i] * best;
      if (sub)
        for (std::size_t k = 0; k < K_; ++k) (*sub)[k] -= w_[i] * fv_[k * m_ + bj];
      if (arg) (*arg)[i] = bj;
    }
    for (std::size_t k = 0; k < K_; ++k) D += nu[k] * fbar_[k];
    return D;
  }

  // Maximises over nu[k..] with nu[0..k) fixed.
  double maximise(std::vector<double>& nu, std::size_t k, double bound) const {
    if (k + 1 == K_) {
      std::vector<double> sub;
      double lo = -bound, hi = bound;
      nu[k] = lo;
      value(nu, &sub, nullptr);
      if (sub[k] < 0) {
        nu[k] = lo;
        return value(nu, nullptr, nullptr);
      }
      nu[k] = hi;
      value(nu, &sub, nullptr);
      if (sub[k] > 0) return value(nu, nullptr, nullptr);
      for (int it = 0; it < 200 && hi - lo > 1e-15 * bound; ++it) {
        nu[k] = 0.5 * (lo + hi);
        value(nu, &sub, nullptr);
        (sub[k] > 0 ? lo : hi) = nu[k];
      }
      double best = -kInf, arg = lo;
      for (double v : {lo, hi, 0.5 * (lo + hi)}) {
        nu[k] = v;
        const double d = value(nu, nullptr, nullptr);
        if (d > best) {
          best = d;
          arg = v;
        }
      }
      nu[k] = arg;
      return best;
    }
    const double phi = 0.5 * (std::sqrt(5.0) - 1);
    double a = -bound, b = bound;
    auto g = [&](double v) {
      nu[k] = v;
      return maximise(nu, k + 1, bound);
    };
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double gc = g(c), gd = g(d);
    for (int it = 0; it < 120 && b - a > 1e-13 * bound; ++it) {
      if (gc >= gd) {
        b = d;
        d = c;
        gd = gc;
        c = b - phi * (b - a);
        gc = g(c);
      } else {
        a = c;
        c = d;
        gc = gd;
        d = a + phi * (b - a);
        gd = g(d);
      }
    }
    const double v = gc >= gd ? c : d;
    return g(v);
  }

  std::size_t K() const { return K_; }

 private:
  std::size_t n_, m_, K_;
  std::vector<double> w_, cost_, fv_, fbar_;
};

}  // namespace

OracleResult brute_force_oracle(std::span<const double> atoms,
                                std::span<const double> weights,
                                std::span<const double> grid,
                                std::span<const ConstraintSpec> constraints) {
  if (atoms.empty() || atoms.size() > 200) {
    fail(ErrorKind::InvalidSpec, "oracle supports 1..200 atoms");
  }
  if (grid.empty() || grid.size() > 4000) {
    fail(ErrorKind::InvalidSpec, "oracle supports 1..4000 grid points");
  }
  if (!weights.empty() && weights.size() != atoms.size()) {
    fail(ErrorKind::InvalidSpec, "atom/weight size mismatch");
  }
  std::vector<double> w(atoms.size(), 1.0 / atoms.size());
  if (!weights.empty()) {
    double s = 0;
    for (double v : weights) s += v;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = weights[i] / s;
  }
  // A target at the edge of its range pins all mass to the grid points where
  // the constraint is extreme; such constraints are dropped from the dual.
  std::vector<std::size_t> keep(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) keep[j] = j;
  std::vector<ConstraintSpec> active;
  std::vector<double> pinned(constraints.size(), 0.0);
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const auto& c = constraints[k];
    if (dimension(c.kind) != 1) {
      fail(ErrorKind::DimensionMismatch, "oracle handles 1D constraints only");
    }
    double lo = kInf, hi = -kInf;
    for (double g : grid) {
      const double v = evaluate(c.kind, g);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (c.fbar < lo - 1e-12 || c.fbar > hi + 1e-12) {
      fail(ErrorKind::GridInfeasible, "target outside grid range");
    }
    const double edge_tol = 1e-12 * (1 + std::fabs(hi - lo));
    const bool at_lo = c.fbar <= lo + edge_tol, at_hi = c.fbar >= hi - edge_tol;
    if (!at_lo && !at_hi) {
      active.push_back(c);
      continue;
    }
    const double pin = at_lo ? lo : hi;
    pinned[k] = 1;
    std::erase_if(keep, [&](std::size_t j) {
      return std::fabs(evaluate(c.kind, grid[j]) - pin) > edge_tol;
    });
  }
  if (keep.empty()) fail(ErrorKind::GridInfeasible, "boundary targets incompatible on grid");
  std::vector<double> sub_grid;
  for (std::size_t j : keep) sub_grid.push_back(grid[j]);

  OracleDual dual(atoms, w, sub_grid, active);
  double span = 0;
  const auto [gmin, gmax] = std::minmax_element(sub_grid.begin(), sub_grid.end());
  const auto [amin, amax] = std::minmax_element(atoms.begin(), atoms.end());
  span = std::max(*gmax, *amax) - std::min(*gmin, *amin);
  double bound = 4 * (1 + span) * (1 + span);
  std::vector<double> nu(active.size(), 0.0);
  double best;
  if (active.empty()) {
    best = dual.value(nu, nullptr, nullptr);
  } else {
    best = dual.maximise(nu, 0, bound);
    // An optimum pinned to the box means the dual is unbounded.
    for (int grow = 0; grow < 6; ++grow) {
      bool edge = false;
      for (double v : nu) edge |= std::fabs(v) > 0.999 * bound;
      if (!edge) break;
      bound *= 16;
      best = dual.maximise(nu, 0, bound);
      if (grow == 5) fail(ErrorKind::GridInfeasible, "dual unbounded on grid");
    }
  }
  OracleResult out;
  out.cost = best;
  // Pinned constraints carry no finite multiplier.
  for (std::size_t k = 0, a = 0; k < constraints.size(); ++k) {
    out.multipliers.push_back(pinned[k] ? std::nan("") : nu[a++]);
  }
  dual.value(nu, nullptr, &out.assignment);
  for (auto& j : out.assignment) j = keep[j];
  return out;
}

// ---------------------------------------------------------------------------
// JSON export

namespace {

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

nlohmann::json to_json(const ShiftMap& map) {
  nlohmann::json pieces = nlohmann::json::array();
  for (const auto& p : map.pieces()) {
    nlohmann::json j;
    j["interval"] = {finite_or_null(p.lo), finite_or_null(p.hi)};
    std::visit(overloaded{[&](const Identity&) {
                            j["action"] = "identity";
                            j["params"] = nlohmann::json::object();
                          },
                          [&](const ConstantShift& s) {
                            j["action"] = "shift";
                            j["params"] = {{"lambda", s.lambda}};
                          },
                          [&](const ProjectTo& t) {
                            j["action"] = "project";
                            j["params"] = {{"w", t.w}};
                          }},
               p.action);
    pieces.push_back(j);
  }
  return pieces;
}

nlohmann::json to_json(const ShiftMap& map, const MixedMeasure& measure,
                       double cost) {
  nlohmann::json atoms = nlohmann::json::array();
  for (const auto& a : measure.atoms()) atoms.push_back({{"loc", a.loc}, {"mass", a.mass}});
  return {{"pieces", to_json(map)}, {"atoms", atoms}, {"cost", cost}};
}

nlohmann::json to_json(const RegionSolution& s) {
  return {{"region", s.map.region == Region2D::Disk ? "disk" : "halfplane"},
          {"radius", s.map.radius},
          {"alpha", s.alpha},
          {"cost", s.cost},
          {"prior_mean", s.prior.mean},
          {"prior_cov", s.prior.cov}};
}

}  // namespace cot
