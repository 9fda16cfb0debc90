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

#include "cot/numeric_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cot/error.hpp"

namespace cot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_domain_kind(const ConstraintKind& k) {
  return std::holds_alternative<IndicatorOutsideInterval>(k) ||
         std::holds_alternative<IndicatorOutsideDisk>(k) ||
         std::holds_alternative<IndicatorOutsideHalfplane>(k);
}

double sample_range(const EmpiricalMeasure& x) {
  double r = 0;
  for (int k = 0; k < x.dim(); ++k) {
    double lo = kInf, hi = -kInf;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lo = std::min(lo, x.coord(i, k));
      hi = std::max(hi, x.coord(i, k));
    }
    r = std::max(r, hi - lo);
  }
  return r > 0 ? r : 1.0;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

void validate(const SolverConfig& c) {
  auto bad = [](const std::string& m) { fail(ErrorKind::InvalidSpec, m); };
  if (c.eps0 && !(*c.eps0 > 0)) bad("eps0 must be > 0");
  if (!(c.beta > 1)) bad("beta must be > 1");
  if (c.J < 1) bad("J must be >= 1");
  if (c.T_max < 1) bad("T_max must be >= 1");
  if (c.tol && !(*c.tol > 0)) bad("tol must be > 0");
  if (!(c.armijo_alpha > 0 && c.armijo_alpha <= 0.5)) {
    bad("armijo_alpha must lie in (0, 0.5]");
  }
  if (!(c.delta >= 0)) bad("delta must be >= 0");
  if (!(c.eta0 > 0)) bad("eta0 must be > 0");
  if (c.bandwidth && !(*c.bandwidth > 0)) bad("bandwidth must be > 0");
  if (c.threads < 1) bad("threads must be >= 1");
  if (c.barrier) {
    const auto& b = *c.barrier;
    if (!(b.lambda_delta >= 0) || !(b.lambda_0 >= 0)) {
      bad("barrier weights must be >= 0");
    }
    if (!(b.t > 0)) bad("barrier t must be > 0");
    if (b.M_delta && !(*b.M_delta > 0)) bad("M_delta must be > 0");
    if (b.M_0 && !(*b.M_0 > 0)) bad("M_0 must be > 0");
    if (b.phi_eps && !(*b.phi_eps > 0)) bad("phi_eps must be > 0");
    if (b.domain && !is_domain_kind(*b.domain)) {
      bad("barrier domain must be an interval, disk or half-plane complement");
    }
  }
}

SolverConfig resolve_defaults(const SolverConfig& cfg,
                              const EmpiricalMeasure& x) {
  validate(cfg);
  if (x.empty()) fail(ErrorKind::EmptyMeasure, "no samples");
  SolverConfig c = cfg;
  const double range = sample_range(x);
  if (!c.eps0) c.eps0 = range / 4;
  if (!c.tol) c.tol = 1e-8 * range;
  if (!c.bandwidth && x.size() >= 2) c.bandwidth = kde_bandwidth(x);
  if (!c.backend) c.backend = kernels::default_backend();
  if (c.barrier) {
    auto& b = *c.barrier;
    if (!c.bandwidth) {
      fail(ErrorKind::InvalidSpec, "barriers need at least two samples");
    }
    if (!b.phi_eps) b.phi_eps = *c.bandwidth;
    if (!b.domain && b.lambda_0 > 0) {
      if (x.dim() != 1) {
        fail(ErrorKind::InvalidSpec, "barrier.domain is required in 2D");
      }
      std::vector<double> s(x.points());
      std::sort(s.begin(), s.end());
      const auto at = [&](double p) {
        return s[static_cast<std::size_t>(p * (s.size() - 1))];
      };
      b.domain = IndicatorOutsideInterval{at(0.01), at(0.99)};
    }
    if (b.domain && dimension(*b.domain) != x.dim()) {
      fail(ErrorKind::DimensionMismatch, "barrier domain dimension");
    }
  }
  return c;
}

struct Objective::Sums {
  std::vector<double> y0, y1;
};

Objective::Objective(const EmpiricalMeasure& x,
                     std::vector<ConstraintSpec> constraints, SolverConfig cfg)
    : n_(x.size()),
      dim_(x.dim()),
      x_(x.points()),
      constraints_(std::move(constraints)),
      cfg_(std::move(cfg)) {
  if (n_ == 0) fail(ErrorKind::EmptyMeasure, "no samples");
  for (std::size_t i = 0; i < n_; ++i) {
    if (std::abs(x.weight(i) * n_ - 1.0) > 1e-9) {
      fail(ErrorKind::InvalidSpec, "solver needs uniformly weighted samples");
    }
  }
  for (const auto& c : constraints_) {
    validate(c);
    if (dimension(c.kind) != dim_) {
      fail(ErrorKind::DimensionMismatch, "constraint dimension differs from x");
    }
  }
  backend_ = cfg_.backend.value_or(kernels::default_backend());
  if (cfg_.barrier) {
    if (n_ < 2) fail(ErrorKind::InvalidSpec, "barriers need n >= 2");
    if (!cfg_.bandwidth) cfg_.bandwidth = kde_bandwidth(x);
    if (!cfg_.barrier->phi_eps || (!cfg_.barrier->domain && cfg_.barrier->lambda_0 > 0)) {
      cfg_ = resolve_defaults(cfg_, x);
    }
    h_ = *cfg_.bandwidth;
  }
}

void Objective::pair_sums(std::span<const double> y, const double* w,
                          double* A, double* B, Sums& s) const {
  if (s.y0.empty()) {
    s.y0.resize(n_);
    if (dim_ == 2) s.y1.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      s.y0[i] = y[i * dim_];
      if (dim_ == 2) s.y1[i] = y[i * dim_ + 1];
    }
  }
  kernels::PairInput in{s.y0.data(), dim_ == 2 ? s.y1.data() : nullptr, w, n_,
                        1.0 / (2 * h_ * h_)};
  kernels::gauss_sums(backend_, in, A, B, B && dim_ == 2 ? B + n_ : nullptr,
                      cfg_.threads);
}

double Objective::phi(std::span<const double> yi, double* grad) const {
  double g[2] = {0, 0};
  const double v = mollified(*cfg_.barrier->domain, *cfg_.barrier->phi_eps, yi,
                             std::span<double>(g, dim_));
  for (int k = 0; k < dim_; ++k) grad[k] = -g[k];
  return 1.0 - v;
}

BarrierFunctionals Objective::functionals(std::span<const double> y) const {
  if (!cfg_.barrier) fail(ErrorKind::InvalidSpec, "barriers are disabled");
  if (y.size() != n_ * dim_) fail(ErrorKind::DimensionMismatch, "y size");
  const double cK = std::pow(2 * std::numbers::pi, -0.5 * dim_);
  const double hd = std::pow(h_, dim_);
  const double nd = static_cast<double>(n_);
  std::vector<double> w(n_, 1.0), A(n_);
  Sums s;
  pair_sums(y, w.data(), A.data(), nullptr, s);
  BarrierFunctionals f;
  double sumS = 0, gap = 0;
  double g[2];
  for (std::size_t i = 0; i < n_; ++i) {
    const double S = cK * A[i];
    sumS += S;
    if (cfg_.barrier->domain) {
      gap += phi(y.subspan(i * dim_, dim_), g) / (S * S);
    }
  }
  f.energy = sumS / (nd * nd * hd);
  f.gap = nd * hd * hd * gap;
  return f;
}

std::vector<double> Objective::residuals(std::span<const double> y,
                                         double eps) const {
  std::vector<double> r;
  double g[2];
  for (const auto& c : constraints_) {
    double m = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      m += mollified(c.kind, eps, y.subspan(i * dim_, dim_),
                     std::span<double>(g, dim_));
    }
    r.push_back(m / n_ - c.fbar);
  }
  return r;
}

double Objective::value(std::span<const double> y, double eps,
                        bool strict) const {
  if (y.size() != n_ * dim_) fail(ErrorKind::DimensionMismatch, "y size");
  double T = 0;
  for (std::size_t k = 0; k < y.size(); ++k) {
    const double d = y[k] - x_[k];
    T += d * d;
  }
  double L = T / n_;
  const auto r = residuals(y, eps);
  for (std::size_t k = 0; k < r.size(); ++k) {
    L += constraints_[k].lambda * r[k] * r[k];
  }
  if (cfg_.barrier) {
    const auto& b = *cfg_.barrier;
    if (!b.M_delta || !b.M_0) {
      fail(ErrorKind::InvalidSpec, "barrier bounds M_delta and M_0 unset");
    }
    const auto f = functionals(y);
    const double ad = *b.M_delta - f.energy;
    const double a0 = *b.M_0 - f.gap;
    if (b.lambda_delta > 0) {
      if (!(ad > 0)) {
        if (!strict) return kInf;
        fail(ErrorKind::BarrierInfeasible,
             "accumulation barrier: KDE energy " + fmt(f.energy) +
                 " >= M_delta " + fmt(*b.M_delta));
      }
      L -= b.lambda_delta / b.t * std::log(ad);
    }
    if (b.lambda_0 > 0) {
      if (!(a0 > 0)) {
        if (!strict) return kInf;
        fail(ErrorKind::BarrierInfeasible,
             "gap barrier: inverse-density sum " + fmt(f.gap) + " >= M_0 " +
                 fmt(*b.M_0));
      }
      L -= b.lambda_0 / b.t * std::log(a0);
    }
  }
  return L;
}

double Objective::value_grad(std::span<const double> y, double eps,
                             std::span<double> grad) const {
  if (grad.size() != n_ * dim_) {
    fail(ErrorKind::DimensionMismatch, "gradient size");
  }
  const double L = value(y, eps, true);
  const double nd = static_cast<double>(n_);
  for (std::size_t k = 0; k < y.size(); ++k) grad[k] = 2 * (y[k] - x_[k]) / nd;

  const auto r = residuals(y, eps);
  double g[2];
  for (std::size_t c = 0; c < constraints_.size(); ++c) {
    const double coef = 2 * constraints_[c].lambda * r[c] / nd;
    if (coef == 0) continue;
    for (std::size_t i = 0; i < n_; ++i) {
      mollified(constraints_[c].kind, eps, y.subspan(i * dim_, dim_),
                std::span<double>(g, dim_));
      for (int k = 0; k < dim_; ++k) grad[i * dim_ + k] += coef * g[k];
    }
  }

  if (!cfg_.barrier) return L;
  const auto& b = *cfg_.barrier;
  const bool use_d = b.lambda_delta > 0;
  const bool use_0 = b.lambda_0 > 0 && b.domain;
  if (!use_d && !use_0) return L;

  const double cK = std::pow(2 * std::numbers::pi, -0.5 * dim_);
  const double hd = std::pow(h_, dim_);
  const double h2 = h_ * h_;
  std::vector<double> ones(n_, 1.0), A(n_), B(n_ * dim_);
  Sums s;
  pair_sums(y, ones.data(), A.data(), B.data(), s);
  // B is stored coordinate-major: B[k * n + i].

  if (use_d) {
    double E = 0;
    for (std::size_t i = 0; i < n_; ++i) E += cK * A[i];
    E /= nd * nd * hd;
    const double scale = b.lambda_delta / b.t / (*b.M_delta - E);
    const double c = scale * 2 * cK / (nd * nd * hd * h2);
    for (std::size_t i = 0; i < n_; ++i) {
      for (int k = 0; k < dim_; ++k) grad[i * dim_ + k] += c * B[k * n_ + i];
    }
  }
  if (use_0) {
    std::vector<double> S(n_), ph(n_), dph(n_ * dim_), rr(n_);
    double G = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      S[i] = cK * A[i];
      ph[i] = phi(y.subspan(i * dim_, dim_), &dph[i * dim_]);
      G += ph[i] / (S[i] * S[i]);
      rr[i] = ph[i] / (S[i] * S[i] * S[i]);
    }
    G *= nd * hd * hd;
    std::vector<double> A2(n_), Br(n_ * dim_);
    pair_sums(y, rr.data(), A2.data(), Br.data(), s);
    const double scale = b.lambda_0 / b.t / (*b.M_0 - G);
    const double pre = nd * hd * hd;
    for (std::size_t i = 0; i < n_; ++i) {
      for (int k = 0; k < dim_; ++k) {
        const double dG =
            pre * (dph[i * dim_ + k] / (S[i] * S[i]) -
                   2 * cK / h2 * (Br[k * n_ + i] + rr[i] * B[k * n_ + i]));
        grad[i * dim_ + k] += scale * dG;
      }
    }
  }
  return L;
}

namespace {

SolverConfig for_objective(const EmpiricalMeasure& x, const SolverConfig& cfg) {
  SolverConfig c = cfg;
  validate(c);
  if (c.barrier && !c.bandwidth) c.bandwidth = kde_bandwidth(x);
  return c;
}

void check_pair(const EmpiricalMeasure& y, const EmpiricalMeasure& x) {
  if (y.dim() != x.dim() || y.size() != x.size()) {
    fail(ErrorKind::DimensionMismatch, "x and y differ in size or dimension");
  }
}

}  // namespace

double objective(const EmpiricalMeasure& y, const EmpiricalMeasure& x,
                 const std::vector<ConstraintSpec>& constraints,
                 const SolverConfig& cfg, double eps) {
  check_pair(y, x);
  const Objective obj(x, constraints, for_objective(x, cfg));
  return obj.value(y.points(), eps);
}

std::vector<double> gradient(const EmpiricalMeasure& y,
                             const EmpiricalMeasure& x,
                             const std::vector<ConstraintSpec>& constraints,
                             const SolverConfig& cfg, double eps) {
  check_pair(y, x);
  const Objective obj(x, constraints, for_objective(x, cfg));
  std::vector<double> g(y.points().size());
  obj.value_grad(y.points(), eps, g);
  return g;
}

ArmijoResult armijo_step(
    std::span<const double> y, std::span<const double> grad, double eta_prev,
    const SolverConfig& cfg,
    const std::function<double(std::span<const double>)>& L, double f0) {
  if (y.size() != grad.size()) fail(ErrorKind::DimensionMismatch, "grad size");
  if (!(eta_prev > 0)) fail(ErrorKind::DomainError, "eta_prev must be > 0");
  double g2 = 0;
  for (double g : grad) g2 += g * g;
  if (!(g2 > 0)) fail(ErrorKind::DomainError, "zero gradient");
  ArmijoResult res;
  res.y.resize(y.size());
  double eta = (1 + cfg.delta) * eta_prev;
  while (eta >= 1e-18) {
    for (std::size_t k = 0; k < y.size(); ++k) res.y[k] = y[k] - eta * grad[k];
    const double f = L(res.y);
    if (f < f0 && f <= f0 - cfg.armijo_alpha * eta * g2) {
      res.eta = eta;
      res.value = f;
      return res;
    }
    eta *= 0.5;
  }
  fail(ErrorKind::StepUnderflow,
       "line search step fell below 1e-18 without sufficient decrease");
}

std::pair<double, double> barrier_terms(const EmpiricalMeasure& y,
                                        const SolverConfig& cfg) {
  if (!cfg.barrier) fail(ErrorKind::InvalidSpec, "barriers are disabled");
  SolverConfig c = cfg;
  if (!c.bandwidth) c.bandwidth = kde_bandwidth(y);
  c = resolve_defaults(c, y);
  const auto& b = *c.barrier;
  if (!b.M_delta || !b.M_0) {
    fail(ErrorKind::InvalidSpec, "barrier bounds M_delta and M_0 unset");
  }
  const Objective obj(y, {}, c);
  const auto f = obj.functionals(y.points());
  if (!(*b.M_delta - f.energy > 0)) {
    fail(ErrorKind::BarrierInfeasible, "accumulation barrier: KDE energy " +
                                           fmt(f.energy) + " >= M_delta " +
                                           fmt(*b.M_delta));
  }
  if (!(*b.M_0 - f.gap > 0)) {
    fail(ErrorKind::BarrierInfeasible, "gap barrier: inverse-density sum " +
                                           fmt(f.gap) + " >= M_0 " +
                                           fmt(*b.M_0));
  }
  return {-std::log(*b.M_delta - f.energy), -std::log(*b.M_0 - f.gap)};
}

SolverResult run(const EmpiricalMeasure& x,
                 const std::vector<ConstraintSpec>& constraints,
                 const SolverConfig& cfg) {
  SolverResult res;
  SolverConfig c = resolve_defaults(cfg, x);
  if (c.barrier) {
    if (x.size() < 2) fail(ErrorKind::InvalidSpec, "barriers need n >= 2");
    const Objective probe(x, constraints, c);
    const auto f = probe.functionals(x.points());
    res.initial_functionals = f;
    auto& b = *c.barrier;
    auto settle = [&](std::optional<double>& M, double v, const char* name) {
      if (!M) {
        M = std::max(2 * v, 1e-12);
        return;
      }
      if (*M > v) return;
      if (!b.auto_raise) {
        fail(ErrorKind::BarrierInfeasible,
             std::string("initial samples violate ") + name + ": " + fmt(v) +
                 " >= " + fmt(*M));
      }
      M = 1.05 * v;
      res.warnings.push_back(std::string(name) + " raised to " + fmt(*M) +
                             " so that the initial samples are feasible");
    };
    settle(b.M_delta, f.energy, "M_delta");
    settle(b.M_0, f.gap, "M_0");
  }
  const Objective obj(x, constraints, c);
  res.resolved = obj.config();
  res.backend = std::string(kernels::backend_name(*c.backend));

  const std::size_t N = x.points().size();
  std::vector<double> y(x.points()), g(N);
  double eps = *c.eps0;
  double eta = c.eta0;
  for (int j = 0; j < c.J; ++j) {
    bool conv = false;
    for (int t = 0; t < c.T_max; ++t) {
      const double f0 = obj.value_grad(y, eps, g);
      double gn = 0;
      for (double v : g) gn += v * v;
      gn = std::sqrt(gn);
      if (gn == 0) {
        res.trace.push_back({j, t, eps, f0, 0.0, 0.0});
        conv = true;
        break;
      }
      ArmijoResult step;
      try {
        step = armijo_step(
            y, g, eta, c,
            [&](std::span<const double> z) { return obj.value(z, eps, false); },
            f0);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::StepUnderflow) throw;
        // Round-off floor: even the first trial step predicts a decrease the
        // objective cannot resolve in double precision.
        const double predicted = c.armijo_alpha * (1 + c.delta) * eta * gn * gn;
        if (predicted <= 64 * std::numeric_limits<double>::epsilon() *
                             std::max(1.0, std::abs(f0))) {
          res.trace.push_back({j, t, eps, f0, 0.0, gn});
          conv = true;
          break;
        }
        fail(ErrorKind::StepUnderflow, std::string(e.what()) + " (round " +
                                           std::to_string(j) + ", iteration " +
                                           std::to_string(t) + ")");
      }
      eta = step.eta;
      y = std::move(step.y);
      res.trace.push_back({j, t, eps, step.value, eta, gn});
      if (eta * gn < *c.tol) {
        conv = true;
        break;
      }
    }
    res.converged.push_back(conv);
    res.residuals.push_back(obj.residuals(y, 0.0));
    eps /= c.beta;
  }

  double T = 0;
  for (std::size_t k = 0; k < N; ++k) T += (y[k] - x.points()[k]) * (y[k] - x.points()[k]);
  res.transport_cost = T / x.size();
  res.y = EmpiricalMeasure(x.dim(), std::move(y), {}, x.seed(), "numeric");
  return res;
}

nlohmann::json to_json(const SolverConfig& c) {
  nlohmann::json j;
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  j["eps0"] = opt(c.eps0);
  j["beta"] = c.beta;
  j["J"] = c.J;
  j["T_max"] = c.T_max;
  j["tol"] = opt(c.tol);
  j["armijo_alpha"] = c.armijo_alpha;
  j["delta"] = c.delta;
  j["eta0"] = c.eta0;
  j["bandwidth"] = opt(c.bandwidth);
  j["threads"] = c.threads;
  j["backend"] = c.backend ? nlohmann::json(std::string(kernels::backend_name(*c.backend)))
                           : nlohmann::json(nullptr);
  if (c.barrier) {
    const auto& b = *c.barrier;
    j["barrier"] = {{"lambda_delta", b.lambda_delta},
                    {"lambda_0", b.lambda_0},
                    {"t", b.t},
                    {"M_delta", opt(b.M_delta)},
                    {"M_0", opt(b.M_0)},
                    {"domain", b.domain ? to_json(*b.domain) : nlohmann::json(nullptr)},
                    {"phi_eps", opt(b.phi_eps)},
                    {"auto_raise", b.auto_raise}};
  } else {
    j["barrier"] = nullptr;
  }
  return j;
}

nlohmann::json to_json(const SolverResult& r, std::size_t max_rows) {
  nlohmann::json j;
  const std::size_t m = r.trace.size();
  const std::size_t stride = max_rows == 0 ? 1 : (m + max_rows - 1) / std::max<std::size_t>(max_rows, 1);
  auto rows = nlohmann::json::array();
  for (std::size_t k = 0; k < m; k += std::max<std::size_t>(stride, 1)) {
    const auto& t = r.trace[k];
    rows.push_back({{"round", t.round}, {"iter", t.iter}, {"eps", t.eps},
                    {"objective", t.objective}, {"eta", t.eta},
                    {"grad_norm", t.grad_norm}});
  }
  j["trace"] = std::move(rows);
  j["trace_rows_total"] = m;
  j["residuals"] = r.residuals;
  j["converged"] = r.converged;
  j["transport_cost"] = r.transport_cost;
  j["config"] = to_json(r.resolved);
  j["initial_kde_energy"] = r.initial_functionals.energy;
  j["initial_gap"] = r.initial_functionals.gap;
  j["warnings"] = r.warnings;
  j["backend"] = r.backend;
  return j;
}

}  // namespace cot
