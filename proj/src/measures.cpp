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

#include "cot/measures.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

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

bool spd(const Gaussian2D& g) {
  return g.cov[0] > 0 && g.cov[3] > 0 &&
         g.cov[0] * g.cov[3] - g.cov[1] * g.cov[2] > 0 &&
         std::fabs(g.cov[1] - g.cov[2]) <= 1e-12 * (g.cov[0] + g.cov[3]);
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

int dimension(const PriorSpec& spec) {
  return std::visit(overloaded{[](const Gaussian2D&) { return 2; },
                               [](const UniformDisk&) { return 2; },
                               [](const auto&) { return 1; }},
                    spec);
}

void validate(const PriorSpec& spec) {
  std::visit(
      overloaded{
          [](const Lognormal& p) {
            if (!(p.sigma > 0) || !std::isfinite(p.mu) ||
                !std::isfinite(p.sigma))
              fail(ErrorKind::InvalidSpec, "lognormal sigma must be > 0");
          },
          [](const Normal1D& p) {
            if (!(p.sigma > 0) || !std::isfinite(p.mu) ||
                !std::isfinite(p.sigma))
              fail(ErrorKind::InvalidSpec, "normal sigma must be > 0");
          },
          [](const Gaussian2D& p) {
            if (!spd(p))
              fail(ErrorKind::InvalidSpec, "covariance must be SPD");
          },
          [](const UniformDisk& p) {
            if (!(p.radius > 0))
              fail(ErrorKind::InvalidSpec, "disk radius must be > 0");
          },
          [](const Discrete1D& p) {
            if (p.atoms.empty())
              fail(ErrorKind::InvalidSpec, "discrete prior has no atoms");
            if (!p.weights.empty() && p.weights.size() != p.atoms.size())
              fail(ErrorKind::InvalidSpec, "atom/weight size mismatch");
            double s = 0;
            for (double w : p.weights) {
              if (!(w >= 0)) fail(ErrorKind::InvalidSpec, "negative weight");
              s += w;
            }
            if (!p.weights.empty() && !(s > 0))
              fail(ErrorKind::InvalidSpec, "weights sum to zero");
            for (double a : p.atoms)
              if (!std::isfinite(a))
                fail(ErrorKind::InvalidSpec, "atom not finite");
          }},
      spec);
}

std::string describe(const PriorSpec& spec) {
  return std::visit(
      overloaded{
          [](const Lognormal& p) {
            return "lognormal(" + fmt(p.mu) + "," + fmt(p.sigma) + ")";
          },
          [](const Normal1D& p) {
            return "normal(" + fmt(p.mu) + "," + fmt(p.sigma) + ")";
          },
          [](const Gaussian2D& p) {
            return "gaussian2d(" + fmt(p.mean[0]) + "," + fmt(p.mean[1]) +
                   ")";
          },
          [](const UniformDisk& p) {
            return "uniform_disk(" + fmt(p.radius) + ")";
          },
          [](const Discrete1D& p) {
            return "discrete(" + std::to_string(p.atoms.size()) + " atoms)";
          }},
      spec);
}

double Rng::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform(), u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double t = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(t);
  has_spare_ = true;
  return r * std::cos(t);
}

EmpiricalMeasure::EmpiricalMeasure(int dim, std::vector<double> points,
                                   std::vector<double> weights,
                                   std::uint64_t seed, std::string origin)
    : dim_(dim),
      points_(std::move(points)),
      weights_(std::move(weights)),
      seed_(seed),
      origin_(std::move(origin)) {
  if (dim_ != 1 && dim_ != 2) {
    fail(ErrorKind::DimensionMismatch, "dimension must be 1 or 2");
  }
  if (points_.size() % dim_ != 0) {
    fail(ErrorKind::DimensionMismatch, "point buffer not a multiple of dim");
  }
  const std::size_t n = size();
  if (weights_.empty()) {
    weights_.assign(n, n ? 1.0 / n : 0.0);
  } else {
    if (weights_.size() != n) {
      fail(ErrorKind::InvalidSpec, "weight count does not match points");
    }
    // Neumaier summation keeps 1/n weights exact to rounding for large n.
    double s = 0, comp = 0;
    for (double w : weights_) {
      if (!(w >= 0)) fail(ErrorKind::InvalidSpec, "negative weight");
      const double t = s + w;
      comp += std::fabs(s) >= w ? (s - t) + w : (w - t) + s;
      s = t;
    }
    s += comp;
    if (std::fabs(s - 1.0) > 1e-12) {
      fail(ErrorKind::InvalidSpec, "weights must sum to 1");
    }
  }
  for (double v : points_) {
    if (!std::isfinite(v)) fail(ErrorKind::NonFinite, "point not finite");
  }
}

EmpiricalMeasure sample(const PriorSpec& spec, std::size_t n,
                        std::uint64_t seed) {
  validate(spec);
  const int d = dimension(spec);
  std::vector<double> pts;
  pts.reserve(n * d);
  Rng rng(seed);
  std::visit(
      overloaded{
          [&](const Lognormal& p) {
            for (std::size_t i = 0; i < n; ++i)
              pts.push_back(std::exp(p.mu + p.sigma * rng.normal()));
          },
          [&](const Normal1D& p) {
            for (std::size_t i = 0; i < n; ++i)
              pts.push_back(p.mu + p.sigma * rng.normal());
          },
          [&](const Gaussian2D& p) {
            const double l11 = std::sqrt(p.cov[0]);
            const double l21 = p.cov[2] / l11;
            const double l22 = std::sqrt(p.cov[3] - l21 * l21);
            for (std::size_t i = 0; i < n; ++i) {
              const double z1 = rng.normal(), z2 = rng.normal();
              pts.push_back(p.mean[0] + l11 * z1);
              pts.push_back(p.mean[1] + l21 * z1 + l22 * z2);
            }
          },
          [&](const UniformDisk& p) {
            for (std::size_t i = 0; i < n; ++i) {
              const double s = rng.uniform();
              const double t = 2.0 * std::numbers::pi * rng.uniform();
              pts.push_back(p.radius * std::sqrt(s) * std::cos(t));
              pts.push_back(p.radius * std::sqrt(s) * std::sin(t));
            }
          },
          [&](const Discrete1D& p) {
            std::vector<double> cum(p.atoms.size());
            double s = 0;
            for (std::size_t j = 0; j < p.atoms.size(); ++j) {
              s += p.weights.empty() ? 1.0 : p.weights[j];
              cum[j] = s;
            }
            for (std::size_t i = 0; i < n; ++i) {
              const double u = rng.uniform() * s;
              auto it = std::upper_bound(cum.begin(), cum.end(), u);
              if (it == cum.end()) --it;
              pts.push_back(p.atoms[it - cum.begin()]);
            }
          }},
      spec);
  return EmpiricalMeasure(d, std::move(pts), {}, seed, describe(spec));
}

double pdf(const PriorSpec& spec, std::span<const double> y) {
  if (static_cast<int>(y.size()) != dimension(spec)) {
    fail(ErrorKind::DimensionMismatch, "point dimension does not match prior");
  }
  return std::visit(
      overloaded{
          [&](const Lognormal& p) {
            if (y[0] <= 0) return 0.0;
            const double z = (std::log(y[0]) - p.mu) / p.sigma;
            return numerics::normal_pdf(z) / (p.sigma * y[0]);
          },
          [&](const Normal1D& p) {
            return numerics::normal_pdf((y[0] - p.mu) / p.sigma) / p.sigma;
          },
          [&](const Gaussian2D& p) {
            const double a = p.cov[0], b = p.cov[1], d = p.cov[3];
            const double det = a * d - b * b;
            const double u = y[0] - p.mean[0], v = y[1] - p.mean[1];
            const double q = (d * u * u - 2 * b * u * v + a * v * v) / det;
            return std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(det));
          },
          [&](const UniformDisk& p) {
            const double r2 = y[0] * y[0] + y[1] * y[1];
            return r2 <= p.radius * p.radius
                       ? 1.0 / (std::numbers::pi * p.radius * p.radius)
                       : 0.0;
          },
          [&](const Discrete1D&) -> double {
            fail(ErrorKind::DomainError, "discrete prior has no density");
          }},
      spec);
}

double pdf(const PriorSpec& spec, double x) {
  return pdf(spec, std::span<const double>(&x, 1));
}

double cdf(const PriorSpec& spec, double x) {
  return std::visit(
      overloaded{
          [&](const Lognormal& p) {
            if (x <= 0) return 0.0;
            return numerics::normal_cdf((std::log(x) - p.mu) / p.sigma);
          },
          [&](const Normal1D& p) {
            return numerics::normal_cdf((x - p.mu) / p.sigma);
          },
          [&](const Discrete1D& p) {
            double s = 0, tot = 0;
            for (std::size_t j = 0; j < p.atoms.size(); ++j) {
              const double w = p.weights.empty() ? 1.0 : p.weights[j];
              tot += w;
              if (p.atoms[j] <= x) s += w;
            }
            return s / tot;
          },
          [&](const auto&) -> double {
            fail(ErrorKind::DimensionMismatch, "cdf needs a 1D prior");
          }},
      spec);
}

double partial_expectation(const Lognormal& p, double a) {
  const double mean = std::exp(p.mu + 0.5 * p.sigma * p.sigma);
  if (a <= 0) return mean;
  return mean * numerics::normal_cdf(
                    (p.mu + p.sigma * p.sigma - std::log(a)) / p.sigma);
}

double tail_probability(const Lognormal& p, double a) {
  if (a <= 0) return 1.0;
  return numerics::normal_cdf((p.mu - std::log(a)) / p.sigma);
}

double kde_bandwidth(const EmpiricalMeasure& m) {
  const std::size_t n = m.size();
  if (n < 2) fail(ErrorKind::DegenerateSample, "need at least two samples");
  const int d = m.dim();
  double s = 0;
  for (int k = 0; k < d; ++k) {
    double mean = 0;
    for (std::size_t i = 0; i < n; ++i) mean += m.coord(i, k);
    mean /= n;
    double var = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = m.coord(i, k) - mean;
      var += e * e;
    }
    s += std::sqrt(var / (n - 1));
  }
  s /= d;
  if (!(s > 0)) fail(ErrorKind::DegenerateSample, "zero sample spread");
  return s * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
}

KdeModel make_kde(const EmpiricalMeasure& m, double bandwidth) {
  KdeModel model;
  model.dim = m.dim();
  model.centers = m.points();
  model.weights = m.weights();
  model.bandwidth = bandwidth > 0 ? bandwidth : kde_bandwidth(m);
  return model;
}

double kde_density(const KdeModel& model, std::span<const double> y) {
  const int d = model.dim;
  if (static_cast<int>(y.size()) != d) {
    fail(ErrorKind::DimensionMismatch, "point dimension does not match KDE");
  }
  const double h = model.bandwidth;
  const double norm = std::pow(2 * std::numbers::pi * h * h, -0.5 * d);
  double s = 0;
  const std::size_t n = model.weights.size();
  for (std::size_t j = 0; j < n; ++j) {
    double r2 = 0;
    for (int k = 0; k < d; ++k) {
      const double e = y[k] - model.centers[j * d + k];
      r2 += e * e;
    }
    s += model.weights[j] * std::exp(-r2 / (2 * h * h));
  }
  return norm * s;
}

double empirical_expectation(
    const EmpiricalMeasure& m,
    const std::function<double(std::span<const double>)>& f) {
  if (m.empty()) fail(ErrorKind::EmptyMeasure, "empty measure");
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * f(m.point(i));
  return s;
}

void write_csv(std::ostream& os, const EmpiricalMeasure& m) {
  os << (m.dim() == 1 ? "x1\n" : "x1,x2\n");
  for (std::size_t i = 0; i < m.size(); ++i) {
    os << fmt(m.coord(i, 0));
    if (m.dim() == 2) os << ',' << fmt(m.coord(i, 1));
    os << '\n';
  }
}

void write_csv(const std::string& path, const EmpiricalMeasure& m) {
  std::ofstream os(path);
  if (!os) fail(ErrorKind::IoError, "cannot open " + path);
  write_csv(os, m);
  if (!os) fail(ErrorKind::IoError, "write failed for " + path);
}

EmpiricalMeasure read_csv(std::istream& is, const std::string& origin) {
  std::string line;
  if (!std::getline(is, line)) fail(ErrorKind::IoError, "missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  int d;
  if (line == "x1") {
    d = 1;
  } else if (line == "x1,x2") {
    d = 2;
  } else {
    fail(ErrorKind::IoError, "unexpected CSV header: " + line);
  }
  std::vector<double> pts;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const char* p = line.data();
    const char* end = p + line.size();
    for (int k = 0; k < d; ++k) {
      double v;
      auto [q, ec] = std::from_chars(p, end, v);
      if (ec != std::errc()) {
        fail(ErrorKind::IoError, "bad number on CSV row " + std::to_string(row));
      }
      pts.push_back(v);
      p = q;
      if (k + 1 < d) {
        if (p == end || *p != ',') {
          fail(ErrorKind::IoError, "missing column on CSV row " +
                                       std::to_string(row));
        }
        ++p;
      }
    }
    if (p != end) {
      fail(ErrorKind::IoError, "trailing data on CSV row " + std::to_string(row));
    }
  }
  return EmpiricalMeasure(d, std::move(pts), {}, 0, origin);
}

EmpiricalMeasure read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::IoError, "cannot open " + path);
  return read_csv(is, path);
}

// ---------------------------------------------------------------------------
// Prior1D

Prior1D::Prior1D(const PriorSpec& spec) : spec_(spec) {
  validate(spec_);
  if (dimension(spec_) != 1) {
    fail(ErrorKind::DimensionMismatch, "Prior1D needs a 1D prior");
  }
  if (auto* d = std::get_if<Discrete1D>(&spec_)) {
    std::vector<std::size_t> idx(d->atoms.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(),
              [&](auto a, auto b) { return d->atoms[a] < d->atoms[b]; });
    double tot = 0;
    for (auto i : idx) tot += d->weights.empty() ? 1.0 : d->weights[i];
    double scale = 1.0;
    for (auto i : idx) {
      const double x = d->atoms[i];
      const double w = (d->weights.empty() ? 1.0 : d->weights[i]) / tot;
      scale = std::max(scale, std::fabs(x));
      if (w == 0) continue;
      if (!atoms_.empty() && atoms_.back() == x) {
        weights_.back() += w;
      } else {
        atoms_.push_back(x);
        weights_.push_back(w);
      }
    }
    smear_ = 1e-9 * scale;
    for (int k = 0; k < 3; ++k) {
      prefix_[k].assign(atoms_.size() + 1, 0.0);
      for (std::size_t i = 0; i < atoms_.size(); ++i) {
        const double x = atoms_[i], h = smear_;
        // Exact k-th moment of the uniform cell.
        double mk = 1.0;
        if (k == 1) mk = x;
        if (k == 2) mk = x * x + h * h / 3.0;
        prefix_[k][i + 1] = prefix_[k][i] + weights_[i] * mk;
      }
    }
  }
}

double Prior1D::pdf(double x) const {
  if (!is_discrete()) return cot::pdf(spec_, x);
  const double h = smear_;
  auto lo = std::lower_bound(atoms_.begin(), atoms_.end(), x - h);
  double s = 0;
  for (auto it = lo; it != atoms_.end() && *it <= x + h; ++it) {
    s += weights_[it - atoms_.begin()] / (2 * h);
  }
  return s;
}

double Prior1D::cdf(double x) const {
  if (!is_discrete()) return cot::cdf(spec_, x);
  return mass(-kInf, x);
}

double Prior1D::sf(double x) const {
  if (auto* p = std::get_if<Normal1D>(&spec_)) {
    return numerics::normal_sf((x - p->mu) / p->sigma);
  }
  if (auto* p = std::get_if<Lognormal>(&spec_)) {
    if (x <= 0) return 1.0;
    return numerics::normal_sf((std::log(x) - p->mu) / p->sigma);
  }
  return mass(x, kInf);
}

double Prior1D::quantile(double u) const {
  if (u <= 0) return support_lo();
  if (u >= 1) return support_hi();
  if (auto* p = std::get_if<Normal1D>(&spec_)) {
    return p->mu + p->sigma * numerics::normal_quantile(u);
  }
  if (auto* p = std::get_if<Lognormal>(&spec_)) {
    return std::exp(p->mu + p->sigma * numerics::normal_quantile(u));
  }
  // Piecewise-linear inverse across the atom cells.
  double cum = 0;
  for (std::size_t i = 0; i < atoms_.size(); ++i) {
    if (cum + weights_[i] >= u) {
      const double t = weights_[i] > 0 ? (u - cum) / weights_[i] : 0.5;
      return atoms_[i] - smear_ + 2 * smear_ * t;
    }
    cum += weights_[i];
  }
  return atoms_.back() + smear_;
}

double Prior1D::support_lo() const {
  if (std::holds_alternative<Lognormal>(spec_)) return 0.0;
  if (is_discrete()) return atoms_.front() - smear_;
  return -kInf;
}

double Prior1D::support_hi() const {
  if (is_discrete()) return atoms_.back() + smear_;
  return kInf;
}

double Prior1D::mean() const { return moment(1, -kInf, kInf); }

double Prior1D::call(double w) const {
  return moment(1, w, kInf) - w * mass(w, kInf);
}

double Prior1D::moment(int k, double a, double b) const {
  if (!(a < b)) return 0.0;
  if (is_discrete()) return discrete_moment(k, a, b);
  if (auto* p = std::get_if<Normal1D>(&spec_)) {
    const double za = (a - p->mu) / p->sigma, zb = (b - p->mu) / p->sigma;
    // Mass via the tail that avoids cancellation.
    const double m0 = za > 0 ? numerics::normal_sf(za) - numerics::normal_sf(zb)
                             : numerics::normal_cdf(zb) - numerics::normal_cdf(za);
    if (k == 0) return m0;
    const double pa = std::isinf(za) ? 0.0 : numerics::normal_pdf(za);
    const double pb = std::isinf(zb) ? 0.0 : numerics::normal_pdf(zb);
    const double m = p->mu, s = p->sigma;
    if (k == 1) return m * m0 + s * (pa - pb);
    const double zpa = std::isinf(za) ? 0.0 : za * pa;
    const double zpb = std::isinf(zb) ? 0.0 : zb * pb;
    return m * m * m0 + 2 * m * s * (pa - pb) + s * s * (m0 + zpa - zpb);
  }
  const auto& p = std::get<Lognormal>(spec_);
  const double za = a <= 0 ? -kInf : (std::log(a) - p.mu) / p.sigma;
  const double zb = b <= 0 ? -kInf : (std::log(b) - p.mu) / p.sigma;
  const double ks = k * p.sigma;
  const double lo = za - ks, hi = zb - ks;
  const double m0 = lo > 0 ? numerics::normal_sf(lo) - numerics::normal_sf(hi)
                           : numerics::normal_cdf(hi) - numerics::normal_cdf(lo);
  return std::exp(k * p.mu + 0.5 * ks * ks) * m0;
}

double Prior1D::discrete_moment(int k, double a, double b) const {
  const double h = smear_;
  auto cell = [&](std::size_t i, double lo, double hi) {
    lo = std::max(lo, atoms_[i] - h);
    hi = std::min(hi, atoms_[i] + h);
    if (!(lo < hi)) return 0.0;
    const double dens = weights_[i] / (2 * h);
    switch (k) {
      case 0:
        return dens * (hi - lo);
      case 1:
        return dens * 0.5 * (hi * hi - lo * lo);
      default:
        return dens * (hi * hi * hi - lo * lo * lo) / 3.0;
    }
  };
  // Cells fully inside [a, b] come from prefix sums, the rest are clipped.
  const auto first = std::lower_bound(atoms_.begin(), atoms_.end(), a - h) -
                     atoms_.begin();
  const auto last = std::upper_bound(atoms_.begin(), atoms_.end(), b + h) -
                    atoms_.begin();
  if (first >= last) return 0.0;
  const auto full_lo = std::lower_bound(atoms_.begin() + first,
                                        atoms_.begin() + last, a + h) -
                       atoms_.begin();
  auto full_hi = std::upper_bound(atoms_.begin() + full_lo,
                                  atoms_.begin() + last, b - h) -
                 atoms_.begin();
  if (full_hi < full_lo) full_hi = full_lo;
  double s = prefix_[k][full_hi] - prefix_[k][full_lo];
  for (auto i = first; i < full_lo; ++i) s += cell(i, a, b);
  for (auto i = full_hi; i < last; ++i) s += cell(i, a, b);
  return s;
}

}  // namespace cot
