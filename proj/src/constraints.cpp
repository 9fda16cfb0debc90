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

#include "cot/constraints.hpp"

#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "cot/numerics.hpp"

namespace cot {

namespace {

constexpr double kGuard = 40.0;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

// 0.5 * (tanh(s) + 1) and its derivative in s.
double step(double s, double* ds) {
  if (s > kGuard) {
    *ds = 0;
    return 1.0;
  }
  if (s < -kGuard) {
    *ds = 0;
    return 0.0;
  }
  const double c = std::cosh(s);
  *ds = 0.5 / (c * c);
  return 0.5 * (std::tanh(s) + 1.0);
}

void check_dim(const ConstraintKind& kind, std::size_t n) {
  if (static_cast<int>(n) != dimension(kind)) {
    fail(ErrorKind::DimensionMismatch,
         "point dimension does not match constraint");
  }
}

}  // namespace

int dimension(const ConstraintKind& kind) {
  return std::visit(overloaded{[](const IndicatorOutsideDisk&) { return 2; },
                               [](const IndicatorOutsideHalfplane&) { return 2; },
                               [](const auto&) { return 1; }},
                    kind);
}

void validate(const ConstraintSpec& spec) {
  if (!std::isfinite(spec.fbar) || !std::isfinite(spec.lambda) ||
      spec.lambda < 0) {
    fail(ErrorKind::InvalidSpec, "constraint fbar/lambda invalid");
  }
  const bool is_relu = std::holds_alternative<Relu>(spec.kind);
  if (spec.fbar < 0 || (!is_relu && spec.fbar > 1)) {
    fail(ErrorKind::InvalidSpec,
         is_relu ? "relu target must be >= 0" : "indicator target must lie in [0, 1]");
  }
  std::visit(overloaded{
                 [](const IndicatorOutsideInterval& c) {
                   if (!(c.a <= c.b))
                     fail(ErrorKind::InvalidSpec, "interval needs a <= b");
                 },
                 [](const IndicatorOutsideDisk& c) {
                   if (!(c.radius > 0))
                     fail(ErrorKind::InvalidSpec, "disk radius must be > 0");
                 },
                 [](const auto&) {}},
             spec.kind);
}

double evaluate(const ConstraintKind& kind, std::span<const double> y) {
  check_dim(kind, y.size());
  return std::visit(
      overloaded{
          [&](const Relu& c) { return std::max(y[0] - c.omega, 0.0); },
          [&](const IndicatorOutsideInterval& c) {
            return (y[0] < c.a || y[0] > c.b) ? 1.0 : 0.0;
          },
          [&](const IndicatorOutsideDisk& c) {
            return y[0] * y[0] + y[1] * y[1] > c.radius * c.radius ? 1.0 : 0.0;
          },
          [&](const IndicatorOutsideHalfplane& c) {
            return y[0] < c.threshold ? 1.0 : 0.0;
          },
          [&](const Heaviside& c) { return y[0] >= c.x0 ? 1.0 : 0.0; }},
      kind);
}

double evaluate(const ConstraintKind& kind, double y) {
  return evaluate(kind, std::span<const double>(&y, 1));
}

double mollified(const ConstraintKind& kind, double eps,
                 std::span<const double> y, std::span<double> grad) {
  check_dim(kind, y.size());
  if (grad.size() != y.size()) {
    fail(ErrorKind::DimensionMismatch, "gradient buffer size mismatch");
  }
  if (eps == 0.0) {
    for (auto& g : grad) g = 0;
    return evaluate(kind, y);
  }
  if (!(eps > 0)) fail(ErrorKind::DomainError, "eps must be >= 0");
  return std::visit(
      overloaded{
          [&](const Relu& c) {
            const double s = (y[0] - c.omega) / eps;
            if (s > kGuard) {
              grad[0] = 1.0;
              return y[0] - c.omega;
            }
            if (s < -kGuard) {
              grad[0] = 0.0;
              return 0.0;
            }
            grad[0] = 1.0 / (1.0 + std::exp(-s));
            return s > 0 ? eps * (s + std::log1p(std::exp(-s)))
                         : eps * std::log1p(std::exp(s));
          },
          [&](const IndicatorOutsideInterval& c) {
            double d1, d2;
            const double v = step((c.a - y[0]) / eps, &d1) +
                             step((y[0] - c.b) / eps, &d2);
            grad[0] = (d2 - d1) / eps;
            return v;
          },
          [&](const IndicatorOutsideDisk& c) {
            double d;
            const double r2 = y[0] * y[0] + y[1] * y[1];
            const double v = step((r2 - c.radius * c.radius) / eps, &d);
            grad[0] = 2 * y[0] * d / eps;
            grad[1] = 2 * y[1] * d / eps;
            return v;
          },
          [&](const IndicatorOutsideHalfplane& c) {
            double d;
            const double v = step((c.threshold - y[0]) / eps, &d);
            grad[0] = -d / eps;
            grad[1] = 0.0;
            return v;
          },
          [&](const Heaviside& c) {
            double d;
            const double v = step((y[0] - c.x0) / eps, &d);
            grad[0] = d / eps;
            return v;
          }},
      kind);
}

double mollified(const ConstraintKind& kind, double eps, double y,
                 double* grad) {
  double g;
  const double v = mollified(kind, eps, std::span<const double>(&y, 1),
                             std::span<double>(&g, 1));
  if (grad) *grad = g;
  return v;
}

double residual(const ConstraintSpec& spec, const EmpiricalMeasure& m,
                double eps) {
  if (m.empty()) fail(ErrorKind::EmptyMeasure, "empty measure");
  check_dim(spec.kind, m.dim());
  double s = 0;
  double g[2];
  for (std::size_t i = 0; i < m.size(); ++i) {
    s += m.weight(i) *
         mollified(spec.kind, eps, m.point(i), std::span<double>(g, m.dim()));
  }
  return s - spec.fbar;
}

double target_from_surrogate(const ConstraintKind& kind,
                             const PriorSpec& surrogate) {
  if (dimension(kind) != 1) {
    fail(ErrorKind::Unsupported, "surrogate targets need a 1D constraint");
  }
  if (dimension(surrogate) != 1) {
    fail(ErrorKind::DimensionMismatch, "surrogate must be 1D");
  }
  validate(surrogate);
  if (auto* d = std::get_if<Discrete1D>(&surrogate)) {
    double s = 0, tot = 0;
    for (std::size_t j = 0; j < d->atoms.size(); ++j) {
      const double w = d->weights.empty() ? 1.0 : d->weights[j];
      s += w * evaluate(kind, d->atoms[j]);
      tot += w;
    }
    return s / tot;
  }
  if (auto* r = std::get_if<Relu>(&kind)) {
    if (auto* ln = std::get_if<Lognormal>(&surrogate)) {
      return partial_expectation(*ln, r->omega) -
             r->omega * tail_probability(*ln, r->omega);
    }
    const auto& nm = std::get<Normal1D>(surrogate);
    const double d = (nm.mu - r->omega) / nm.sigma;
    return nm.sigma * numerics::normal_pdf(d) +
           (nm.mu - r->omega) * numerics::normal_cdf(d);
  }
  // Indicator kinds: integrate the density over the active set.
  const Prior1D p(surrogate);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  if (auto* h = std::get_if<Heaviside>(&kind)) return p.mass(h->x0, kInf);
  const auto& iv = std::get<IndicatorOutsideInterval>(kind);
  return p.mass(-kInf, iv.a) + p.mass(iv.b, kInf);
}

nlohmann::json to_json(const ConstraintKind& kind) {
  return std::visit(
      overloaded{
          [](const Relu& c) {
            return nlohmann::json{{"kind", "relu"}, {"omega", c.omega}};
          },
          [](const IndicatorOutsideInterval& c) {
            return nlohmann::json{
                {"kind", "indicator_outside_interval"}, {"a", c.a}, {"b", c.b}};
          },
          [](const IndicatorOutsideDisk& c) {
            return nlohmann::json{{"kind", "indicator_outside_disk"},
                                  {"radius", c.radius}};
          },
          [](const IndicatorOutsideHalfplane& c) {
            return nlohmann::json{{"kind", "indicator_outside_halfplane"},
                                  {"threshold", c.threshold}};
          },
          [](const Heaviside& c) {
            return nlohmann::json{{"kind", "heaviside"}, {"x0", c.x0}};
          }},
      kind);
}

ConstraintKind constraint_kind_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    fail(ErrorKind::ConfigError, "constraint: missing string key 'kind'");
  }
  const std::string kind = j["kind"];
  auto num = [&](const char* key) -> double {
    if (!j.contains(key) || !j[key].is_number()) {
      fail(ErrorKind::ConfigError,
           "constraint '" + kind + "': missing numeric key '" + key + "'");
    }
    return j[key].get<double>();
  };
  auto only = [&](std::set<std::string> allowed) {
    allowed.insert("kind");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) {
        fail(ErrorKind::ConfigError,
             "constraint '" + kind + "': unknown key '" + it.key() + "'");
      }
    }
  };
  if (kind == "relu") {
    only({"omega"});
    return Relu{num("omega")};
  }
  if (kind == "indicator_outside_interval") {
    only({"a", "b"});
    return IndicatorOutsideInterval{num("a"), num("b")};
  }
  if (kind == "indicator_outside_disk") {
    only({"radius"});
    return IndicatorOutsideDisk{num("radius")};
  }
  if (kind == "indicator_outside_halfplane") {
    only({"threshold"});
    return IndicatorOutsideHalfplane{num("threshold")};
  }
  if (kind == "heaviside") {
    only({"x0"});
    return Heaviside{num("x0")};
  }
  fail(ErrorKind::ConfigError, "constraint: unknown kind '" + kind + "'");
}

}  // namespace cot
