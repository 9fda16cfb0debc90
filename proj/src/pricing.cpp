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

#include "cot/pricing.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "cot/error.hpp"
#include "cot/numerics.hpp"

namespace cot {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v)) {
    fail(ErrorKind::InvalidSpec, std::string(what) + " must be > 0");
  }
}

// Prior quantiles used as extra break points so that no panel of the
// mapped semi-infinite rule has to resolve the bulk of the mass.
std::vector<double> quantile_cuts(const Prior1D& p, double shift = 0.0) {
  std::vector<double> c;
  for (double q : {1e-10, 1e-6, 1e-3, 0.02, 0.1, 0.25, 0.5, 0.75, 0.9, 0.98,
                   1 - 1e-3, 1 - 1e-6, 1 - 1e-10}) {
    c.push_back(p.quantile(q) + shift);
  }
  return c;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

void validate(const OptionSpec& opt) {
  std::visit(overloaded{
                 [](const VanillaCall& o) { positive(o.omega, "strike"); },
                 [](const DownAndOutCall& o) {
                   positive(o.H0, "barrier H0");
                   positive(o.s, "strike");
                 },
                 [](const CashOrNothing& o) {
                   positive(o.C, "cash");
                   // s = 0 is allowed: it turns the option into a bond.
                   if (!(o.s >= 0)) fail(ErrorKind::InvalidSpec, "strike must be >= 0");
                 },
                 [](const AssetOrNothing& o) { positive(o.s, "strike"); },
             },
             opt);
}

double payoff(const OptionSpec& opt, double x) {
  return std::visit(
      overloaded{
          [&](const VanillaCall& o) { return std::max(x - o.omega, 0.0); },
          [&](const DownAndOutCall& o) { return x >= o.H0 ? std::max(x - o.s, 0.0) : 0.0; },
          [&](const CashOrNothing& o) { return x >= o.s ? o.C : 0.0; },
          [&](const AssetOrNothing& o) { return x >= o.s ? x : 0.0; },
      },
      opt);
}

std::string option_kind_name(const OptionSpec& opt) {
  return std::visit(overloaded{
                        [](const VanillaCall&) { return "vanilla"; },
                        [](const DownAndOutCall&) { return "down_and_out"; },
                        [](const CashOrNothing&) { return "cash_or_nothing"; },
                        [](const AssetOrNothing&) { return "asset_or_nothing"; },
                    },
                    opt);
}

std::vector<double> payoff_kinks(const OptionSpec& opt) {
  return std::visit(overloaded{
                        [](const VanillaCall& o) { return std::vector<double>{o.omega}; },
                        [](const DownAndOutCall& o) { return std::vector<double>{o.s, o.H0}; },
                        [](const CashOrNothing& o) { return std::vector<double>{o.s}; },
                        [](const AssetOrNothing& o) { return std::vector<double>{o.s}; },
                    },
                    opt);
}

double price(const OptionSpec& opt, const EmpiricalMeasure& m) {
  if (m.empty()) fail(ErrorKind::EmptyMeasure, "cannot price on an empty measure");
  if (m.dim() != 1) fail(ErrorKind::DimensionMismatch, "pricing needs a 1D measure");
  double s = 0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.weight(i) * payoff(opt, m.coord(i, 0));
  return s;
}

double price(const OptionSpec& opt, const MixedMeasure& m) {
  if (dimension(m.prior()) != 1) {
    fail(ErrorKind::DimensionMismatch, "pricing needs a 1D measure");
  }
  const Prior1D prior(m.prior());
  auto f = [&](double x) { return payoff(opt, x); };
  if (prior.is_discrete()) return m.expectation(f);
  double s = 0;
  for (const auto& a : m.atoms()) s += a.mass * f(a.loc);
  const auto kinks = payoff_kinks(opt);
  for (const auto& c : m.continuous()) {
    const double lo = std::max(c.lo, prior.support_lo());
    const double hi = std::min(c.hi, prior.support_hi());
    if (!(lo < hi)) continue;
    std::vector<double> cuts = quantile_cuts(prior);
    for (double k : kinks) cuts.push_back(k - c.shift);
    s += numerics::integrate_split(
        [&](double x) {
          const double d = prior.pdf(x);
          return d > 0 ? f(x + c.shift) * d : 0.0;
        },
        lo, hi, cuts);
  }
  return s;
}

double price(const OptionSpec& opt, const KlSolution& m) {
  return m.expectation([&](double y) { return payoff(opt, y); }, payoff_kinks(opt));
}

double price(const OptionSpec& opt, const PricingMeasure& m) {
  return std::visit([&](const auto& v) { return price(opt, v); }, m);
}

double price(const OptionSpec& opt, const PriorSpec& law) {
  if (const auto* ln = std::get_if<Lognormal>(&law)) return closed_form_price(opt, *ln);
  if (dimension(law) != 1) fail(ErrorKind::DimensionMismatch, "pricing needs a 1D law");
  const Prior1D p(law);
  if (p.is_discrete()) {
    double s = 0;
    for (std::size_t i = 0; i < p.atoms().size(); ++i) {
      s += p.atom_weights()[i] * payoff(opt, p.atoms()[i]);
    }
    return s;
  }
  auto cuts = quantile_cuts(p);
  for (double k : payoff_kinks(opt)) cuts.push_back(k);
  return numerics::integrate_split(
      [&](double x) {
        const double d = p.pdf(x);
        return d > 0 ? payoff(opt, x) * d : 0.0;
      },
      p.support_lo(), p.support_hi(), cuts);
}

double closed_form_price(const OptionSpec& opt, const Lognormal& prior) {
  const auto PE = [&](double a) { return partial_expectation(prior, a); };
  const auto tail = [&](double a) { return tail_probability(prior, a); };
  return std::visit(
      overloaded{
          [&](const VanillaCall& o) { return PE(o.omega) - o.omega * tail(o.omega); },
          [&](const DownAndOutCall& o) {
            const double a = std::max(o.H0, o.s);
            return PE(a) - o.s * tail(a);
          },
          [&](const CashOrNothing& o) { return o.C * tail(o.s); },
          [&](const AssetOrNothing& o) { return PE(o.s); },
      },
      opt);
}

double relative_error(double p, double reference) {
  if (reference == 0) return std::numeric_limits<double>::quiet_NaN();
  return (p - reference) / reference;
}

std::string method_name(CalibrationMethod m) {
  switch (m) {
    case CalibrationMethod::OT: return "Wasserstein";
    case CalibrationMethod::OTSmooth: return "SmoothWasserstein";
    case CalibrationMethod::KL: return "KL";
  }
  return "?";
}

PriorSpec fit_parametric(const EmpiricalMeasure& x) {
  if (x.dim() != 1) fail(ErrorKind::DimensionMismatch, "parametric fit needs 1D samples");
  if (x.size() < 2) fail(ErrorKind::DegenerateSample, "parametric fit needs two samples");
  bool positive = true;
  for (double v : x.points()) positive &= v > 0;
  double m = 0, s = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    m += x.weight(i) * (positive ? std::log(x.coord(i, 0)) : x.coord(i, 0));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = (positive ? std::log(x.coord(i, 0)) : x.coord(i, 0)) - m;
    s += x.weight(i) * v * v;
  }
  s = std::sqrt(s);
  if (!(s > 0)) fail(ErrorKind::DegenerateSample, "samples have zero spread");
  if (positive) return Lognormal{m, s};
  return Normal1D{m, s};
}

Calibration calibrate(const EmpiricalMeasure& prior, std::span<const Quote> quotes,
                      CalibrationMethod method, const CalibrationOptions& opts) {
  if (quotes.empty()) fail(ErrorKind::InvalidSpec, "no quotes");
  for (std::size_t k = 1; k < quotes.size(); ++k) {
    if (!(quotes[k].omega > quotes[k - 1].omega)) {
      throw Error(ErrorKind::InvalidSpec, "quote strikes must be strictly ascending",
                  static_cast<int>(k));
    }
  }
  if (method == CalibrationMethod::KL) {
    std::vector<double> ws, fs;
    for (const auto& q : quotes) {
      ws.push_back(q.omega);
      fs.push_back(q.fbar);
    }
    return {kl_relu_multi(fit_parametric(prior), ws, fs), std::nullopt};
  }
  std::vector<ConstraintSpec> cs;
  for (const auto& q : quotes) cs.push_back({Relu{q.omega}, q.fbar, opts.penalty});
  SolverConfig cfg = opts.solver;
  cfg.barrier.reset();
  if (method == CalibrationMethod::OTSmooth) {
    cfg.barrier = opts.smoothing.value_or(BarrierConfig{});
  }
  auto r = run(prior, cs, cfg);
  PricingMeasure m = r.y;
  return {std::move(m), std::move(r)};
}

std::vector<LabeledOption> case_study_options() {
  return {
      {"g1", 1, DownAndOutCall{20.0855, 1.6487}},
      {"g1", 2, DownAndOutCall{2.7183, 2.1170}},
      {"g2", 1, CashOrNothing{4.0, 2.7381}},
      {"g2", 2, CashOrNothing{4.0, 1.6487}},
      {"g3", 1, AssetOrNothing{7.3891}},
      {"g3", 2, AssetOrNothing{4.4817}},
  };
}

const PriceRow& PriceReport::at(const std::string& option, int param_set,
                                const std::string& method) const {
  for (const auto& r : rows) {
    if (r.option == option && r.param_set == param_set && r.method == method) return r;
  }
  fail(ErrorKind::InvalidSpec, "no report row " + option + "/" +
                                   std::to_string(param_set) + "/" + method);
}

PriceReport report(const std::vector<LabeledOption>& options,
                   const std::vector<NamedMeasure>& measures,
                   const PriorSpec& surrogate) {
  if (dimension(surrogate) != 1) fail(ErrorKind::DimensionMismatch, "surrogate must be 1D");
  PriceReport out;
  for (const auto& o : options) {
    validate(o.option);
    const double ref = price(o.option, surrogate);
    for (const auto& m : measures) {
      const double p = price(o.option, m.measure);
      out.rows.push_back({o.name, o.param_set, m.method, p, relative_error(p, ref)});
    }
    out.rows.push_back({o.name, o.param_set, "Surrogate", ref, 0.0});
  }
  return out;
}

std::string to_csv(const PriceReport& r) {
  std::ostringstream os;
  os << "option,param_set,method,price,rel_error\n";
  for (const auto& row : r.rows) {
    os << row.option << ',' << row.param_set << ',' << row.method << ','
       << num(row.price) << ',' << num(row.rel_error) << '\n';
  }
  return os.str();
}

nlohmann::json to_json(const PriceReport& r) {
  auto rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"option", row.option},
                    {"param_set", row.param_set},
                    {"method", row.method},
                    {"price", row.price},
                    {"rel_error", std::isfinite(row.rel_error) ? nlohmann::json(row.rel_error)
                                                               : nlohmann::json(nullptr)}});
  }
  return {{"rows", rows}};
}

nlohmann::json to_json(const OptionSpec& opt) {
  nlohmann::json j = std::visit(
      overloaded{
          [](const VanillaCall& o) { return nlohmann::json{{"omega", o.omega}}; },
          [](const DownAndOutCall& o) { return nlohmann::json{{"H0", o.H0}, {"s", o.s}}; },
          [](const CashOrNothing& o) { return nlohmann::json{{"C", o.C}, {"s", o.s}}; },
          [](const AssetOrNothing& o) { return nlohmann::json{{"s", o.s}}; },
      },
      opt);
  j["kind"] = option_kind_name(opt);
  return j;
}

OptionSpec option_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    fail(ErrorKind::ConfigError, "option: missing string key 'kind'");
  }
  const std::string kind = j["kind"];
  auto get = [&](const char* key) -> double {
    if (!j.contains(key) || !j[key].is_number()) {
      fail(ErrorKind::ConfigError, "option '" + kind + "': missing numeric key '" + key + "'");
    }
    return j[key].get<double>();
  };
  auto only = [&](std::set<std::string> allowed) {
    allowed.insert("kind");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (!allowed.count(it.key())) {
        fail(ErrorKind::ConfigError, "option '" + kind + "': unknown key '" + it.key() + "'");
      }
    }
  };
  OptionSpec o;
  if (kind == "vanilla") {
    only({"omega"});
    o = VanillaCall{get("omega")};
  } else if (kind == "down_and_out") {
    only({"H0", "s"});
    o = DownAndOutCall{get("H0"), get("s")};
  } else if (kind == "cash_or_nothing") {
    only({"C", "s"});
    o = CashOrNothing{get("C"), get("s")};
  } else if (kind == "asset_or_nothing") {
    only({"s"});
    o = AssetOrNothing{get("s")};
  } else {
    fail(ErrorKind::ConfigError, "option: unknown kind '" + kind + "'");
  }
  validate(o);
  return o;
}

}  // namespace cot
