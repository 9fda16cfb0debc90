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

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "config.hpp"
#include "cot/analytic_ot.hpp"
#include "cot/kl_baseline.hpp"
#include "cot/pricing.hpp"
#include "output.hpp"

#ifndef COT_VERSION
#define COT_VERSION "0.0.0"
#endif

namespace cot::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kDensityPoints = 2048;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Run {
  RunConfig cfg;
  fs::path dir;
  json manifest;
  std::vector<std::string> warnings;

  void warn(std::string w) { warnings.push_back(std::move(w)); }
};

// Error line and manifest payload.
json error_json(const std::exception& e) {
  json j;
  if (const auto* ce = dynamic_cast<const Error*>(&e)) {
    j["error"] = std::string(error_kind_name(ce->kind()));
    j["message"] = ce->what();
    if (ce->index() >= 0) j["index"] = ce->index();
    if (ce->kind() == ErrorKind::ConfigError) {
      // "path: message" from the config reader.
      const std::string msg = ce->what();
      const auto colon = msg.find(": ");
      if (colon != std::string::npos && msg.find(' ') > colon) j["key"] = msg.substr(0, colon);
    }
  } else {
    j["error"] = "Internal";
    j["message"] = e.what();
  }
  return j;
}

bool completes_with_warning(const std::exception& e) {
  const auto* ce = dynamic_cast<const Error*>(&e);
  return ce && (ce->kind() == ErrorKind::InfeasibleTargets ||
                ce->kind() == ErrorKind::ZeroMass);
}

EmpiricalMeasure load_samples(const RunConfig& cfg) {
  if (cfg.prior.samples_path) return read_csv(*cfg.prior.samples_path);
  return sample(*cfg.prior.spec, cfg.prior.n, cfg.seed);
}

const PriorSpec& need_spec(const RunConfig& cfg, const char* what) {
  if (!cfg.prior.spec) {
    fail(ErrorKind::ConfigError, std::string("prior.spec: required for ") + what);
  }
  return *cfg.prior.spec;
}

std::string measure_csv(const EmpiricalMeasure& m) {
  std::ostringstream os;
  write_csv(os, m);
  return os.str();
}

void write_text(const Run& r, const std::string& name, const std::string& text) {
  write_atomic(r.dir / name, text);
}

template <class F>
std::string density_csv(const char* column, double lo, double hi, F&& density) {
  std::ostringstream os;
  os << column << ",density\n";
  for (int i = 0; i < kDensityPoints; ++i) {
    const double y = lo + (hi - lo) * i / (kDensityPoints - 1);
    os << fmt17(y) << ',' << fmt17(density(y)) << '\n';
  }
  return os.str();
}

void check_residuals(Run& r, const std::vector<ConstraintSpec>& cs,
                     const std::vector<double>& res, const std::string& label) {
  for (std::size_t k = 0; k < res.size() && k < cs.size(); ++k) {
    const double tol = r.cfg.residual_rtol * std::abs(cs[k].fbar) + r.cfg.residual_atol;
    if (!(std::abs(res[k]) <= tol)) {
      std::ostringstream os;
      os << label << "residual " << k << " = " << res[k] << " exceeds tolerance " << tol;
      r.warn(os.str());
    }
  }
}

bool all_relu(const std::vector<ConstraintSpec>& cs) {
  return !cs.empty() && std::all_of(cs.begin(), cs.end(), [](const ConstraintSpec& c) {
    return std::holds_alternative<Relu>(c.kind);
  });
}

void require_zero_target(const ConstraintSpec& c, const char* what) {
  if (c.fbar != 0.0) {
    fail(ErrorKind::Unsupported,
         std::string(what) + " has a closed form only for fbar = 0");
  }
}

// Numeric solver on samples.
void numeric(Run& r, json& out) {
  const auto cs = resolve_constraints(r.cfg);
  const EmpiricalMeasure x = load_samples(r.cfg);
  const auto t0 = Clock::now();
  const SolverResult res = cot::run(x, cs, r.cfg.solver);
  out["timings"]["solve_s"] = seconds_since(t0);
  write_text(r, "y.csv", measure_csv(res.y));
  write_text(r, "trace.json", to_json(res).dump(1) + "\n");
  out["resolved"]["solver"] = to_json(res.resolved);
  out["resolved"]["n"] = x.size();
  out["backend"] = res.backend;
  out["transport_cost"] = res.transport_cost;
  out["targets"] = json::array();
  for (const auto& c : cs) out["targets"].push_back(c.fbar);
  const auto final_res = res.residuals.empty() ? std::vector<double>{} : res.residuals.back();
  out["residuals"] = final_res;
  out["converged"] = res.converged;
  for (const auto& w : res.warnings) r.warn(w);
  check_residuals(r, cs, final_res, "");
}

void analytic(Run& r, json& out) {
  const PriorSpec& spec = need_spec(r.cfg, "analytic solutions");
  const auto cs = resolve_constraints(r.cfg);
  if (cs.empty()) fail(ErrorKind::ConfigError, "constraints: analytic needs at least one");
  out["targets"] = json::array();
  for (const auto& c : cs) out["targets"].push_back(c.fbar);

  if (dimension(spec) == 2) {
    if (cs.size() != 1) fail(ErrorKind::Unsupported, "2D closed forms take one constraint");
    RegionSolution s = [&] {
      if (const auto* d = std::get_if<IndicatorOutsideDisk>(&cs[0].kind)) {
        require_zero_target(cs[0], "indicator_outside_disk");
        return solve_indicator_disk(spec, d->radius);
      }
      if (const auto* h = std::get_if<IndicatorOutsideHalfplane>(&cs[0].kind)) {
        require_zero_target(cs[0], "indicator_outside_halfplane");
        return solve_indicator_halfplane(spec, h->threshold);
      }
      fail(ErrorKind::Unsupported, "no 2D closed form for this constraint");
    }();
    write_text(r, "solution.json", to_json(s).dump(1) + "\n");
    double lo = 0.0, hi = 2.0 * M_PI;
    if (s.map.region == Region2D::Halfplane) {
      const double sd = std::sqrt(s.prior.cov[3]);
      lo = s.prior.mean[1] - 6.0 * sd;
      hi = s.prior.mean[1] + 6.0 * sd;
    }
    write_text(r, "density.csv",
               density_csv("t", lo, hi, [&](double t) { return s.boundary_density(t); }));
    out["transport_cost"] = s.cost;
    out["residuals"] = json::array({0.0});
    return;
  }

  const Prior1D prior(spec);
  ShiftMap map;
  std::optional<MixedMeasure> measure;
  json sol;
  double cost = 0.0;
  std::vector<double> res;
  if (all_relu(cs)) {
    std::vector<double> omegas, fbars;
    for (const auto& c : cs) {
      omegas.push_back(std::get<Relu>(c.kind).omega);
      fbars.push_back(c.fbar);
    }
    if (cs.size() == 1) {
      auto s = solve_relu_single(spec, omegas[0], fbars[0]);
      sol = to_json(s.map, s.measure, s.cost);
      sol["lambda"] = s.lambda;
      sol["x_star"] = s.x_star;
      sol["system"] = s.system;
      map = s.map;
      measure = s.measure;
      cost = s.cost;
    } else {
      auto s = solve_relu_multi(spec, omegas, fbars);
      sol = to_json(s.map, s.measure, s.cost);
      sol["lambdas"] = s.lambdas;
      sol["thresholds"] = s.thresholds;
      sol["route"] = s.route;
      map = s.map;
      measure = s.measure;
      cost = s.cost;
    }
    for (std::size_t k = 0; k < cs.size(); ++k) {
      res.push_back(relu_expectation(map, prior, omegas[k]) - fbars[k]);
    }
  } else if (cs.size() == 1 && std::holds_alternative<IndicatorOutsideInterval>(cs[0].kind)) {
    const auto& iv = std::get<IndicatorOutsideInterval>(cs[0].kind);
    require_zero_target(cs[0], "indicator_outside_interval");
    auto s = solve_indicator_interval(spec, iv.a, iv.b);
    sol = to_json(s.map, s.measure, s.cost);
    sol["c_a"] = s.c_a;
    sol["c_b"] = s.c_b;
    map = s.map;
    measure = s.measure;
    cost = s.cost;
    const ConstraintKind kind = cs[0].kind;
    res.push_back(s.measure.expectation([&](double y) { return evaluate(kind, y); }) -
                  cs[0].fbar);
  } else {
    fail(ErrorKind::Unsupported,
         "analytic solutions cover relu lists and a single indicator_outside_interval");
  }
  write_text(r, "solution.json", sol.dump(1) + "\n");
  double lo = map(prior.quantile(1e-4)), hi = map(prior.quantile(1.0 - 1e-4));
  for (const auto& a : measure->atoms()) {
    lo = std::min(lo, a.loc);
    hi = std::max(hi, a.loc);
  }
  write_text(r, "density.csv",
             density_csv("y", lo, hi, [&](double y) { return measure->density(y); }));
  out["transport_cost"] = cost;
  out["residuals"] = res;
  check_residuals(r, cs, res, "");
}

KlSolution solve_kl(Run& r, const PriorSpec& spec, const std::vector<ConstraintSpec>& cs,
                    json& out) {
  if (all_relu(cs)) {
    std::vector<double> omegas, fbars;
    for (const auto& c : cs) {
      omegas.push_back(std::get<Relu>(c.kind).omega);
      fbars.push_back(c.fbar);
    }
    const double y_max = r.cfg.kl_y_max.value_or(kl_default_ymax(spec));
    out["resolved"]["kl_y_max"] = y_max;
    const double cut = Prior1D(spec).sf(y_max);
    if (cut > 1e-6) {
      std::ostringstream os;
      os << "KL domain capped at y_max = " << y_max << " drops prior mass " << cut;
      r.warn(os.str());
    }
    return kl_relu_multi(spec, omegas, fbars, y_max);
  }
  if (cs.size() == 1 && std::holds_alternative<IndicatorOutsideInterval>(cs[0].kind)) {
    require_zero_target(cs[0], "indicator_outside_interval");
    const auto& iv = std::get<IndicatorOutsideInterval>(cs[0].kind);
    return kl_indicator(spec, iv.a, iv.b);
  }
  fail(ErrorKind::Unsupported,
       "KL solutions cover relu lists and a single indicator_outside_interval");
}

void kl(Run& r, json& out) {
  PriorSpec spec;
  if (r.cfg.prior.spec) {
    spec = *r.cfg.prior.spec;
  } else {
    spec = fit_parametric(load_samples(r.cfg));
    out["resolved"]["prior_fit"] = to_json(spec);
  }
  if (dimension(spec) != 1) fail(ErrorKind::Unsupported, "KL solutions are 1D only");
  const auto cs = resolve_constraints(r.cfg);
  if (cs.empty()) fail(ErrorKind::ConfigError, "constraints: kl needs at least one");
  out["targets"] = json::array();
  for (const auto& c : cs) out["targets"].push_back(c.fbar);
  const KlSolution s = solve_kl(r, spec, cs, out);
  write_text(r, "solution.json", to_json(s).dump(1) + "\n");
  const Prior1D prior(spec);
  const double lo = std::max(s.lo(), prior.quantile(1e-6));
  const double hi = std::min(s.hi(), prior.quantile(1.0 - 1e-6));
  write_text(r, "density.csv", density_csv("y", lo, hi, [&](double y) { return s.density(y); }));
  std::vector<double> res = s.residuals();
  if (res.empty()) res.push_back(0.0);
  out["residuals"] = res;
  check_residuals(r, cs, res, "");
}

const PricingConfig& need_pricing(const RunConfig& cfg) {
  if (!cfg.pricing) fail(ErrorKind::ConfigError, "pricing: missing required key");
  if (!cfg.pricing->surrogate) {
    fail(ErrorKind::ConfigError, "pricing.surrogate: missing required key");
  }
  return *cfg.pricing;
}

void write_report(Run& r, const PriceReport& rep) {
  write_text(r, "prices.csv", to_csv(rep));
  std::ostringstream os;
  os << "option,param_set,method,rel_error\n";
  char buf[32];
  for (const auto& row : rep.rows) {
    if (row.method == "Surrogate") continue;
    std::snprintf(buf, sizeof buf, "%.10g", row.rel_error);
    os << row.option << ',' << row.param_set << ',' << row.method << ',' << buf << '\n';
  }
  write_text(r, "errors.csv", os.str());
}

void price_cmd(Run& r, json& out) {
  const PricingConfig& p = need_pricing(r.cfg);
  const EmpiricalMeasure x = load_samples(r.cfg);
  if (x.dim() != 1) fail(ErrorKind::DimensionMismatch, "pricing needs a 1D prior");
  out["resolved"]["n"] = x.size();
  const auto rep = report(p.options, {{"Prior", x}}, *p.surrogate);
  write_report(r, rep);
}

void compare_cmd(Run& r, json& out) {
  const PricingConfig& p = need_pricing(r.cfg);
  const auto cs = resolve_constraints(r.cfg);
  if (!all_relu(cs)) {
    fail(ErrorKind::ConfigError, "constraints: compare needs vanilla (relu) quotes");
  }
  std::vector<Quote> quotes;
  for (const auto& c : cs) quotes.push_back({std::get<Relu>(c.kind).omega, c.fbar});
  const EmpiricalMeasure x = load_samples(r.cfg);
  if (x.dim() != 1) fail(ErrorKind::DimensionMismatch, "pricing needs a 1D prior");
  out["resolved"]["n"] = x.size();
  out["targets"] = json::array();
  for (const auto& q : quotes) out["targets"].push_back(q.fbar);

  CalibrationOptions opts;
  opts.solver = r.cfg.solver;
  opts.penalty = p.penalty;
  opts.smoothing = p.smoothing ? p.smoothing : r.cfg.solver.barrier;

  std::vector<NamedMeasure> measures{{"Prior", x}};
  std::vector<std::pair<std::string, EmpiricalMeasure>> samples{{"Prior", x}};
  for (auto m : {CalibrationMethod::OT, CalibrationMethod::OTSmooth, CalibrationMethod::KL}) {
    const std::string name = method_name(m);
    const auto t0 = Clock::now();
    Calibration c = calibrate(x, quotes, m, opts);
    json& sec = out["methods"][name];
    sec["time_s"] = seconds_since(t0);
    std::vector<double> res;
    if (c.solver) {
      res = c.solver->residuals.back();
      sec["transport_cost"] = c.solver->transport_cost;
      sec["resolved_solver"] = to_json(c.solver->resolved);
      out["backend"] = c.solver->backend;
      for (const auto& w : c.solver->warnings) r.warn(name + ": " + w);
      samples.emplace_back(name, c.solver->y);
    } else {
      const auto& s = std::get<KlSolution>(c.measure);
      res = s.residuals();
      sec["solution"] = to_json(s);
      const std::size_t n = p.kl_samples ? p.kl_samples : x.size();
      samples.emplace_back(name, kl_sample(s, n, r.cfg.seed));
    }
    sec["residuals"] = res;
    check_residuals(r, cs, res, name + " ");
    measures.push_back({name, std::move(c.measure)});
  }

  write_report(r, report(p.options, measures, *p.surrogate));

  std::vector<const EmpiricalMeasure*> ptrs;
  for (const auto& s : samples) ptrs.push_back(&s.second);
  const auto [lo, hi] = histogram_range(ptrs);
  for (const auto& [name, m] : samples) {
    if (name != "Prior") write_text(r, "y_" + name + ".csv", measure_csv(m));
    const Histogram h = histogram(m, lo, hi);
    write_text(r, "hist_" + name + ".csv", histogram_csv(h));
    write_text(r, "hist_" + name + ".svg", histogram_svg(h, name));
  }
}

void gen_samples(Run& r, json& out) {
  const PriorSpec& spec = need_spec(r.cfg, "gen-samples");
  const EmpiricalMeasure m = sample(spec, r.cfg.prior.n, r.cfg.seed);
  out["resolved"]["n"] = m.size();
  write_text(r, "samples.csv", measure_csv(m));
}

void estimate(Run& r, json& out) {
  const std::string& method = r.cfg.method;
  if (method == "numeric") return numeric(r, out);
  if (method == "analytic") return analytic(r, out);
  if (method == "kl") return kl(r, out);
  // all: one subdirectory per method.
  const fs::path root = r.dir;
  for (const char* m : {"analytic", "numeric", "kl"}) {
    r.dir = root / m;
    fs::create_directories(r.dir);
    json& sec = out["methods"][m];
    if (std::string(m) == "analytic") analytic(r, sec);
    else if (std::string(m) == "numeric") numeric(r, sec);
    else kl(r, sec);
  }
  r.dir = root;
}

std::uint64_t seed_override(const char* env) {
  std::uint64_t v = 0;
  const std::string s(env);
  std::size_t pos = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (s.empty() || pos != s.size() || s[0] == '-') {
    fail(ErrorKind::ConfigError, "COT_SEED: expected a non-negative integer");
  }
  return v;
}

void print_error(const json& e) { std::cerr << e.dump() << std::endl; }

}  // namespace

int run(const Invocation& inv) {
  Run r;
  try {
    r.cfg = load_config(inv.config_path);
    if (const char* env = std::getenv("COT_SEED")) r.cfg.seed = seed_override(env);
    if (inv.threads) {
      if (*inv.threads < 1) fail(ErrorKind::ConfigError, "--threads: must be >= 1");
      r.cfg.solver.threads = *inv.threads;
    }
    if (inv.out) r.cfg.output_dir = *inv.out;
    r.dir = r.cfg.output_dir;
    std::error_code ec;
    fs::create_directories(r.dir, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create " + r.dir.string() + ": " + ec.message());
  } catch (const std::exception& e) {
    print_error(error_json(e));
    return kError;
  }

  json& m = r.manifest;
  m["tool"] = "cot";
  m["version"] = COT_VERSION;
  m["command"] = inv.command;
  m["config"] = r.cfg.echo;
  m["resolved"] = {{"seed", r.cfg.seed},
                   {"output_dir", r.cfg.output_dir},
                   {"threads", r.cfg.solver.threads},
                   {"method", r.cfg.method},
                   {"residual_rtol", r.cfg.residual_rtol},
                   {"residual_atol", r.cfg.residual_atol}};
  m["backend"] = std::string(kernels::backend_name(
      r.cfg.solver.backend.value_or(kernels::default_backend())));

  const auto t0 = Clock::now();
  int code = kOk;
  try {
    if (inv.command == "estimate") {
      estimate(r, m);
    } else if (inv.command == "analytic") {
      analytic(r, m);
    } else if (inv.command == "kl") {
      kl(r, m);
    } else if (inv.command == "price") {
      price_cmd(r, m);
    } else if (inv.command == "compare") {
      compare_cmd(r, m);
    } else if (inv.command == "gen-samples") {
      gen_samples(r, m);
    } else {
      fail(ErrorKind::ConfigError, "unknown command " + inv.command);
    }
    code = r.warnings.empty() ? kOk : kWarning;
    m["status"] = code == kOk ? "ok" : "warning";
  } catch (const std::exception& e) {
    const json ej = error_json(e);
    print_error(ej);
    m["error"] = ej;
    code = completes_with_warning(e) ? kWarning : kError;
    m["status"] = code == kWarning ? "infeasible" : "error";
  }
  m["timings"]["total_s"] = seconds_since(t0);
  m["warnings"] = r.warnings;
  try {
    write_atomic(r.dir / "manifest.json", m.dump(1) + "\n");
  } catch (const std::exception& e) {
    print_error(error_json(e));
    return kError;
  }
  return code;
}

}  // namespace cot::cli
