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

#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cot/error.hpp"

namespace cot::cli {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
  fail(ErrorKind::ConfigError, path + ": " + msg);
}

// Object reader that remembers which keys were consumed and rejects the rest.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(path_, "expected an object");
  }

  std::string at(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* get(const std::string& key) {
    used_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  const json& need(const std::string& key) {
    const json* v = get(key);
    if (!v) bad(at(key), "missing required key");
    return *v;
  }

  double number(const std::string& key) {
    const json& v = need(key);
    if (!v.is_number()) bad(at(key), "expected a number");
    return v.get<double>();
  }

  std::optional<double> opt_number(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number()) bad(at(key), "expected a number");
    return v->get<double>();
  }

  double number_or(const std::string& key, double def) {
    return opt_number(key).value_or(def);
  }

  long long integer_or(const std::string& key, long long def, long long lo) {
    const json* v = get(key);
    if (!v) return def;
    if (!v->is_number_integer()) bad(at(key), "expected an integer");
    const long long x = v->get<long long>();
    if (x < lo) bad(at(key), "must be >= " + std::to_string(lo));
    return x;
  }

  std::optional<std::string> opt_string(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string()) bad(at(key), "expected a string");
    return v->get<std::string>();
  }

  std::optional<bool> opt_bool(const std::string& key) {
    const json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_boolean()) bad(at(key), "expected a boolean");
    return v->get<bool>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) bad(at(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::vector<double> number_array(const json& j, const std::string& path) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) bad(path, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

// Library parsers report bad keys without our path prefix; add it.
template <class F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ConfigError && e.kind() != ErrorKind::InvalidSpec) throw;
    bad(path, e.what());
  }
}

double to_price_scale(double v, bool log_scale) {
  return log_scale ? std::exp(v) : v;
}

bool read_scale(Fields& f) {
  const auto s = f.opt_string("scale");
  if (!s || *s == "price") return false;
  if (*s == "log") return true;
  bad(f.at("scale"), "expected 'price' or 'log'");
}

BarrierConfig parse_barrier(const json& j, const std::string& path) {
  Fields f(j, path);
  BarrierConfig b;
  b.lambda_delta = f.number_or("lambda_delta", b.lambda_delta);
  b.lambda_0 = f.number_or("lambda_0", b.lambda_0);
  b.t = f.number_or("t", b.t);
  b.M_delta = f.opt_number("M_delta");
  b.M_0 = f.opt_number("M_0");
  if (const json* d = f.get("domain")) {
    b.domain = with_path(f.at("domain"), [&] { return constraint_kind_from_json(*d); });
  }
  b.phi_eps = f.opt_number("phi_eps");
  b.auto_raise = f.opt_bool("auto_raise").value_or(b.auto_raise);
  f.finish();
  return b;
}

SolverConfig parse_solver(const json& j, const std::string& path) {
  Fields f(j, path);
  SolverConfig c;
  c.eps0 = f.opt_number("eps0");
  c.beta = f.number_or("beta", c.beta);
  c.J = static_cast<int>(f.integer_or("J", c.J, 1));
  c.T_max = static_cast<int>(f.integer_or("T_max", c.T_max, 1));
  c.tol = f.opt_number("tol");
  c.armijo_alpha = f.number_or("armijo_alpha", c.armijo_alpha);
  c.delta = f.number_or("delta", c.delta);
  c.eta0 = f.number_or("eta0", c.eta0);
  c.bandwidth = f.opt_number("bandwidth");
  c.threads = static_cast<int>(f.integer_or("threads", c.threads, 1));
  if (auto b = f.opt_string("backend")) {
    if (*b == "scalar") {
      c.backend = kernels::Backend::Scalar;
    } else if (*b == "avx2") {
      c.backend = kernels::Backend::Avx2;
    } else {
      bad(f.at("backend"), "expected 'scalar' or 'avx2'");
    }
  }
  if (const json* b = f.get("barrier")) c.barrier = parse_barrier(*b, f.at("barrier"));
  f.finish();
  with_path(path, [&] {
    validate(c);
    return 0;
  });
  return c;
}

PriorConfig parse_prior(const json& j) {
  Fields f(j, "prior");
  PriorConfig p;
  if (const json* s = f.get("spec")) p.spec = prior_spec_from_json(*s, "prior.spec");
  p.samples_path = f.opt_string("samples_path");
  p.n = static_cast<std::size_t>(f.integer_or("n", static_cast<long long>(p.n), 0));
  f.finish();
  if (!p.spec && !p.samples_path) bad("prior", "needs 'spec' or 'samples_path'");
  return p;
}

ConstraintConfig parse_constraint(const json& j, const std::string& path) {
  if (!j.is_object()) bad(path, "expected an object");
  // Split our keys from the constraint kind's own keys.
  json kind_json = json::object();
  json ours = json::object();
  static const std::set<std::string> kOurs{"fbar", "surrogate", "lambda", "scale"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    (kOurs.count(it.key()) ? ours : kind_json)[it.key()] = it.value();
  }
  Fields f(ours, path);
  ConstraintConfig c;
  const bool log_scale = read_scale(f);
  c.kind = with_path(path, [&] { return constraint_kind_from_json(kind_json); });
  if (log_scale) {
    auto* r = std::get_if<Relu>(&c.kind);
    if (!r) bad(path + ".scale", "'log' applies to relu constraints only");
    r->omega = std::exp(r->omega);
  }
  c.fbar = f.opt_number("fbar");
  if (const json* s = f.get("surrogate")) {
    c.surrogate = prior_spec_from_json(*s, path + ".surrogate");
  }
  if (c.fbar.has_value() == c.surrogate.has_value()) {
    bad(path, "exactly one of 'fbar' and 'surrogate' is required");
  }
  c.lambda = f.number_or("lambda", c.lambda);
  if (!(c.lambda > 0.0)) bad(path + ".lambda", "must be positive");
  f.finish();
  return c;
}

LabeledOption parse_option(const json& j, const std::string& path) {
  Fields f(j, path);
  LabeledOption o;
  o.name = f.opt_string("name").value_or("");
  if (o.name.empty()) bad(path + ".name", "missing required key");
  o.param_set = static_cast<int>(f.integer_or("param_set", 1, 0));
  const bool log_scale = read_scale(f);
  o.option = with_path(path + ".option", [&] { return option_from_json(f.need("option")); });
  std::visit(
      [&](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, VanillaCall>) {
          v.omega = to_price_scale(v.omega, log_scale);
        } else if constexpr (std::is_same_v<T, DownAndOutCall>) {
          v.H0 = to_price_scale(v.H0, log_scale);
          v.s = to_price_scale(v.s, log_scale);
        } else {
          v.s = to_price_scale(v.s, log_scale);
        }
      },
      o.option);
  f.finish();
  return o;
}

PricingConfig parse_pricing(const json& j) {
  Fields f(j, "pricing");
  PricingConfig p;
  const json& opts = f.need("options");
  if (opts.is_string()) {
    if (opts.get<std::string>() != "case_study") {
      bad("pricing.options", "expected an array or \"case_study\"");
    }
    p.options = case_study_options();
  } else if (opts.is_array()) {
    for (std::size_t i = 0; i < opts.size(); ++i) {
      p.options.push_back(parse_option(opts[i], "pricing.options[" + std::to_string(i) + "]"));
    }
  } else {
    bad("pricing.options", "expected an array or \"case_study\"");
  }
  if (const json* s = f.get("surrogate")) {
    p.surrogate = prior_spec_from_json(*s, "pricing.surrogate");
  }
  p.penalty = f.number_or("penalty", p.penalty);
  if (!(p.penalty > 0.0)) bad("pricing.penalty", "must be positive");
  if (const json* s = f.get("smoothing")) p.smoothing = parse_barrier(*s, "pricing.smoothing");
  p.kl_samples = static_cast<std::size_t>(f.integer_or("kl_samples", 0, 0));
  f.finish();
  return p;
}

}  // namespace

PriorSpec prior_spec_from_json(const json& j, const std::string& path) {
  Fields f(j, path);
  const auto kind = f.opt_string("kind");
  if (!kind) bad(f.at("kind"), "missing required key");
  PriorSpec spec;
  if (*kind == "lognormal") {
    spec = Lognormal{f.number("mu"), f.number("sigma")};
  } else if (*kind == "normal") {
    spec = Normal1D{f.number("mu"), f.number("sigma")};
  } else if (*kind == "gaussian2d") {
    Gaussian2D g;
    if (const json* m = f.get("mean")) {
      const auto v = number_array(*m, f.at("mean"));
      if (v.size() != 2) bad(f.at("mean"), "expected 2 numbers");
      g.mean = {v[0], v[1]};
    }
    if (const json* c = f.get("cov")) {
      const auto v = number_array(*c, f.at("cov"));
      if (v.size() != 4) bad(f.at("cov"), "expected 4 numbers (row-major 2x2)");
      g.cov = {v[0], v[1], v[2], v[3]};
    }
    spec = g;
  } else if (*kind == "uniform_disk") {
    spec = UniformDisk{f.number("radius")};
  } else if (*kind == "discrete") {
    Discrete1D d;
    d.atoms = number_array(f.need("atoms"), f.at("atoms"));
    if (const json* w = f.get("weights")) d.weights = number_array(*w, f.at("weights"));
    spec = d;
  } else {
    bad(f.at("kind"), "unknown prior kind '" + *kind + "'");
  }
  f.finish();
  with_path(path, [&] {
    validate(spec);
    return 0;
  });
  return spec;
}

json to_json(const PriorSpec& spec) {
  return std::visit(
      [](const auto& s) -> json {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Lognormal>) {
          return {{"kind", "lognormal"}, {"mu", s.mu}, {"sigma", s.sigma}};
        } else if constexpr (std::is_same_v<T, Normal1D>) {
          return {{"kind", "normal"}, {"mu", s.mu}, {"sigma", s.sigma}};
        } else if constexpr (std::is_same_v<T, Gaussian2D>) {
          return {{"kind", "gaussian2d"}, {"mean", s.mean}, {"cov", s.cov}};
        } else if constexpr (std::is_same_v<T, UniformDisk>) {
          return {{"kind", "uniform_disk"}, {"radius", s.radius}};
        } else {
          return {{"kind", "discrete"}, {"atoms", s.atoms}, {"weights", s.weights}};
        }
      },
      spec);
}

RunConfig parse_config(const json& j) {
  Fields f(j, "");
  RunConfig c;
  c.echo = j;
  c.prior = parse_prior(f.need("prior"));
  if (const json* cs = f.get("constraints")) {
    if (!cs->is_array()) bad("constraints", "expected an array");
    for (std::size_t i = 0; i < cs->size(); ++i) {
      c.constraints.push_back(
          parse_constraint((*cs)[i], "constraints[" + std::to_string(i) + "]"));
    }
  }
  if (const json* s = f.get("solver")) c.solver = parse_solver(*s, "solver");
  if (auto m = f.opt_string("method")) {
    if (*m != "analytic" && *m != "numeric" && *m != "kl" && *m != "all") {
      bad("method", "expected analytic, numeric, kl or all");
    }
    c.method = *m;
  }
  if (const json* p = f.get("pricing")) c.pricing = parse_pricing(*p);
  c.output_dir = f.opt_string("output_dir").value_or(c.output_dir);
  c.seed = static_cast<std::uint64_t>(f.integer_or("seed", static_cast<long long>(c.seed), 0));
  c.residual_rtol = f.number_or("residual_rtol", c.residual_rtol);
  c.residual_atol = f.number_or("residual_atol", c.residual_atol);
  c.kl_y_max = f.opt_number("kl_y_max");
  f.finish();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) fail(ErrorKind::IoError, "cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::ConfigError, "malformed JSON in " + path + ": " + e.what());
  }
  return parse_config(j);
}

std::vector<ConstraintSpec> resolve_constraints(const RunConfig& cfg) {
  std::vector<ConstraintSpec> out;
  for (const auto& c : cfg.constraints) {
    const double fbar = c.fbar ? *c.fbar : target_from_surrogate(c.kind, *c.surrogate);
    out.push_back({c.kind, fbar, c.lambda});
  }
  return out;
}

}  // namespace cot::cli
