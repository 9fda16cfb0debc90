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

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "cot/measures.hpp"
#include "cot/pricing.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("cot_cli_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

struct Outcome {
  int code;
  std::string err;
};

Outcome cot_cmd(const std::string& cmd, const json& cfg, const fs::path& dir,
                const std::string& extra = "") {
  const fs::path cfg_path = dir / "config.json";
  std::ofstream(cfg_path) << cfg.dump(1);
  const fs::path err = dir / "stderr.txt";
  const std::string line = std::string(COT_BIN) + " " + cmd + " --config " +
                           cfg_path.string() + " " + extra + " 2> " + err.string();
  const int status = std::system(line.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

json manifest(const fs::path& dir) { return json::parse(slurp(dir / "manifest.json")); }

json lognormal(double mu, double sigma) {
  return {{"kind", "lognormal"}, {"mu", mu}, {"sigma", sigma}};
}
json normal01() { return {{"kind", "normal"}, {"mu", 0}, {"sigma", 1}}; }

// Phi(-1) by its own series-free route.
double phi_minus_one() { return 0.5 * std::erfc(1.0 / std::sqrt(2.0)); }

}  // namespace

TEST_CASE("gen-samples writes a header-only file for n = 0") {
  const auto dir = scratch("gen0");
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}, {"n", 0}}}, {"output_dir", dir.string()}};
  CHECK(cot_cmd("gen-samples", cfg, dir).code == 0);
  CHECK(slurp(dir / "samples.csv") == "x1\n");
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("gen-samples is byte-identical for a fixed seed and honours COT_SEED") {
  const auto a = scratch("gen_a"), b = scratch("gen_b"), c = scratch("gen_c");
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}, {"n", 500}}}, {"seed", 11}};
  cfg["output_dir"] = a.string();
  REQUIRE(cot_cmd("gen-samples", cfg, a).code == 0);
  cfg["output_dir"] = b.string();
  REQUIRE(cot_cmd("gen-samples", cfg, b).code == 0);
  CHECK(slurp(a / "samples.csv") == slurp(b / "samples.csv"));

  cfg["output_dir"] = c.string();
  ::setenv("COT_SEED", "12", 1);
  const auto o = cot_cmd("gen-samples", cfg, c);
  ::unsetenv("COT_SEED");
  REQUIRE(o.code == 0);
  CHECK(slurp(a / "samples.csv") != slurp(c / "samples.csv"));
  CHECK(manifest(c)["resolved"]["seed"] == 12);
}

TEST_CASE("gen-samples lognormal mean within 3 standard errors") {
  const auto dir = scratch("gen_mean");
  const std::size_t n = 100000;
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}, {"n", n}}}, {"seed", 3},
              {"output_dir", dir.string()}};
  REQUIRE(cot_cmd("gen-samples", cfg, dir).code == 0);
  const auto m = cot::read_csv((dir / "samples.csv").string());
  REQUIRE(m.size() == n);
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += m.coord(i, 0);
  mean /= n;
  const double exact = std::exp(1.5);
  const double var = (std::exp(1.0) - 1.0) * std::exp(3.0);
  CHECK(std::abs(mean - exact) <= 3.0 * std::sqrt(var / n));
}

TEST_CASE("invalid prior spec exits 1 with one JSON error line") {
  const auto dir = scratch("bad_spec");
  json cfg = {{"prior", {{"spec", lognormal(1, -1)}}}, {"output_dir", dir.string()}};
  const auto o = cot_cmd("gen-samples", cfg, dir);
  CHECK(o.code == 1);
  REQUIRE(!o.err.empty());
  CHECK(std::count(o.err.begin(), o.err.end(), '\n') == 1);
  const json e = json::parse(o.err);
  CHECK(e.contains("error"));
  CHECK(e["message"].get<std::string>().find("prior.spec") != std::string::npos);
}

TEST_CASE("config errors name the offending key") {
  const auto dir = scratch("bad_key");
  SUBCASE("unknown nested key") {
    json cfg = {{"prior", {{"spec", normal01()}}},
                {"solver", {{"barrier", {{"lambda_zero", 1}}}}},
                {"output_dir", dir.string()}};
    const auto o = cot_cmd("estimate", cfg, dir);
    CHECK(o.code == 1);
    CHECK(json::parse(o.err)["key"] == "solver.barrier.lambda_zero");
    CHECK(!fs::exists(dir / "manifest.json"));
  }
  SUBCASE("unknown constraint key") {
    json cfg = {{"prior", {{"spec", normal01()}}},
                {"constraints", {{{"kind", "relu"}, {"omega", 1}, {"fbar", 1}, {"weight", 2}}}},
                {"output_dir", dir.string()}};
    const auto o = cot_cmd("estimate", cfg, dir);
    CHECK(o.code == 1);
    CHECK(o.err.find("weight") != std::string::npos);
  }
  SUBCASE("syntax error") {
    std::ofstream(dir / "config.json") << "{\"prior\": ";
    const std::string line = std::string(COT_BIN) + " estimate --config " +
                             (dir / "config.json").string() + " 2> " +
                             (dir / "err.txt").string();
    const int status = std::system(line.c_str());
    CHECK(WEXITSTATUS(status) == 1);
    CHECK(json::parse(slurp(dir / "err.txt"))["error"] == "ConfigError");
  }
  SUBCASE("usage error") {
    const int status = std::system((std::string(COT_BIN) + " bogus 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(status) == 1);
  }
}

TEST_CASE("estimate with no constraints returns the input samples") {
  const auto dir = scratch("identity");
  json gen = {{"prior", {{"spec", lognormal(1, 1)}, {"n", 200}}}, {"seed", 4},
              {"output_dir", dir.string()}};
  REQUIRE(cot_cmd("gen-samples", gen, dir).code == 0);
  json cfg = {{"prior", {{"samples_path", (dir / "samples.csv").string()}}},
              {"output_dir", dir.string()}};
  CHECK(cot_cmd("estimate", cfg, dir).code == 0);
  CHECK(slurp(dir / "y.csv") == slurp(dir / "samples.csv"));
  CHECK(fs::exists(dir / "trace.json"));
  CHECK(manifest(dir)["status"] == "ok");
}

TEST_CASE("single relu estimate meets 1% residual and threads do not change y") {
  const auto a = scratch("relu_1"), b = scratch("relu_3");
  const double fbar = 0.5;
  json cfg = {{"prior", {{"spec", normal01()}, {"n", 500}}},
              {"seed", 3},
              {"constraints", {{{"kind", "relu"}, {"omega", 1}, {"fbar", fbar}, {"lambda", 1000}}}},
              {"solver", {{"T_max", 1000}}}};
  cfg["output_dir"] = a.string();
  REQUIRE(cot_cmd("estimate", cfg, a).code == 0);
  const json m = manifest(a);
  CHECK(std::abs(m["residuals"][0].get<double>()) <= 1e-2 * fbar);
  CHECK(m["transport_cost"].get<double>() > 0.0);
  CHECK(m["resolved"]["solver"]["barrier"].is_null());

  cfg["output_dir"] = b.string();
  REQUIRE(cot_cmd("estimate", cfg, b, "--threads 3").code == 0);
  CHECK(slurp(a / "y.csv") == slurp(b / "y.csv"));
  CHECK(manifest(b)["resolved"]["threads"] == 3);
}

TEST_CASE("estimate exits 2 when residuals stay above tolerance") {
  const auto dir = scratch("short");
  json cfg = {{"prior", {{"spec", normal01()}, {"n", 100}}},
              {"constraints", {{{"kind", "relu"}, {"omega", 1}, {"fbar", 0.5}}}},
              {"solver", {{"T_max", 1}, {"J", 1}}},
              {"output_dir", dir.string()}};
  CHECK(cot_cmd("estimate", cfg, dir).code == 2);
  CHECK(fs::exists(dir / "y.csv"));
  const json m = manifest(dir);
  CHECK(m["status"] == "warning");
  CHECK(!m["warnings"].empty());
}

TEST_CASE("missing samples file writes a failure manifest") {
  const auto dir = scratch("nofile");
  json cfg = {{"prior", {{"samples_path", (dir / "absent.csv").string()}}},
              {"output_dir", dir.string()}};
  CHECK(cot_cmd("estimate", cfg, dir).code == 1);
  const json m = manifest(dir);
  CHECK(m["status"] == "error");
  CHECK(m["error"]["error"] == "IoError");
}

TEST_CASE("analytic indicator on N(0,1) puts Phi(-1) at each end") {
  const auto dir = scratch("indicator");
  json cfg = {{"prior", {{"spec", normal01()}}},
              {"constraints",
               {{{"kind", "indicator_outside_interval"}, {"a", -1}, {"b", 1}, {"fbar", 0}}}},
              {"output_dir", dir.string()}};
  REQUIRE(cot_cmd("analytic", cfg, dir).code == 0);
  const json s = json::parse(slurp(dir / "solution.json"));
  REQUIRE(s["atoms"].size() == 2);
  for (const auto& a : s["atoms"]) CHECK(a["mass"].get<double>() == doctest::Approx(phi_minus_one()).epsilon(1e-9));
  std::ifstream is(dir / "density.csv");
  std::string line;
  int rows = -1;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 2048);
}

TEST_CASE("analytic relu-multi with prior-feasible targets is the identity") {
  const auto dir = scratch("feasible");
  // E[(X - w)_+] under N(0,1) is phi(w) - w (1 - Phi(w)).
  auto call = [](double w) {
    return std::exp(-0.5 * w * w) / std::sqrt(2 * M_PI) - w * 0.5 * std::erfc(w / std::sqrt(2.0));
  };
  json cfg = {{"prior", {{"spec", normal01()}}},
              {"constraints",
               {{{"kind", "relu"}, {"omega", 0}, {"fbar", call(0)}},
                {{"kind", "relu"}, {"omega", 1}, {"fbar", call(1)}}}},
              {"output_dir", dir.string()}};
  REQUIRE(cot_cmd("analytic", cfg, dir).code == 0);
  const json s = json::parse(slurp(dir / "solution.json"));
  CHECK(s["cost"].get<double>() == doctest::Approx(0.0));
  CHECK(s["atoms"].empty());
  for (const auto& l : s["lambdas"]) CHECK(l.get<double>() == doctest::Approx(0.0));
}

TEST_CASE("analytic infeasible targets exit 2 with the stage index") {
  const auto dir = scratch("infeasible");
  json cfg = {{"prior", {{"spec", normal01()}}},
              {"constraints",
               {{{"kind", "relu"}, {"omega", 0}, {"fbar", 0.1}},
                {{"kind", "relu"}, {"omega", 1}, {"fbar", 0.5}}}},
              {"output_dir", dir.string()}};
  const auto o = cot_cmd("analytic", cfg, dir);
  CHECK(o.code == 2);
  const json e = json::parse(o.err);
  CHECK(e["error"] == "InfeasibleTargets");
  CHECK(e.contains("index"));
  CHECK(manifest(dir)["status"] == "infeasible");
}

TEST_CASE("kl on a far-tail interval exits 2 with ZeroMass") {
  const auto dir = scratch("kl_far");
  json cfg = {{"prior", {{"spec", normal01()}}},
              {"constraints",
               {{{"kind", "indicator_outside_interval"}, {"a", 40}, {"b", 41}, {"fbar", 0}}}},
              {"output_dir", dir.string()}};
  const auto o = cot_cmd("kl", cfg, dir);
  CHECK(o.code == 2);
  CHECK(json::parse(o.err)["error"] == "ZeroMass");
  CHECK(fs::exists(dir / "manifest.json"));
}

TEST_CASE("kl relu writes the solution and records the domain cap") {
  const auto dir = scratch("kl_relu");
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}}},
              {"constraints", {{{"kind", "relu"}, {"omega", 1}, {"scale", "log"},
                                {"surrogate", lognormal(2, 1)}}}},
              {"output_dir", dir.string()}};
  REQUIRE(cot_cmd("kl", cfg, dir).code == 0);
  const json m = manifest(dir);
  CHECK(m["resolved"]["kl_y_max"].get<double>() > 0.0);
  CHECK(std::abs(m["residuals"][0].get<double>()) < 1e-8);
  CHECK(json::parse(slurp(dir / "solution.json"))["kind"] == "relu");
}

TEST_CASE("price matches the closed form within Monte Carlo error") {
  const auto dir = scratch("price");
  const std::size_t n = 100000;
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}, {"n", n}}},
              {"seed", 5},
              {"pricing", {{"options", "case_study"}, {"surrogate", lognormal(2, 1)}}},
              {"output_dir", dir.string()}};
  REQUIRE(cot_cmd("price", cfg, dir).code == 0);
  REQUIRE(cot_cmd("gen-samples", cfg, dir).code == 0);
  const auto x = cot::read_csv((dir / "samples.csv").string());

  std::map<std::pair<std::string, int>, double> prices;
  std::istringstream csv(slurp(dir / "prices.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "option,param_set,method,price,rel_error");
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string opt, set, method, price;
    std::getline(ls, opt, ',');
    std::getline(ls, set, ',');
    std::getline(ls, method, ',');
    std::getline(ls, price, ',');
    if (method == "Prior") prices[{opt, std::stoi(set)}] = std::stod(price);
  }
  const auto options = cot::case_study_options();
  REQUIRE(prices.size() == options.size());
  for (const auto& o : options) {
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = cot::payoff(o.option, x.coord(i, 0));
      s1 += v;
      s2 += v * v;
    }
    const double mean = s1 / n;
    const double se = std::sqrt((s2 / n - mean * mean) / n);
    const double exact = cot::closed_form_price(o.option, cot::Lognormal{1, 1});
    CHECK(std::abs(prices[{o.name, o.param_set}] - exact) <= 4.0 * se);
  }
  CHECK(fs::exists(dir / "errors.csv"));
}

TEST_CASE("missing pricing surrogate is a schema error") {
  const auto dir = scratch("no_surrogate");
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}, {"n", 100}}},
              {"pricing", {{"options", "case_study"}}},
              {"output_dir", dir.string()}};
  const auto o = cot_cmd("price", cfg, dir);
  CHECK(o.code == 1);
  CHECK(json::parse(o.err)["key"] == "pricing.surrogate");
}

TEST_CASE("compare writes every artefact, beats the prior and is reproducible") {
  const auto a = scratch("cmp_a"), b = scratch("cmp_b");
  json quotes = json::array();
  for (int k = 1; k <= 3; ++k) {
    quotes.push_back({{"kind", "relu"}, {"omega", k}, {"scale", "log"},
                      {"surrogate", lognormal(2, 1)}});
  }
  json cfg = {{"prior", {{"spec", lognormal(1, 1)}, {"n", 300}}},
              {"seed", 1},
              {"constraints", quotes},
              {"solver", {{"T_max", 300}, {"J", 6}}},
              {"pricing", {{"options", "case_study"}, {"surrogate", lognormal(2, 1)}}}};
  cfg["output_dir"] = a.string();
  REQUIRE(cot_cmd("compare", cfg, a).code == 0);
  cfg["output_dir"] = b.string();
  REQUIRE(cot_cmd("compare", cfg, b).code == 0);

  const std::vector<std::string> methods = {"Prior", "Wasserstein", "SmoothWasserstein", "KL"};
  for (const auto& m : methods) {
    CHECK(fs::exists(a / ("hist_" + m + ".svg")));
    const std::string hist = slurp(a / ("hist_" + m + ".csv"));
    CHECK(std::count(hist.begin(), hist.end(), '\n') == 61);
    if (m != "Prior") CHECK(slurp(a / ("y_" + m + ".csv")) == slurp(b / ("y_" + m + ".csv")));
  }
  CHECK(slurp(a / "prices.csv") == slurp(b / "prices.csv"));
  CHECK(slurp(a / "errors.csv") == slurp(b / "errors.csv"));

  std::map<std::pair<std::string, std::string>, double> err;
  std::istringstream csv(slurp(a / "errors.csv"));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "option,param_set,method,rel_error");
  while (std::getline(csv, line)) {
    std::istringstream ls(line);
    std::string opt, set, method, e;
    std::getline(ls, opt, ',');
    std::getline(ls, set, ',');
    std::getline(ls, method, ',');
    std::getline(ls, e, ',');
    err[{opt + set, method}] = std::stod(e);
  }
  CHECK(err.size() == 24);
  for (const auto& o : cot::case_study_options()) {
    const std::string cell = o.name + std::to_string(o.param_set);
    for (const auto& m : methods) {
      if (m == "Prior") continue;
      CHECK(std::abs(err[{cell, m}]) < std::abs(err[{cell, "Prior"}]));
    }
  }
}

TEST_CASE("estimate method all runs every estimator into its own directory") {
  const auto dir = scratch("all");
  json cfg = {{"prior", {{"spec", normal01()}, {"n", 200}}},
              {"constraints", {{{"kind", "relu"}, {"omega", 1}, {"fbar", 0.3}, {"lambda", 1000}}}},
              {"solver", {{"T_max", 300}}},
              {"method", "all"},
              {"output_dir", dir.string()}};
  const auto o = cot_cmd("estimate", cfg, dir);
  CHECK((o.code == 0 || o.code == 2));
  CHECK(fs::exists(dir / "analytic" / "solution.json"));
  CHECK(fs::exists(dir / "numeric" / "y.csv"));
  CHECK(fs::exists(dir / "kl" / "density.csv"));
  const json m = manifest(dir);
  CHECK(m["methods"].size() == 3);
}
