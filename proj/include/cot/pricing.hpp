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

#pragma once

#include <nlohmann/json_fwd.hpp>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "cot/analytic_ot.hpp"
#include "cot/kl_baseline.hpp"
#include "cot/measures.hpp"
#include "cot/numeric_solver.hpp"

namespace cot {

struct VanillaCall {
  double omega;
};
// max(x - s, 0) when x >= H0.
struct DownAndOutCall {
  double H0;
  double s;
};
struct CashOrNothing {
  double C;
  double s;
};
struct AssetOrNothing {
  double s;
};

using OptionSpec =
    std::variant<VanillaCall, DownAndOutCall, CashOrNothing, AssetOrNothing>;

void validate(const OptionSpec& opt);
double payoff(const OptionSpec& opt, double x);
// "vanilla", "down_and_out", "cash_or_nothing", "asset_or_nothing".
std::string option_kind_name(const OptionSpec& opt);
// Points where the payoff is not smooth.
std::vector<double> payoff_kinks(const OptionSpec& opt);

using PricingMeasure = std::variant<EmpiricalMeasure, MixedMeasure, KlSolution>;

double price(const OptionSpec& opt, const EmpiricalMeasure& m);
double price(const OptionSpec& opt, const MixedMeasure& m);
double price(const OptionSpec& opt, const KlSolution& m);
double price(const OptionSpec& opt, const PricingMeasure& m);
// Expectation under a 1D parametric law: closed form for lognormals,
// quadrature otherwise.
double price(const OptionSpec& opt, const PriorSpec& law);

double closed_form_price(const OptionSpec& opt, const Lognormal& prior);

double relative_error(double price, double reference);

// Vanilla quote on the price scale.
struct Quote {
  double omega;
  double fbar;
};

enum class CalibrationMethod { OT, OTSmooth, KL };

std::string method_name(CalibrationMethod m);

struct CalibrationOptions {
  SolverConfig solver;            // barrier settings are ignored for OT
  double penalty = 1000.0;        // lambda_k for every quote
  std::optional<BarrierConfig> smoothing;  // default BarrierConfig{}
};

// Lognormal MLE when all samples are positive, otherwise a normal fit.
PriorSpec fit_parametric(const EmpiricalMeasure& samples);

struct Calibration {
  PricingMeasure measure;
  std::optional<SolverResult> solver;  // OT methods only
};

Calibration calibrate(const EmpiricalMeasure& prior, std::span<const Quote> quotes,
                      CalibrationMethod method,
                      const CalibrationOptions& opts = {});

struct LabeledOption {
  std::string name;  // g1, g2, g3 or a free label
  int param_set = 1;
  OptionSpec option;
};

// The six exotic cells of the option-pricing case study.
std::vector<LabeledOption> case_study_options();

struct PriceRow {
  std::string option;
  int param_set = 1;
  std::string method;
  double price = 0.0;
  double rel_error = 0.0;
};

struct PriceReport {
  std::vector<PriceRow> rows;

  const PriceRow& at(const std::string& option, int param_set,
                     const std::string& method) const;
};

struct NamedMeasure {
  std::string method;
  PricingMeasure measure;
};

// Prices every option under every measure plus the surrogate ("Surrogate"
// rows), with relative errors against the surrogate price.
PriceReport report(const std::vector<LabeledOption>& options,
                   const std::vector<NamedMeasure>& measures,
                   const PriorSpec& surrogate);

// option,param_set,method,price,rel_error
std::string to_csv(const PriceReport& r);
nlohmann::json to_json(const PriceReport& r);
nlohmann::json to_json(const OptionSpec& opt);
OptionSpec option_from_json(const nlohmann::json& j);

}  // namespace cot
