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

#include <filesystem>
#include <string>
#include <vector>

#include "cot/measures.hpp"

namespace cot::cli {

// Writes to path.tmp and renames over path.
void write_atomic(const std::filesystem::path& path, const std::string& content);

struct Histogram {
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> mass;  // per bin, values outside [lo, hi] clamp to the ends
};

constexpr int kHistBins = 60;

// Shared range for comparable histograms: pooled 0.5% and 99.5% quantiles.
std::pair<double, double> histogram_range(const std::vector<const EmpiricalMeasure*>& ms);
Histogram histogram(const EmpiricalMeasure& m, double lo, double hi,
                    int bins = kHistBins);
// bin_lo,bin_hi,mass,density
std::string histogram_csv(const Histogram& h);
std::string histogram_svg(const Histogram& h, const std::string& title);

// %.17g, the format of the measures CSV writer.
std::string fmt17(double v);

}  // namespace cot::cli
