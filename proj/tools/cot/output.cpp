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

#include "output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cot/error.hpp"

namespace cot::cli {

namespace fs = std::filesystem;

std::string fmt17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

void write_atomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) fail(ErrorKind::IoError, "cannot open " + tmp.string());
    os << content;
    os.flush();
    if (!os) fail(ErrorKind::IoError, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(ErrorKind::IoError, "rename to " + path.string() + ": " + ec.message());
}

std::pair<double, double> histogram_range(const std::vector<const EmpiricalMeasure*>& ms) {
  std::vector<double> all;
  for (const auto* m : ms) {
    for (std::size_t i = 0; i < m->size(); ++i) all.push_back(m->coord(i, 0));
  }
  if (all.empty()) return {0.0, 1.0};
  std::sort(all.begin(), all.end());
  auto q = [&](double p) {
    return all[static_cast<std::size_t>(p * static_cast<double>(all.size() - 1))];
  };
  double lo = q(0.005), hi = q(0.995);
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  return {lo, hi};
}

Histogram histogram(const EmpiricalMeasure& m, double lo, double hi, int bins) {
  Histogram h{lo, hi, std::vector<double>(bins, 0.0)};
  const double width = (hi - lo) / bins;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double k = std::floor((m.coord(i, 0) - lo) / width);
    const int b = static_cast<int>(std::clamp(k, 0.0, static_cast<double>(bins - 1)));
    h.mass[b] += m.weight(i);
  }
  return h;
}

std::string histogram_csv(const Histogram& h) {
  std::ostringstream os;
  os << "bin_lo,bin_hi,mass,density\n";
  const int bins = static_cast<int>(h.mass.size());
  const double width = (h.hi - h.lo) / bins;
  for (int b = 0; b < bins; ++b) {
    os << fmt17(h.lo + b * width) << ',' << fmt17(h.lo + (b + 1) * width) << ','
       << fmt17(h.mass[b]) << ',' << fmt17(h.mass[b] / width) << '\n';
  }
  return os.str();
}

std::string histogram_svg(const Histogram& h, const std::string& title) {
  const double W = 640, H = 360, left = 50, right = 10, top = 30, bottom = 40;
  const double pw = W - left - right, ph = H - top - bottom;
  const int bins = static_cast<int>(h.mass.size());
  const double width = (h.hi - h.lo) / bins;
  double dmax = 0.0;
  for (double m : h.mass) dmax = std::max(dmax, m / width);
  if (dmax <= 0.0) dmax = 1.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<text x=\"" << W / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  for (int b = 0; b < bins; ++b) {
    const double d = h.mass[b] / width;
    const double bh = ph * d / dmax;
    os << "<rect x=\"" << fmt6(left + pw * b / bins) << "\" y=\"" << fmt6(top + ph - bh)
       << "\" width=\"" << fmt6(pw / bins) << "\" height=\"" << fmt6(bh)
       << "\" fill=\"steelblue\" stroke=\"white\" stroke-width=\"0.5\"/>\n";
  }
  // Axes with end labels.
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
     << top + ph << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
     << top + ph << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << left << "\" y=\"" << H - 22 << "\" text-anchor=\"middle\">"
     << fmt6(h.lo) << "</text>\n";
  os << "<text x=\"" << left + pw << "\" y=\"" << H - 22 << "\" text-anchor=\"middle\">"
     << fmt6(h.hi) << "</text>\n";
  os << "<text x=\"" << left - 4 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">"
     << fmt6(dmax) << "</text>\n";
  os << "<text x=\"" << left - 4 << "\" y=\"" << top + ph << "\" text-anchor=\"end\">0</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace cot::cli
