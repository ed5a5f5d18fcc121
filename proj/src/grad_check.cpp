// Copyright 2026 The cslm Authors.
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

#include "cslm/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cslm/rng.hpp"

namespace cslm {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(),
                     [](const GradCheckEntry& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::string GradCheckReport::to_string() const {
  std::ostringstream out;
  for (const auto& e : entries) {
    out << (e.passed ? "ok   " : "FAIL ") << e.name << " coords=" << e.coords_checked
        << " max_rel_err=" << e.max_rel_error << " max|grad|=" << e.max_abs_analytic
        << '\n';
  }
  return out.str();
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const std::function<double()>& loss_fn,
                           std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  zero_grads(params);
  loss_fn();
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Parameter* p : params) analytic.push_back(p->grad);

  Rng rng(options.seed);
  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& param = *params[k];
    std::vector<std::size_t> coords(param.value.size());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_param > 0 &&
        coords.size() > options.max_coords_per_param) {
      rng.shuffle(std::span<std::size_t>(coords));
      coords.resize(options.max_coords_per_param);
      std::sort(coords.begin(), coords.end());
    }

    GradCheckEntry entry;
    entry.name = param.name;
    for (std::size_t i : coords) {
      const double saved = param.value[i];
      param.value[i] = saved + options.epsilon;
      const double plus = loss_fn();
      param.value[i] = saved - options.epsilon;
      const double minus = loss_fn();
      param.value[i] = saved;
      const double numeric = (plus - minus) / (2.0 * options.epsilon);
      const double a = analytic[k][i];
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(a, numeric));
      entry.max_abs_analytic = std::max(entry.max_abs_analytic, std::abs(a));
      ++entry.coords_checked;
    }
    entry.passed = entry.max_rel_error < options.tolerance;
    report.entries.push_back(entry);
  }

  // Leave the analytic gradient in place for callers that inspect it.
  for (std::size_t k = 0; k < params.size(); ++k) params[k]->grad = analytic[k];
  return report;
}

}  // namespace cslm
