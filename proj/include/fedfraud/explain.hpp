// Copyright 2026 The fedfraud Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "fedfraud/dataset.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/matrix.hpp"
#include "fedfraud/nn.hpp"
#include "fedfraud/random.hpp"

// Shapley attribution of one prediction against a single baseline row: the
// value of a coalition S is the model output on the instance with every
// feature outside S replaced by its baseline value.
namespace fedfraud::explain {

inline constexpr std::size_t kMaxExactFeatures = 15;

struct CoalitionSpec {
  std::vector<double> instance;
  std::vector<double> baseline;

  std::size_t features() const noexcept { return instance.size(); }

  void validate() const {
    if (instance.size() != baseline.size()) {
      throw DimensionError("instance and baseline have different lengths");
    }
    if (instance.empty()) throw DimensionError("explanation needs at least one feature");
    for (std::size_t j = 0; j < instance.size(); ++j) {
      if (!std::isfinite(instance[j]) || !std::isfinite(baseline[j])) {
        throw NonFiniteError("instance and baseline must be finite");
      }
    }
  }
};

enum class Method { exact, sampled };

inline std::string_view to_string(Method m) { return m == Method::exact ? "exact" : "sampled"; }

struct ShapExplanation {
  std::vector<double> phi;
  std::vector<double> std_error;  // sampled only; zeros for exact
  double baseline_value = 0.0;    // f(empty set)
  double instance_value = 0.0;    // f(all features)
  std::vector<std::string> feature_names;
  std::vector<double> feature_values;
  Method method = Method::exact;
  std::size_t n_permutations = 0;

  double phi_sum() const { return std::accumulate(phi.begin(), phi.end(), 0.0); }
};

/// Per-column mean of a dataset, the default baseline for one client.
inline std::vector<double> feature_means(const data::ProcessedDataset& ds) {
  if (ds.empty()) throw DataError("baseline of an empty dataset");
  std::vector<double> mean(ds.cols(), 0.0);
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    const auto row = ds.features.row(r);
    for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += row[j];
  }
  for (double& m : mean) m /= static_cast<double>(ds.rows());
  return mean;
}

inline std::vector<double> coalition_point(const CoalitionSpec& spec, std::span<const std::size_t> subset) {
  std::vector<double> x = spec.baseline;
  for (const auto j : subset) {
    if (j >= spec.features()) {
      throw DimensionError("feature index " + std::to_string(j) + " out of range");
    }
    x[j] = spec.instance[j];
  }
  return x;
}

/// f(S) for the features listed in `subset`.
inline double coalition_value(const nn::ModelParams& model, const CoalitionSpec& spec,
                              std::span<const std::size_t> subset) {
  spec.validate();
  const auto x = coalition_point(spec, subset);
  return nn::forward(model, Matrix(1, x.size(), x))[0];
}

/// Applies |S|!(d-|S|-1)!/d! [v(S+j) - v(S)] to a full table of coalition values.
inline std::vector<double> shapley_from_table(std::size_t d, std::span<const double> v) {
  if (v.size() != (std::size_t{1} << d)) throw DimensionError("coalition table has wrong size");
  // weight[s] = s! (d - s - 1)! / d!, built from exact small factorials.
  std::vector<double> factorial(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s) weight[s] = factorial[s] * factorial[d - s - 1] / factorial[d];

  std::vector<double> phi(d, 0.0);
  const std::uint32_t full = static_cast<std::uint32_t>(v.size());
  for (std::size_t j = 0; j < d; ++j) {
    const std::uint32_t bit = 1u << j;
    double acc = 0.0;
    for (std::uint32_t mask = 0; mask < full; ++mask) {
      if (mask & bit) continue;
      acc += weight[static_cast<std::size_t>(std::popcount(mask))] * (v[mask | bit] - v[mask]);
    }
    phi[j] = acc;
  }
  return phi;
}

/// Exact Shapley values for any value function over bitmask coalitions
/// (bit j set means feature j takes its instance value). Evaluates all 2^d
/// coalitions once.
template <typename ValueOfMask>
std::vector<double> shapley_from_value_function(std::size_t d, ValueOfMask&& value) {
  if (d == 0) throw DimensionError("explanation needs at least one feature");
  if (d > kMaxExactFeatures) {
    throw DataError("exact Shapley enumeration supports at most " + std::to_string(kMaxExactFeatures) +
                    " features (got " + std::to_string(d) + "); use the sampled method");
  }
  const std::uint32_t full = (1u << d);
  std::vector<double> v(full);
  for (std::uint32_t mask = 0; mask < full; ++mask) v[mask] = value(mask);
  return shapley_from_table(d, v);
}

namespace detail {

inline std::vector<std::string> default_names(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < d; ++j) out.push_back("feature_" + std::to_string(j));
  return out;
}

inline void fill_names(ShapExplanation& e, std::vector<std::string> names, std::size_t d) {
  if (names.empty()) names = default_names(d);
  if (names.size() != d) throw DimensionError("feature name count does not match feature count");
  e.feature_names = std::move(names);
}

}  // namespace detail

/// Exact attribution; refuses more than 15 features.
inline ShapExplanation shapley_exact(const nn::ModelParams& model, const CoalitionSpec& spec,
                                     std::vector<std::string> names = {}) {
  spec.validate();
  const std::size_t d = spec.features();
  if (d > kMaxExactFeatures) {
    throw DataError("exact Shapley enumeration supports at most " + std::to_string(kMaxExactFeatures) +
                    " features (got " + std::to_string(d) + "); use the sampled method");
  }
  const std::uint32_t full = 1u << d;
  Matrix points(full, d);
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    auto row = points.row(mask);
    for (std::size_t j = 0; j < d; ++j) row[j] = (mask >> j) & 1u ? spec.instance[j] : spec.baseline[j];
  }
  const auto values = nn::forward(model, points);

  ShapExplanation e;
  e.phi = shapley_from_table(d, values);
  e.std_error.assign(d, 0.0);
  e.baseline_value = values.front();
  e.instance_value = values.back();
  e.feature_values = spec.instance;
  e.method = Method::exact;
  detail::fill_names(e, std::move(names), d);
  return e;
}

struct SamplingOptions {
  std::size_t n_permutations = 2000;
  std::uint64_t seed = 0;
  /// Walk all d! orderings instead of sampling (small d only).
  bool exhaustive = false;
};

/// Monte Carlo Shapley estimate: averages each feature's marginal
/// contribution f(pre + j) - f(pre) over uniformly drawn orderings, where pre
/// is the set of features ahead of j. Reports the standard error per feature.
inline ShapExplanation shapley_sampled(const nn::ModelParams& model, const CoalitionSpec& spec,
                                       const SamplingOptions& opts, std::vector<std::string> names = {}) {
  spec.validate();
  const std::size_t d = spec.features();
  if (!opts.exhaustive && opts.n_permutations < 1) throw ConfigError("need at least one permutation");
  if (opts.exhaustive && d > 10) throw ConfigError("exhaustive permutation walk limited to 10 features");

  std::vector<double> mean(d, 0.0), m2(d, 0.0);
  std::size_t count = 0;
  Matrix path(d + 1, d);
  double f_empty = 0.0, f_full = 0.0;

  auto visit = [&](const std::vector<std::size_t>& order) {
    auto first = path.row(0);
    std::copy(spec.baseline.begin(), spec.baseline.end(), first.begin());
    for (std::size_t i = 0; i < d; ++i) {
      auto prev = path.row(i);
      auto cur = path.row(i + 1);
      std::copy(prev.begin(), prev.end(), cur.begin());
      cur[order[i]] = spec.instance[order[i]];
    }
    const auto f = nn::forward(model, path);
    f_empty = f.front();
    f_full = f.back();
    ++count;
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t j = order[i];
      const double c = f[i + 1] - f[i];
      const double delta = c - mean[j];
      mean[j] += delta / static_cast<double>(count);
      m2[j] += delta * (c - mean[j]);
    }
  };

  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (opts.exhaustive) {
    do visit(order);
    while (std::next_permutation(order.begin(), order.end()));
  } else {
    Rng rng(opts.seed);
    for (std::size_t p = 0; p < opts.n_permutations; ++p) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(order);
      visit(order);
    }
  }

  ShapExplanation e;
  e.phi = mean;
  e.std_error.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    e.std_error[j] = count > 1 ? std::sqrt(m2[j] / static_cast<double>(count - 1) / static_cast<double>(count))
                               : 0.0;
  }
  e.baseline_value = f_empty;
  e.instance_value = f_full;
  e.feature_values = spec.instance;
  e.method = Method::sampled;
  e.n_permutations = count;
  detail::fill_names(e, std::move(names), d);
  return e;
}

// --- reporting ---------------------------------------------------------------

inline std::string_view direction_of(double phi) {
  if (phi > 0.0) return "increases";
  if (phi < 0.0) return "decreases";
  return "none";
}

struct ReportRow {
  std::string feature;
  double value = 0.0;
  double phi = 0.0;
  std::string direction;
};

struct ExplanationReport {
  std::string title;
  Method method = Method::exact;
  std::size_t n_permutations = 0;
  double baseline_value = 0.0;
  double instance_value = 0.0;
  double phi_sum = 0.0;
  double tolerance = 0.0;  // allowed |phi_sum - (instance - baseline)|
  std::vector<ReportRow> rows;

  bool reconciles() const {
    return std::abs(phi_sum - (instance_value - baseline_value)) <= tolerance;
  }
  bool all_zero() const {
    return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.phi == 0.0; });
  }
};

/// Rows sorted by |phi| descending (ties keep feature order).
inline ExplanationReport explanation_report(const ShapExplanation& e, std::string title = {}) {
  ExplanationReport r;
  r.title = std::move(title);
  r.method = e.method;
  r.n_permutations = e.n_permutations;
  r.baseline_value = e.baseline_value;
  r.instance_value = e.instance_value;
  r.phi_sum = e.phi_sum();
  if (e.method == Method::exact) {
    r.tolerance = 1e-9;
  } else {
    double var = 0.0;
    for (const double s : e.std_error) var += s * s;
    r.tolerance = std::max(4.0 * std::sqrt(var), 1e-9);
  }
  std::vector<std::size_t> order(e.phi.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(e.phi[a]) > std::abs(e.phi[b]); });
  for (const auto j : order) {
    r.rows.push_back({e.feature_names[j], e.feature_values.empty() ? 0.0 : e.feature_values[j], e.phi[j],
                      std::string(direction_of(e.phi[j]))});
  }
  return r;
}

inline std::string render_text(const ExplanationReport& r) {
  std::ostringstream out;
  char buf[160];
  if (!r.title.empty()) out << r.title << '\n';
  out << "method: " << to_string(r.method);
  if (r.method == Method::sampled) out << " (" << r.n_permutations << " permutations)";
  out << '\n';
  std::snprintf(buf, sizeof buf, "baseline prediction: %.6f\ninstance prediction: %.6f\n", r.baseline_value,
                r.instance_value);
  out << buf;
  std::snprintf(buf, sizeof buf, "sum of contributions: %+.6f (prediction - baseline = %+.6f, %s)\n", r.phi_sum,
                r.instance_value - r.baseline_value, r.reconciles() ? "reconciled" : "NOT reconciled");
  out << buf;
  if (r.all_zero()) {
    out << "no feature moved the prediction away from the baseline\n";
    return out.str();
  }
  std::snprintf(buf, sizeof buf, "%-40s %14s %14s  %s\n", "feature", "value", "phi", "direction");
  out << buf;
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%-40s %14.6g %+14.6f  %s\n", row.feature.c_str(), row.value, row.phi,
                  row.direction.c_str());
    out << buf;
  }
  return out.str();
}

inline nlohmann::json report_to_json(const ExplanationReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"feature", row.feature}, {"value", row.value}, {"phi", row.phi}, {"direction", row.direction}});
  }
  return {{"title", r.title},
          {"method", to_string(r.method)},
          {"n_permutations", r.n_permutations},
          {"baseline_value", r.baseline_value},
          {"instance_value", r.instance_value},
          {"phi_sum", r.phi_sum},
          {"reconciled", r.reconciles()},
          {"features", rows}};
}

}  // namespace fedfraud::explain
