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

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedfraud/error.hpp"

namespace fedfraud::metrics {

/// Binary outcome counts; positive means fraud (label 1).
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct MetricsRecord {
  std::int64_t round = 0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MetricsRecord, round, accuracy, precision, recall, f1)

/// A sample is predicted positive iff p >= threshold.
inline ConfusionMatrix confusion(std::span<const double> probabilities, std::span<const int> labels,
                                 double threshold = 0.5) {
  if (probabilities.size() != labels.size()) {
    throw DimensionError("confusion: " + std::to_string(probabilities.size()) +
                         " predictions vs " + std::to_string(labels.size()) + " labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++cm.tp;
    else if (predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

namespace detail {
inline double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }
}  // namespace detail

/// Accuracy, precision, recall and F1; any 0/0 yields 0.
inline MetricsRecord derive(const ConfusionMatrix& cm, std::int64_t round = 0) {
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const auto tn = static_cast<double>(cm.tn);
  MetricsRecord r;
  r.round = round;
  r.accuracy = detail::ratio(tp + tn, tp + fp + fn + tn);
  r.precision = detail::ratio(tp, tp + fp);
  r.recall = detail::ratio(tp, tp + fn);
  r.f1 = detail::ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  return r;
}

inline MetricsRecord evaluate(std::span<const double> probabilities, std::span<const int> labels,
                              std::int64_t round = 0, double threshold = 0.5) {
  return derive(confusion(probabilities, labels, threshold), round);
}

// --- history as comma-separated text ------------------------------------------

inline constexpr const char* kHistoryHeader = "round,accuracy,precision,recall,f1";

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string history_to_csv(std::span<const MetricsRecord> history) {
  std::ostringstream out;
  out << kHistoryHeader << '\n';
  for (const auto& r : history) {
    out << r.round << ',' << format_double(r.accuracy) << ',' << format_double(r.precision) << ','
        << format_double(r.recall) << ',' << format_double(r.f1) << '\n';
  }
  return out.str();
}

inline std::vector<MetricsRecord> history_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHistoryHeader) {
    throw ParseError("metrics history must start with header '" + std::string(kHistoryHeader) + "'");
  }
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    MetricsRecord r;
    long long round = 0;
    char tail = 0;
    const int got = std::sscanf(line.c_str(), "%lld,%lf,%lf,%lf,%lf%c", &round, &r.accuracy,
                                &r.precision, &r.recall, &r.f1, &tail);
    r.round = round;
    if (got != 5) throw ParseError("metrics history line " + std::to_string(line_no) + " malformed");
    out.push_back(r);
  }
  return out;
}

inline void save_history(std::span<const MetricsRecord> history, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << history_to_csv(history);
}

inline std::vector<MetricsRecord> load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return history_from_csv(ss.str());
}

}  // namespace fedfraud::metrics
