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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "fedfraud/error.hpp"
#include "fedfraud/pipeline.hpp"
#include "fedfraud/random.hpp"

// Desk-scale stand-in for the real transaction table: two Gaussian classes
// with configurable imbalance, plus categorical columns and missing cells so
// every preprocessing stage has work to do.
namespace fedfraud::synthetic {

struct SyntheticSpec {
  std::size_t n = 2000;
  /// Numeric feature columns, income included.
  std::size_t d = 8;
  double fraud_rate = 0.1;
  std::uint64_t seed = 0;
  /// Class-mean shift in units of the per-column standard deviation.
  double separation = 1.5;
  double missing_rate = 0.02;

  void validate() const {
    if (n < 10) throw ConfigError("synthetic table needs n >= 10");
    if (d < 1) throw ConfigError("synthetic table needs d >= 1");
    if (!(fraud_rate > 0.0 && fraud_rate < 1.0)) throw ConfigError("fraud_rate must lie in (0, 1)");
    if (!(missing_rate >= 0.0 && missing_rate < 0.5)) throw ConfigError("missing_rate must lie in [0, 0.5)");
    if (!std::isfinite(separation)) throw ConfigError("separation must be finite");
  }
};

inline const std::vector<std::string>& payment_types() {
  static const std::vector<std::string> v{"AA", "AB", "AC", "AD", "AE"};
  return v;
}

inline const std::vector<std::string>& device_systems() {
  static const std::vector<std::string> v{"linux", "macintosh", "other", "windows", "x11"};
  return v;
}

/// Column layout: fraud_bool, income, x1 .. x{d-1} (odd float, even
/// integer), payment_type, device_os.
inline data::DatasetSchema synthetic_schema(const SyntheticSpec& spec) {
  data::DatasetSchema s;
  s.columns.push_back({"fraud_bool", data::ColumnKind::integer});
  s.columns.push_back({"income", data::ColumnKind::floating});
  for (std::size_t j = 1; j < spec.d; ++j) {
    s.columns.push_back({"x" + std::to_string(j), j % 2 == 1 ? data::ColumnKind::floating : data::ColumnKind::integer});
  }
  s.columns.push_back({"payment_type", data::ColumnKind::categorical});
  s.columns.push_back({"device_os", data::ColumnKind::categorical});
  return s;
}

namespace detail {

inline std::size_t pick(Rng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (const double w : weights) total += w;
  double u = rng.uniform01() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return i;
    u -= weights[i];
  }
  return weights.size() - 1;
}

}  // namespace detail

/// The raw table as CSV text (header first). Missing cells are empty.
inline std::string generate_csv(const SyntheticSpec& spec) {
  spec.validate();
  const auto schema = synthetic_schema(spec);
  Rng rng(derive_seed(spec.seed, "synthetic"));
  const std::vector<double> pay_legit{0.45, 0.25, 0.2, 0.07, 0.03};
  const std::vector<double> pay_fraud{0.1, 0.15, 0.2, 0.25, 0.3};
  const std::vector<double> os_legit{0.3, 0.2, 0.2, 0.25, 0.05};
  const std::vector<double> os_fraud{0.1, 0.1, 0.2, 0.3, 0.3};

  std::string out;
  for (std::size_t c = 0; c < schema.columns.size(); ++c) {
    if (c) out += ',';
    out += schema.columns[c].name;
  }
  out += '\n';

  char buf[48];
  for (std::size_t r = 0; r < spec.n; ++r) {
    const bool fraud = rng.uniform01() < spec.fraud_rate;
    const double shift = fraud ? spec.separation : 0.0;
    std::vector<std::string> cells;
    cells.push_back(fraud ? "1" : "0");

    // income: roughly in (0.1, 0.9), higher for fraud rows
    const double income = std::clamp(0.45 + 0.12 * (rng.normal() + shift), 0.01, 0.99);
    std::snprintf(buf, sizeof buf, "%.6f", income);
    cells.emplace_back(buf);
    for (std::size_t j = 1; j < spec.d; ++j) {
      const double sign = j % 3 == 0 ? -1.0 : 1.0;
      const double z = rng.normal() + sign * shift;
      if (j % 2 == 1) {
        std::snprintf(buf, sizeof buf, "%.6f", 50.0 + 10.0 * z);
      } else {
        std::snprintf(buf, sizeof buf, "%.0f", std::round(20.0 + 4.0 * z));
      }
      cells.emplace_back(buf);
    }
    cells.push_back(payment_types()[detail::pick(rng, fraud ? pay_fraud : pay_legit)]);
    cells.push_back(device_systems()[detail::pick(rng, fraud ? os_fraud : os_legit)]);

    for (std::size_t c = 1; c < cells.size(); ++c) {
      if (rng.uniform01() < spec.missing_rate) cells[c].clear();
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (c) out += ',';
      out += cells[c];
    }
    out += '\n';
  }
  return out;
}

inline void write_synthetic(const SyntheticSpec& spec, const std::string& csv_path, const std::string& schema_path) {
  const auto text = generate_csv(spec);
  std::ofstream csv(csv_path, std::ios::binary);
  if (!csv) throw IoError("cannot write " + csv_path);
  csv << text;
  if (!csv) throw IoError("write failed for " + csv_path);
  std::ofstream sch(schema_path);
  if (!sch) throw IoError("cannot write " + schema_path);
  sch << data::schema_to_json(synthetic_schema(spec)).dump(2) << '\n';
}

}  // namespace fedfraud::synthetic
