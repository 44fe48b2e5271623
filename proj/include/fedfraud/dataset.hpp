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
#include <fstream>
#include <map>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedfraud/error.hpp"
#include "fedfraud/matrix.hpp"

namespace fedfraud::data {

struct BinSpec {
  double min = 0.0;
  double max = 0.0;
  int n_bins = 10;
  friend bool operator==(const BinSpec&, const BinSpec&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(BinSpec, min, max, n_bins)

struct Fences {
  double lower = 0.0;
  double upper = 0.0;
  friend bool operator==(const Fences&, const Fences&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Fences, lower, upper)

/// Every statistic fitted while preprocessing, enough to replay the
/// transform on new rows.
struct TransformMetadata {
  std::map<std::string, double> numeric_fill;
  std::map<std::string, std::string> categorical_fill;
  double iqr_multiplier = 1.5;
  std::map<std::string, Fences> iqr_fences;
  std::map<std::string, BinSpec> bins;
  std::map<std::string, std::vector<std::string>> vocabularies;
  std::size_t source_rows = 0;
  std::vector<bool> retained_rows;
  std::vector<std::string> warnings;
  friend bool operator==(const TransformMetadata&, const TransformMetadata&) = default;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(TransformMetadata, numeric_fill, categorical_fill, iqr_multiplier,
                                   iqr_fences, bins, vocabularies, source_rows, retained_rows,
                                   warnings)

/// Numeric feature matrix with binary labels, the output of the pipeline and
/// the unit every client trains on.
struct ProcessedDataset {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> feature_names;
  TransformMetadata metadata;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t cols() const noexcept { return features.cols(); }
  bool empty() const noexcept { return features.rows() == 0; }

  void validate() const {
    if (labels.size() != features.rows()) {
      throw DimensionError("dataset has " + std::to_string(features.rows()) + " rows but " +
                           std::to_string(labels.size()) + " labels");
    }
    if (feature_names.size() != features.cols()) {
      throw DimensionError("dataset has " + std::to_string(features.cols()) + " columns but " +
                           std::to_string(feature_names.size()) + " feature names");
    }
    for (const double v : features.values()) {
      if (!std::isfinite(v)) throw NonFiniteError("dataset contains a non-finite feature value");
    }
    for (const int y : labels) {
      if (y != 0 && y != 1) throw DataError("dataset label outside {0,1}");
    }
  }

  ProcessedDataset subset(std::span<const std::size_t> indices) const {
    ProcessedDataset out;
    out.features = features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (const auto i : indices) out.labels.push_back(labels[i]);
    out.feature_names = feature_names;
    out.metadata = metadata;
    return out;
  }

  std::size_t count_label(int label) const {
    std::size_t n = 0;
    for (const int y : labels) n += (y == label);
    return n;
  }

  friend bool operator==(const ProcessedDataset&, const ProcessedDataset&) = default;
};

inline constexpr const char* kDatasetFormat = "fedfraud.dataset.v1";

inline nlohmann::json dataset_to_json(const ProcessedDataset& ds) {
  ds.validate();
  return {{"format", kDatasetFormat},        {"feature_names", ds.feature_names},
          {"rows", ds.rows()},               {"cols", ds.cols()},
          {"features", ds.features.values()}, {"labels", ds.labels},
          {"metadata", ds.metadata}};
}

inline ProcessedDataset dataset_from_json(const nlohmann::json& j) {
  ProcessedDataset ds;
  try {
    if (j.at("format").get<std::string>() != kDatasetFormat) {
      throw ParseError("unsupported dataset format tag");
    }
    const auto rows = j.at("rows").get<std::size_t>();
    const auto cols = j.at("cols").get<std::size_t>();
    std::vector<double> values;
    values.reserve(rows * cols);
    for (const auto& v : j.at("features")) {
      if (v.is_null()) throw NonFiniteError("dataset contains a non-finite feature value");
      values.push_back(v.get<double>());
    }
    ds.features = Matrix(rows, cols, std::move(values));
    ds.labels = j.at("labels").get<std::vector<int>>();
    ds.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    ds.metadata = j.at("metadata").get<TransformMetadata>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed dataset document: ") + e.what());
  }
  ds.validate();
  return ds;
}

inline void save_dataset(const ProcessedDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << dataset_to_json(ds).dump() << '\n';
}

inline ProcessedDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return dataset_from_json(j);
}

}  // namespace fedfraud::data
