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
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedfraud/dataset.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/matrix.hpp"
#include "fedfraud/random.hpp"

namespace fedfraud::data {

enum class ColumnKind { integer, floating, categorical };

inline std::string_view to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::integer: return "integer";
    case ColumnKind::floating: return "float";
    case ColumnKind::categorical: return "categorical";
  }
  return "?";
}

inline ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "integer" || s == "int") return ColumnKind::integer;
  if (s == "float" || s == "floating") return ColumnKind::floating;
  if (s == "categorical" || s == "string") return ColumnKind::categorical;
  throw ConfigError("unknown column kind '" + std::string(s) + "'");
}

/// One typed column. Numeric kinds use `numeric`, categorical uses `text`;
/// std::nullopt marks a missing cell.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::floating;
  std::vector<std::optional<double>> numeric;
  std::vector<std::optional<std::string>> text;

  bool is_numeric() const noexcept { return kind != ColumnKind::categorical; }
  std::size_t size() const noexcept { return is_numeric() ? numeric.size() : text.size(); }
  bool missing(std::size_t row) const {
    return is_numeric() ? !numeric[row].has_value() : !text[row].has_value();
  }
  std::size_t missing_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += missing(i);
    return n;
  }
  friend bool operator==(const Column&, const Column&) = default;
};

struct RawTable {
  std::vector<Column> columns;
  std::size_t row_count = 0;

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return i;
    }
    return std::nullopt;
  }

  const Column& column(std::string_view name) const {
    const auto i = index_of(name);
    if (!i) throw DataError("no column named '" + std::string(name) + "'");
    return columns[*i];
  }
  Column& column(std::string_view name) {
    return const_cast<Column&>(std::as_const(*this).column(name));
  }

  void validate() const {
    for (const auto& c : columns) {
      if (c.size() != row_count) {
        throw DimensionError("column '" + c.name + "' has " + std::to_string(c.size()) +
                             " values, table has " + std::to_string(row_count) + " rows");
      }
      if ((c.is_numeric() && !c.text.empty()) || (!c.is_numeric() && !c.numeric.empty())) {
        throw DataError("column '" + c.name + "' holds values inconsistent with its kind");
      }
    }
  }

  RawTable select_rows(std::span<const std::size_t> rows) const {
    RawTable out;
    out.row_count = rows.size();
    for (const auto& c : columns) {
      Column nc{c.name, c.kind, {}, {}};
      if (c.is_numeric()) {
        nc.numeric.reserve(rows.size());
        for (const auto r : rows) nc.numeric.push_back(c.numeric[r]);
      } else {
        nc.text.reserve(rows.size());
        for (const auto r : rows) nc.text.push_back(c.text[r]);
      }
      out.columns.push_back(std::move(nc));
    }
    return out;
  }

  friend bool operator==(const RawTable&, const RawTable&) = default;
};

struct SchemaColumn {
  std::string name;
  ColumnKind kind;
  friend bool operator==(const SchemaColumn&, const SchemaColumn&) = default;
};

/// Expected columns of the input file. The target must be an integer column
/// holding only 0 and 1.
struct DatasetSchema {
  std::string target = "fraud_bool";
  std::vector<SchemaColumn> columns;
  std::vector<std::string> missing_tokens{"", "NA"};

  const SchemaColumn* find(std::string_view name) const {
    for (const auto& c : columns) {
      if (c.name == name) return &c;
    }
    return nullptr;
  }

  void validate() const {
    const auto* t = find(target);
    if (t == nullptr) throw ConfigError("schema does not declare target column '" + target + "'");
    if (t->kind != ColumnKind::integer) throw ConfigError("target column must be integer kind");
    std::set<std::string> seen;
    for (const auto& c : columns) {
      if (!seen.insert(c.name).second) throw ConfigError("schema repeats column '" + c.name + "'");
    }
  }

  std::vector<std::string> categorical_columns() const {
    std::vector<std::string> out;
    for (const auto& c : columns) {
      if (c.kind == ColumnKind::categorical) out.push_back(c.name);
    }
    return out;
  }

  /// Column layout of the Bank Account Fraud base table (32 columns).
  static DatasetSchema bank_account_fraud() {
    using K = ColumnKind;
    DatasetSchema s;
    s.columns = {{"fraud_bool", K::integer},
                 {"income", K::floating},
                 {"name_email_similarity", K::floating},
                 {"prev_address_months_count", K::integer},
                 {"current_address_months_count", K::integer},
                 {"customer_age", K::integer},
                 {"days_since_request", K::floating},
                 {"intended_balcon_amount", K::floating},
                 {"payment_type", K::categorical},
                 {"zip_count_4w", K::integer},
                 {"velocity_6h", K::floating},
                 {"velocity_24h", K::floating},
                 {"velocity_4w", K::floating},
                 {"bank_branch_count_8w", K::integer},
                 {"date_of_birth_distinct_emails_4w", K::integer},
                 {"employment_status", K::categorical},
                 {"credit_risk_score", K::integer},
                 {"email_is_free", K::integer},
                 {"housing_status", K::categorical},
                 {"phone_home_valid", K::integer},
                 {"phone_mobile_valid", K::integer},
                 {"bank_months_count", K::integer},
                 {"has_other_cards", K::integer},
                 {"proposed_credit_limit", K::floating},
                 {"foreign_request", K::integer},
                 {"source", K::categorical},
                 {"session_length_in_minutes", K::floating},
                 {"device_os", K::categorical},
                 {"keep_alive_session", K::integer},
                 {"device_distinct_emails_8w", K::integer},
                 {"device_fraud_count", K::integer},
                 {"month", K::integer}};
    return s;
  }
};

inline nlohmann::json schema_to_json(const DatasetSchema& s) {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : s.columns) cols.push_back({{"name", c.name}, {"kind", to_string(c.kind)}});
  return {{"target", s.target}, {"missing_tokens", s.missing_tokens}, {"columns", cols}};
}

inline DatasetSchema schema_from_json(const nlohmann::json& j) {
  DatasetSchema s;
  try {
    s.target = j.value("target", s.target);
    if (j.contains("missing_tokens")) {
      s.missing_tokens = j.at("missing_tokens").get<std::vector<std::string>>();
    }
    for (const auto& c : j.at("columns")) {
      s.columns.push_back(
          {c.at("name").get<std::string>(), column_kind_from_string(c.at("kind").get<std::string>())});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed schema document: ") + e.what());
  }
  s.validate();
  return s;
}

inline DatasetSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return schema_from_json(j);
}

// --- CSV ---------------------------------------------------------------------

namespace detail {

/// Splits one CSV record; supports double-quoted fields with "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  if (quoted) throw ParseError("unterminated quoted field");
  out.push_back(std::move(field));
  return out;
}

inline std::optional<double> parse_number(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string trim_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

inline std::vector<std::vector<std::string>> read_csv_records(const std::string& path,
                                                              std::vector<std::string>& header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file");
  header = split_csv_line(trim_cr(line));
  std::vector<std::vector<std::string>> records;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim_cr(line);
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      throw ParseError(path + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    records.push_back(std::move(fields));
  }
  return records;
}

}  // namespace detail

/// Reads a comma-separated file with a header row, typing each column per the
/// schema. Cells equal to one of schema.missing_tokens become missing.
inline RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
  schema.validate();
  std::vector<std::string> header;
  const auto records = detail::read_csv_records(path, header);

  for (const auto& h : header) {
    if (schema.find(h) == nullptr) throw DataError(path + ": unknown column '" + h + "'");
  }
  for (const auto& c : schema.columns) {
    if (std::find(header.begin(), header.end(), c.name) == header.end()) {
      throw DataError(path + ": missing column '" + c.name + "'");
    }
  }
  if (records.empty()) throw DataError(path + ": table has a header but no rows");

  auto is_missing = [&](const std::string& cell) {
    return std::find(schema.missing_tokens.begin(), schema.missing_tokens.end(), cell) !=
           schema.missing_tokens.end();
  };

  RawTable table;
  table.row_count = records.size();
  for (std::size_t ci = 0; ci < header.size(); ++ci) {
    const auto& sc = *schema.find(header[ci]);
    Column col{sc.name, sc.kind, {}, {}};
    for (std::size_t r = 0; r < records.size(); ++r) {
      const auto& cell = records[r][ci];
      const bool absent = is_missing(cell);
      if (sc.kind == ColumnKind::categorical) {
        col.text.push_back(absent ? std::nullopt : std::optional<std::string>(cell));
        continue;
      }
      if (absent) {
        col.numeric.push_back(std::nullopt);
        continue;
      }
      const auto v = detail::parse_number(cell);
      const auto where = "row " + std::to_string(r + 1) + ", column '" + sc.name + "'";
      if (!v) {
        throw ParseError(path + ": " + where + ": cannot parse '" + cell + "' as " +
                         std::string(to_string(sc.kind)));
      }
      if (sc.kind == ColumnKind::integer && *v != std::floor(*v)) {
        throw ParseError(path + ": " + where + ": '" + cell + "' is not an integer");
      }
      col.numeric.push_back(v);
    }
    table.columns.push_back(std::move(col));
  }

  const auto& target = table.column(schema.target);
  for (std::size_t r = 0; r < table.row_count; ++r) {
    if (!target.numeric[r] || (*target.numeric[r] != 0.0 && *target.numeric[r] != 1.0)) {
      throw DataError(path + ": row " + std::to_string(r + 1) + ": target '" + schema.target +
                      "' must be 0 or 1");
    }
  }
  return table;
}

/// Derives a schema from the file: a column is integer if every present cell
/// is an integral number, float if every present cell is numeric, else
/// categorical.
inline DatasetSchema infer_schema(const std::string& path, const std::string& target = "fraud_bool",
                                  std::vector<std::string> missing_tokens = {"", "NA"}) {
  std::vector<std::string> header;
  const auto records = detail::read_csv_records(path, header);
  DatasetSchema s;
  s.target = target;
  s.missing_tokens = std::move(missing_tokens);
  for (std::size_t ci = 0; ci < header.size(); ++ci) {
    bool all_numeric = true;
    bool all_integral = true;
    for (const auto& rec : records) {
      const auto& cell = rec[ci];
      if (std::find(s.missing_tokens.begin(), s.missing_tokens.end(), cell) != s.missing_tokens.end()) {
        continue;
      }
      const auto v = detail::parse_number(cell);
      if (!v) {
        all_numeric = false;
        break;
      }
      if (*v != std::floor(*v) || cell.find_first_of(".eE") != std::string::npos) all_integral = false;
    }
    const ColumnKind kind = !all_numeric   ? ColumnKind::categorical
                            : all_integral ? ColumnKind::integer
                                           : ColumnKind::floating;
    s.columns.push_back({header[ci], kind});
  }
  s.validate();
  return s;
}

// --- imputation ---------------------------------------------------------------

/// Mean for numeric columns, mode for categorical (ties go to the
/// lexicographically smallest value). Recorded for every column that has at
/// least one present value.
inline void fit_imputation(const RawTable& table, TransformMetadata& meta) {
  for (const auto& c : table.columns) {
    if (c.is_numeric()) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& v : c.numeric) {
        if (v) {
          sum += *v;
          ++n;
        }
      }
      if (n == 0) throw DataError("column '" + c.name + "' has no present values to impute from");
      meta.numeric_fill[c.name] = sum / static_cast<double>(n);
    } else {
      std::map<std::string, std::size_t> counts;
      for (const auto& v : c.text) {
        if (v) ++counts[*v];
      }
      if (counts.empty()) throw DataError("column '" + c.name + "' has no present values to impute from");
      // std::map iterates in lexicographic order; strict > keeps the first maximum.
      auto best = counts.begin();
      for (auto it = counts.begin(); it != counts.end(); ++it) {
        if (it->second > best->second) best = it;
      }
      meta.categorical_fill[c.name] = best->first;
    }
  }
}

inline RawTable apply_imputation(RawTable table, const TransformMetadata& meta) {
  for (auto& c : table.columns) {
    if (c.missing_count() == 0) continue;
    if (c.is_numeric()) {
      const auto it = meta.numeric_fill.find(c.name);
      if (it == meta.numeric_fill.end()) throw DataError("no fill value for column '" + c.name + "'");
      for (auto& v : c.numeric) {
        if (!v) v = it->second;
      }
    } else {
      const auto it = meta.categorical_fill.find(c.name);
      if (it == meta.categorical_fill.end()) throw DataError("no fill value for column '" + c.name + "'");
      for (auto& v : c.text) {
        if (!v) v = it->second;
      }
    }
  }
  return table;
}

inline RawTable impute(const RawTable& table, TransformMetadata& meta) {
  table.validate();
  for (const auto& c : table.columns) {
    if (c.size() > 0 && c.missing_count() == c.size()) {
      throw DataError("column '" + c.name + "' is entirely missing");
    }
  }
  fit_imputation(table, meta);
  return apply_imputation(table, meta);
}

inline RawTable impute(const RawTable& table) {
  TransformMetadata meta;
  return impute(table, meta);
}

// --- IQR outlier removal -----------------------------------------------------

/// Linear interpolation at position (n-1)*q of an ascending sequence.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw DataError("quantile of empty sequence");
  const double pos = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

inline Fences iqr_fences(std::span<const double> values, double multiplier = 1.5) {
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double q1 = quantile_sorted(sorted, 0.25);
  const double q3 = quantile_sorted(sorted, 0.75);
  const double iqr = q3 - q1;
  return {q1 - multiplier * iqr, q3 + multiplier * iqr};
}

/// Fences for every float column, from the table as given. Columns with fewer
/// than 4 present values are skipped with a warning.
inline void fit_outlier_fences(const RawTable& table, double multiplier, TransformMetadata& meta) {
  if (!(multiplier > 0.0) || !std::isfinite(multiplier)) {
    throw ConfigError("IQR multiplier must be finite and positive");
  }
  meta.iqr_multiplier = multiplier;
  for (const auto& c : table.columns) {
    if (c.kind != ColumnKind::floating) continue;
    std::vector<double> present;
    for (const auto& v : c.numeric) {
      if (v) present.push_back(*v);
    }
    if (present.size() < 4) {
      meta.warnings.push_back("outlier removal skipped for column '" + c.name + "': only " +
                              std::to_string(present.size()) + " values");
      continue;
    }
    meta.iqr_fences[c.name] = iqr_fences(present, multiplier);
  }
}

/// Drops every row with a float value outside its column's fences. Returns
/// the kept row indices.
inline std::vector<std::size_t> rows_within_fences(const RawTable& table,
                                                   const TransformMetadata& meta) {
  std::vector<bool> keep(table.row_count, true);
  for (const auto& [name, fence] : meta.iqr_fences) {
    const auto idx = table.index_of(name);
    if (!idx) continue;
    const auto& col = table.columns[*idx];
    for (std::size_t r = 0; r < table.row_count; ++r) {
      const auto& v = col.numeric[r];
      if (v && (*v < fence.lower || *v > fence.upper)) keep[r] = false;
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t r = 0; r < keep.size(); ++r) {
    if (keep[r]) kept.push_back(r);
  }
  return kept;
}

inline RawTable remove_outliers_iqr(const RawTable& table, double multiplier,
                                    TransformMetadata& meta) {
  table.validate();
  fit_outlier_fences(table, multiplier, meta);
  const auto kept = rows_within_fences(table, meta);
  meta.source_rows = table.row_count;
  meta.retained_rows.assign(table.row_count, false);
  for (const auto r : kept) meta.retained_rows[r] = true;
  return table.select_rows(kept);
}

inline RawTable remove_outliers_iqr(const RawTable& table, double multiplier = 1.5) {
  TransformMetadata meta;
  return remove_outliers_iqr(table, multiplier, meta);
}

// --- binning -----------------------------------------------------------------

inline int bin_value(double x, const BinSpec& spec) {
  const double scaled = (x - spec.min) * static_cast<double>(spec.n_bins) / (spec.max - spec.min);
  const double label = std::floor(scaled);
  if (!(label >= 0.0)) return 0;
  if (label >= static_cast<double>(spec.n_bins - 1)) return spec.n_bins - 1;
  return static_cast<int>(label);
}

inline BinSpec fit_bins(std::span<const double> values, int n_bins = 10) {
  if (n_bins < 1) throw ConfigError("bin count must be >= 1");
  if (values.empty()) throw DataError("cannot bin an empty column");
  for (const double v : values) {
    if (!std::isfinite(v)) throw NonFiniteError("cannot bin non-finite values");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (!(*hi > *lo)) throw DataError("cannot bin a constant column (max == min)");
  return {*lo, *hi, n_bins};
}

/// Equal-width bins over [min, max]; max falls in the last bin.
inline std::vector<int> bin_column(std::span<const double> values, int n_bins = 10) {
  const BinSpec spec = fit_bins(values, n_bins);
  std::vector<int> out;
  out.reserve(values.size());
  for (const double v : values) out.push_back(bin_value(v, spec));
  return out;
}

// --- one-hot -----------------------------------------------------------------

inline std::vector<std::string> vocabulary_of(const Column& c) {
  std::set<std::string> values;
  for (const auto& v : c.text) {
    if (v) values.insert(*v);
  }
  return {values.begin(), values.end()};
}

inline RawTable apply_one_hot(const RawTable& table, const std::vector<std::string>& columns,
                              const TransformMetadata& meta) {
  RawTable out;
  out.row_count = table.row_count;
  for (const auto& c : table.columns) {
    if (std::find(columns.begin(), columns.end(), c.name) == columns.end()) {
      out.columns.push_back(c);
      continue;
    }
    if (c.kind != ColumnKind::categorical) {
      throw DataError("one-hot column '" + c.name + "' is not categorical");
    }
    const auto it = meta.vocabularies.find(c.name);
    if (it == meta.vocabularies.end()) throw DataError("no vocabulary for column '" + c.name + "'");
    for (const auto& value : it->second) {
      Column bin{c.name + "=" + value, ColumnKind::integer, {}, {}};
      bin.numeric.reserve(c.size());
      for (const auto& v : c.text) bin.numeric.push_back(v && *v == value ? 1.0 : 0.0);
      out.columns.push_back(std::move(bin));
    }
  }
  return out;
}

/// Replaces each named categorical column, in place, by one 0/1 column per
/// distinct value (lexicographic order), named "<column>=<value>".
inline RawTable one_hot(const RawTable& table, const std::vector<std::string>& columns,
                        TransformMetadata& meta) {
  table.validate();
  for (const auto& name : columns) {
    const auto& c = table.column(name);
    if (c.kind != ColumnKind::categorical) {
      throw DataError("one-hot column '" + name + "' is not categorical");
    }
    meta.vocabularies[name] = vocabulary_of(c);
  }
  return apply_one_hot(table, columns, meta);
}

inline RawTable one_hot(const RawTable& table,
                        const std::vector<std::string>& columns = {"payment_type", "employment_status",
                                                                   "housing_status", "source",
                                                                   "device_os"}) {
  TransformMetadata meta;
  return one_hot(table, columns, meta);
}

// --- correlation ---------------------------------------------------------------

struct CorrelationMatrix {
  std::vector<std::string> names;
  Matrix values;
  std::vector<std::string> warnings;
};

inline double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DimensionError("pearson needs two equal-length series");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// Pearson correlations between all numeric columns. Columns with zero
/// variance are excluded with a warning.
inline CorrelationMatrix correlation_matrix(const RawTable& table) {
  table.validate();
  CorrelationMatrix out;
  std::vector<std::vector<double>> series;
  for (const auto& c : table.columns) {
    if (!c.is_numeric()) continue;
    if (c.missing_count() != 0) throw DataError("column '" + c.name + "' has missing values");
    std::vector<double> s;
    s.reserve(c.size());
    for (const auto& v : c.numeric) s.push_back(*v);
    const auto [lo, hi] = std::minmax_element(s.begin(), s.end());
    if (s.empty() || *lo == *hi) {
      out.warnings.push_back("column '" + c.name + "' has zero variance; excluded from correlation");
      continue;
    }
    out.names.push_back(c.name);
    series.push_back(std::move(s));
  }
  if (series.size() < 2) throw DataError("correlation needs at least two non-constant numeric columns");
  const std::size_t m = series.size();
  out.values = Matrix(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    out.values(i, i) = 1.0;
    for (std::size_t j = i + 1; j < m; ++j) {
      const double r = pearson(series[i], series[j]);
      out.values(i, j) = r;
      out.values(j, i) = r;
    }
  }
  return out;
}

inline std::string correlation_to_csv(const CorrelationMatrix& cm) {
  std::ostringstream out;
  char buf[32];
  for (const auto& n : cm.names) out << ',' << n;
  out << '\n';
  for (std::size_t i = 0; i < cm.names.size(); ++i) {
    out << cm.names[i];
    for (std::size_t j = 0; j < cm.names.size(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", cm.values(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
  return out.str();
}

// --- split / shard -------------------------------------------------------------

struct SplitSpec {
  double train_fraction = 0.8;
  std::size_t shard_count = 3;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ConfigError("train fraction must lie strictly between 0 and 1");
    }
    if (shard_count < 1) throw ConfigError("shard count must be >= 1");
  }
};

inline std::size_t train_row_count(std::size_t n, double fraction) {
  // The small offset keeps products like 0.29 * 100 from flooring to 28.
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

/// Seeded shuffle; the first floor(fraction * n) rows train, the rest test.
inline std::pair<ProcessedDataset, ProcessedDataset> train_test_split(const ProcessedDataset& ds,
                                                                      const SplitSpec& spec) {
  spec.validate();
  if (ds.rows() < 2) throw DataError("train/test split needs at least 2 rows");
  const auto order = shuffled_indices(ds.rows(), spec.seed);
  const std::size_t n_train = train_row_count(ds.rows(), spec.train_fraction);
  const std::span<const std::size_t> all(order);
  return {ds.subset(all.first(n_train)), ds.subset(all.subspan(n_train))};
}

/// Seeded shuffle, then k contiguous chunks; the first n % k chunks get one
/// extra row.
inline std::vector<ProcessedDataset> shard(const ProcessedDataset& train, std::size_t k,
                                           std::uint64_t seed) {
  if (k < 1) throw ConfigError("shard count must be >= 1");
  if (train.rows() < k) {
    throw DataError("cannot split " + std::to_string(train.rows()) + " rows into " +
                    std::to_string(k) + " shards");
  }
  const auto order = shuffled_indices(train.rows(), seed);
  const std::span<const std::size_t> all(order);
  const std::size_t base = train.rows() / k;
  const std::size_t extra = train.rows() % k;
  std::vector<ProcessedDataset> out;
  std::size_t start = 0;
  for (std::size_t s = 0; s < k; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    out.push_back(train.subset(all.subspan(start, len)));
    start += len;
  }
  return out;
}

// --- SMOTE -------------------------------------------------------------------

struct Resampled {
  Matrix features;
  std::vector<int> labels;
};

/// Oversamples the minority class to the majority count. Each synthetic row
/// is x + u * (neighbor - x) for a uniformly chosen minority row x, one of its
/// min(k, n_min - 1) nearest minority neighbors (Euclidean, ties by index),
/// and u uniform in [0, 1). Original rows come first, unchanged.
inline Resampled smote(const Matrix& features, std::span<const int> labels,
                       std::size_t k_neighbors = 5, std::uint64_t seed = 0) {
  if (labels.size() != features.rows()) throw DimensionError("smote: rows and labels differ");
  if (k_neighbors < 1) throw ConfigError("smote: k_neighbors must be >= 1");
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw DataError("smote: labels must be 0 or 1");
    by_class[labels[i]].push_back(i);
  }
  if (by_class[0].empty() || by_class[1].empty()) throw DataError("smote: input has a single class");

  Resampled out{features, std::vector<int>(labels.begin(), labels.end())};
  if (by_class[0].size() == by_class[1].size()) return out;

  const int minority_label = by_class[1].size() < by_class[0].size() ? 1 : 0;
  const auto& minority = by_class[minority_label];
  const std::size_t n_min = minority.size();
  const std::size_t n_maj = by_class[1 - minority_label].size();
  if (n_min < 2) throw DataError("smote: minority class needs at least 2 rows");
  const std::size_t k_eff = std::min(k_neighbors, n_min - 1);
  const std::size_t d = features.cols();

  std::vector<std::vector<std::size_t>> neighbors(n_min);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t a = 0; a < n_min; ++a) {
    dist.clear();
    const auto xa = features.row(minority[a]);
    for (std::size_t b = 0; b < n_min; ++b) {
      if (a == b) continue;
      const auto xb = features.row(minority[b]);
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += (xa[j] - xb[j]) * (xa[j] - xb[j]);
      dist.emplace_back(s, b);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_eff), dist.end());
    for (std::size_t i = 0; i < k_eff; ++i) neighbors[a].push_back(dist[i].second);
  }

  Rng rng(seed);
  std::vector<double> synthetic(d);
  for (std::size_t s = n_min; s < n_maj; ++s) {
    const auto a = static_cast<std::size_t>(rng.below(n_min));
    const auto b = neighbors[a][static_cast<std::size_t>(rng.below(k_eff))];
    const double u = rng.uniform01();
    const auto xa = features.row(minority[a]);
    const auto xb = features.row(minority[b]);
    for (std::size_t j = 0; j < d; ++j) synthetic[j] = xa[j] + u * (xb[j] - xa[j]);
    out.features.append_row(synthetic);
    out.labels.push_back(minority_label);
  }
  return out;
}

inline ProcessedDataset smote(const ProcessedDataset& ds, std::size_t k_neighbors = 5,
                              std::uint64_t seed = 0) {
  auto res = smote(ds.features, ds.labels, k_neighbors, seed);
  ProcessedDataset out;
  out.features = std::move(res.features);
  out.labels = std::move(res.labels);
  out.feature_names = ds.feature_names;
  out.metadata = ds.metadata;
  return out;
}

// --- full pipeline -----------------------------------------------------------

struct PipelineConfig {
  std::string target = "fraud_bool";
  std::string binned_column = "income";  // empty disables binning
  std::string binned_name = "binned_income";
  int n_bins = 10;
  /// Columns to one-hot encode; empty means every categorical column.
  std::vector<std::string> one_hot_columns;
  bool remove_outliers = true;
  double iqr_multiplier = 1.5;
};

namespace detail {

inline std::vector<std::string> one_hot_targets(const RawTable& table, const PipelineConfig& cfg) {
  if (!cfg.one_hot_columns.empty()) return cfg.one_hot_columns;
  std::vector<std::string> out;
  for (const auto& c : table.columns) {
    if (c.kind == ColumnKind::categorical) out.push_back(c.name);
  }
  return out;
}

inline std::vector<double> present_values(const Column& c) {
  std::vector<double> out;
  for (const auto& v : c.numeric) {
    if (v) out.push_back(*v);
  }
  return out;
}

inline RawTable apply_binning(RawTable table, const PipelineConfig& cfg, const TransformMetadata& meta) {
  if (cfg.binned_column.empty()) return table;
  const auto idx = table.index_of(cfg.binned_column);
  if (!idx) return table;
  const auto it = meta.bins.find(cfg.binned_column);
  if (it == meta.bins.end()) throw DataError("no bin edges for column '" + cfg.binned_column + "'");
  auto& col = table.columns[*idx];
  if (!col.is_numeric()) throw DataError("binned column '" + col.name + "' is not numeric");
  for (auto& v : col.numeric) {
    if (v) v = static_cast<double>(bin_value(*v, it->second));
  }
  col.name = cfg.binned_name;
  col.kind = ColumnKind::integer;
  return table;
}

inline ProcessedDataset assemble(const RawTable& table, const PipelineConfig& cfg,
                                 TransformMetadata meta) {
  ProcessedDataset ds;
  const auto& target = table.column(cfg.target);
  std::vector<const Column*> feature_cols;
  for (const auto& c : table.columns) {
    if (c.name == cfg.target) continue;
    if (!c.is_numeric()) {
      throw DataError("categorical column '" + c.name + "' was not one-hot encoded");
    }
    feature_cols.push_back(&c);
    ds.feature_names.push_back(c.name);
  }
  ds.features = Matrix(table.row_count, feature_cols.size());
  for (std::size_t j = 0; j < feature_cols.size(); ++j) {
    const auto& col = *feature_cols[j];
    for (std::size_t r = 0; r < table.row_count; ++r) {
      if (!col.numeric[r]) throw DataError("column '" + col.name + "' still has missing values");
      ds.features(r, j) = *col.numeric[r];
    }
  }
  ds.labels.reserve(table.row_count);
  for (const auto& v : target.numeric) {
    if (!v || (*v != 0.0 && *v != 1.0)) throw DataError("target must be 0 or 1 on every row");
    ds.labels.push_back(static_cast<int>(*v));
  }
  ds.metadata = std::move(meta);
  ds.validate();
  return ds;
}

}  // namespace detail

/// Fits every preprocessing statistic on `raw`: fills, IQR fences, bin range
/// (after outlier removal) and one-hot vocabularies.
inline TransformMetadata fit_pipeline(const RawTable& raw, const PipelineConfig& cfg) {
  raw.validate();
  if (!raw.index_of(cfg.target)) throw DataError("table has no target column '" + cfg.target + "'");
  TransformMetadata meta;
  RawTable t = impute(raw, meta);
  meta.iqr_multiplier = cfg.iqr_multiplier;
  if (cfg.remove_outliers) {
    fit_outlier_fences(t, cfg.iqr_multiplier, meta);
    t = t.select_rows(rows_within_fences(t, meta));
  }
  if (!cfg.binned_column.empty()) {
    if (const auto idx = t.index_of(cfg.binned_column)) {
      meta.bins[cfg.binned_column] = fit_bins(detail::present_values(t.columns[*idx]), cfg.n_bins);
    }
  }
  for (const auto& name : detail::one_hot_targets(t, cfg)) {
    const auto& c = t.column(name);
    if (c.kind != ColumnKind::categorical) {
      throw DataError("one-hot column '" + name + "' is not categorical");
    }
    meta.vocabularies[name] = vocabulary_of(c);
  }
  return meta;
}

/// Replays fitted statistics on `raw`. Bin labels beyond the fitted range are
/// clamped; categories outside the vocabulary encode as all zeros.
inline ProcessedDataset apply_pipeline(const RawTable& raw, TransformMetadata meta,
                                       const PipelineConfig& cfg) {
  raw.validate();
  RawTable t = apply_imputation(raw, meta);
  std::vector<std::size_t> kept;
  if (cfg.remove_outliers) {
    kept = rows_within_fences(t, meta);
  } else {
    kept.resize(t.row_count);
    for (std::size_t i = 0; i < kept.size(); ++i) kept[i] = i;
  }
  meta.source_rows = t.row_count;
  meta.retained_rows.assign(t.row_count, false);
  for (const auto r : kept) meta.retained_rows[r] = true;
  t = t.select_rows(kept);
  if (t.row_count == 0) throw DataError("no rows left after outlier removal");
  t = detail::apply_binning(std::move(t), cfg, meta);
  std::vector<std::string> encoded;
  for (const auto& [name, vocab] : meta.vocabularies) encoded.push_back(name);
  t = apply_one_hot(t, encoded, meta);
  return detail::assemble(t, cfg, std::move(meta));
}

/// impute -> IQR row removal -> income binning -> one-hot -> numeric matrix.
inline ProcessedDataset preprocess(const RawTable& raw, const PipelineConfig& cfg = {}) {
  return apply_pipeline(raw, fit_pipeline(raw, cfg), cfg);
}

/// Table after imputation, outlier removal and binning: the numeric view the
/// correlation matrix is computed from.
inline RawTable cleaned_table(const RawTable& raw, const PipelineConfig& cfg = {}) {
  const auto meta = fit_pipeline(raw, cfg);
  RawTable t = apply_imputation(raw, meta);
  if (cfg.remove_outliers) t = t.select_rows(rows_within_fences(t, meta));
  return detail::apply_binning(std::move(t), cfg, meta);
}

}  // namespace fedfraud::data
