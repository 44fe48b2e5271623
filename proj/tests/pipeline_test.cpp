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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "fedfraud/pipeline.hpp"

using namespace fedfraud;
using namespace fedfraud::data;

namespace {

Column num(const std::string& name, std::vector<std::optional<double>> v, ColumnKind k = ColumnKind::floating) {
  return {name, k, std::move(v), {}};
}

Column cat(const std::string& name, std::vector<std::optional<std::string>> v) {
  return {name, ColumnKind::categorical, {}, std::move(v)};
}

RawTable table_of(std::vector<Column> cols) {
  RawTable t;
  t.row_count = cols.front().size();
  t.columns = std::move(cols);
  t.validate();
  return t;
}

class TempDir {
 public:
  TempDir() : path_(std::filesystem::temp_directory_path() / ("fedfraud_pipe_" + std::to_string(::getpid()))) {
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p) << text;
    return p.string();
  }

 private:
  std::filesystem::path path_;
};

DatasetSchema small_schema() {
  DatasetSchema s;
  s.columns = {{"fraud_bool", ColumnKind::integer}, {"income", ColumnKind::floating},
               {"age", ColumnKind::integer}, {"source", ColumnKind::categorical}};
  return s;
}

}  // namespace

TEST(Iqr, WorkedExampleDropsOnlyTheOutlier) {
  std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8, 9, 100};
  std::vector<double> sorted = v;
  EXPECT_NEAR(quantile_sorted(sorted, 0.25), 3.25, 1e-12);
  EXPECT_NEAR(quantile_sorted(sorted, 0.75), 7.75, 1e-12);
  const auto f = iqr_fences(v);
  EXPECT_NEAR(f.lower, -3.5, 1e-12);
  EXPECT_NEAR(f.upper, 14.5, 1e-12);

  std::vector<std::optional<double>> cells(v.begin(), v.end());
  const auto out = remove_outliers_iqr(table_of({num("x", cells)}));
  ASSERT_EQ(out.row_count, 9u);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(*out.columns[0].numeric[i], static_cast<double>(i + 1));
}

TEST(Iqr, ConstantColumnKeepsEverything) {
  const auto out = remove_outliers_iqr(table_of({num("x", {5.0, 5.0, 5.0, 5.0, 5.0})}));
  EXPECT_EQ(out.row_count, 5u);
}

TEST(Iqr, IntegerAndShortColumnsAreLeftAlone) {
  TransformMetadata meta;
  const auto t = table_of({num("i", {1, 2, 3, 1000}, ColumnKind::integer), num("f", {1.0, 2.0, 1000.0, std::nullopt})});
  const auto out = remove_outliers_iqr(t, 1.5, meta);
  EXPECT_EQ(out.row_count, 4u);
  EXPECT_EQ(meta.warnings.size(), 1u);
  EXPECT_THROW(remove_outliers_iqr(t, -1.0), ConfigError);
}

TEST(Iqr, NeverAddsRows) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::optional<double>> a, b;
    for (int i = 0; i < 60; ++i) {
      a.push_back(g(gen) * (i % 17 == 0 ? 20 : 1));
      b.push_back(g(gen));
    }
    const auto t = table_of({num("a", a), num("b", b)});
    const auto once = remove_outliers_iqr(t);
    EXPECT_LE(once.row_count, t.row_count);
  }
}

TEST(Impute, MeanAndModeWithLexicographicTie) {
  const auto t = table_of({num("x", {1.0, std::nullopt, 3.0}), cat("c", {"b", "a", std::nullopt})});
  TransformMetadata meta;
  const auto out = impute(t, meta);
  EXPECT_EQ(*out.columns[0].numeric[1], 2.0);
  EXPECT_EQ(*out.columns[1].text[2], "a");
  EXPECT_EQ(meta.numeric_fill.at("x"), 2.0);
  EXPECT_EQ(meta.categorical_fill.at("c"), "a");
  for (const auto& c : out.columns) EXPECT_EQ(c.missing_count(), 0u);
}

TEST(Impute, FullColumnIsUnchanged) {
  const auto t = table_of({num("x", {1.0, 2.0}), cat("c", {"z", "y"})});
  EXPECT_EQ(impute(t), t);
}

TEST(Binning, WorkedExamples) {
  std::vector<double> v;
  for (int i = 0; i <= 10; ++i) v.push_back(i / 10.0);
  const auto spec = fit_bins(v, 10);
  EXPECT_EQ(bin_value(0.55, spec), 5);
  EXPECT_EQ(bin_value(0.0, spec), 0);
  EXPECT_EQ(bin_value(1.0, spec), 9);
  EXPECT_EQ(bin_value(2.0, BinSpec{0.0, 8.0, 4}), 1);
  EXPECT_THROW(fit_bins(std::vector<double>{3.0, 3.0}), DataError);
}

TEST(Binning, LabelsStayInRange) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> v(50);
    for (auto& x : v) x = u(gen);
    const int n = 1 + static_cast<int>(gen() % 12);
    for (const int b : bin_column(v, n)) {
      EXPECT_GE(b, 0);
      EXPECT_LT(b, n);
    }
  }
}

TEST(OneHot, LexicographicColumnsInPlace) {
  const auto t = table_of({num("x", {1.0, 2.0, 3.0}), cat("c", {"B", "C", "A"}), num("y", {0.0, 0.0, 0.0})});
  const auto out = one_hot(t, {"c"});
  std::vector<std::string> names;
  for (const auto& c : out.columns) names.push_back(c.name);
  EXPECT_EQ(names, (std::vector<std::string>{"x", "c=A", "c=B", "c=C", "y"}));
  EXPECT_EQ(*out.columns[1].numeric[0], 0.0);
  EXPECT_EQ(*out.columns[2].numeric[0], 1.0);
  EXPECT_EQ(*out.columns[3].numeric[0], 0.0);
  for (std::size_t r = 0; r < 3; ++r) {
    EXPECT_EQ(*out.columns[1].numeric[r] + *out.columns[2].numeric[r] + *out.columns[3].numeric[r], 1.0);
  }
  EXPECT_THROW(one_hot(t, {"x"}), DataError);
}

TEST(Pearson, WorkedExamples) {
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 3, 2}), 0.5, 1e-12);
  EXPECT_NEAR(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{-2, -4, -6, -8}), -1.0, 1e-12);
}

TEST(Pearson, MatrixIsSymmetricAndSkipsConstants) {
  const auto t = table_of({num("a", {1, 2, 3, 4}), num("b", {2, 1, 4, 3}), num("k", {7, 7, 7, 7}),
                           cat("c", {"x", "y", "x", "y"})});
  const auto cm = correlation_matrix(t);
  EXPECT_EQ(cm.names, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(cm.warnings.size(), 1u);
  EXPECT_EQ(cm.values(0, 0), 1.0);
  EXPECT_EQ(cm.values(0, 1), cm.values(1, 0));
  EXPECT_EQ(correlation_to_csv(cm).substr(0, 5), ",a,b\n");
}

TEST(Split, SizesAndPartition) {
  EXPECT_EQ(train_row_count(10, 0.8), 8u);
  EXPECT_EQ(train_row_count(100, 0.29), 29u);

  ProcessedDataset ds;
  ds.features = Matrix(10, 1);
  for (std::size_t r = 0; r < 10; ++r) ds.features(r, 0) = static_cast<double>(r);
  ds.labels.assign(10, 0);
  ds.feature_names = {"id"};
  const auto [train, test] = train_test_split(ds, {0.8, 3, 42});
  EXPECT_EQ(train.rows(), 8u);
  EXPECT_EQ(test.rows(), 2u);
  std::multiset<double> seen;
  for (std::size_t r = 0; r < 8; ++r) seen.insert(train.features(r, 0));
  for (std::size_t r = 0; r < 2; ++r) seen.insert(test.features(r, 0));
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_EQ(std::set<double>(seen.begin(), seen.end()).size(), 10u);

  const auto again = train_test_split(ds, {0.8, 3, 42});
  EXPECT_EQ(again.first.features, train.features);
}

TEST(Shard, SizesDifferByAtMostOneAndPartition) {
  ProcessedDataset ds;
  ds.features = Matrix(10, 1);
  for (std::size_t r = 0; r < 10; ++r) ds.features(r, 0) = static_cast<double>(r);
  ds.labels.assign(10, 1);
  ds.feature_names = {"id"};
  const auto shards = shard(ds, 3, 5);
  ASSERT_EQ(shards.size(), 3u);
  EXPECT_EQ(shards[0].rows(), 4u);
  EXPECT_EQ(shards[1].rows(), 3u);
  EXPECT_EQ(shards[2].rows(), 3u);
  std::set<double> seen;
  for (const auto& s : shards) {
    for (std::size_t r = 0; r < s.rows(); ++r) EXPECT_TRUE(seen.insert(s.features(r, 0)).second);
  }
  EXPECT_EQ(seen.size(), 10u);
  EXPECT_THROW(shard(ds, 11, 0), DataError);
}

TEST(Smote, BalancesAndInterpolates) {
  std::mt19937_64 gen(1);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(110, 2);
  std::vector<int> y(110, 0);
  for (std::size_t r = 0; r < 110; ++r) {
    x(r, 0) = g(gen);
    x(r, 1) = g(gen);
    if (r >= 100) y[r] = 1;
  }
  const auto out = smote(x, y, 5, 9);
  EXPECT_EQ(std::count(out.labels.begin(), out.labels.end(), 0), 100);
  EXPECT_EQ(std::count(out.labels.begin(), out.labels.end(), 1), 100);
  for (std::size_t r = 0; r < 110; ++r) {
    EXPECT_EQ(out.features(r, 0), x(r, 0));
    EXPECT_EQ(out.labels[r], y[r]);
  }
}

TEST(Smote, BalancedInputIsUnchanged) {
  Matrix x(4, 1, std::vector<double>{1, 2, 3, 4});
  const std::vector<int> y{0, 1, 0, 1};
  const auto out = smote(x, y);
  EXPECT_EQ(out.features, x);
  EXPECT_EQ(out.labels, y);
}

TEST(Smote, RejectsSingleClassAndLoneMinority) {
  Matrix x(3, 1, std::vector<double>{1, 2, 3});
  EXPECT_THROW(smote(x, std::vector<int>{0, 0, 0}), DataError);
  EXPECT_THROW(smote(x, std::vector<int>{0, 0, 1}), DataError);
}

TEST(Smote, Deterministic) {
  Matrix x(6, 1, std::vector<double>{0, 1, 2, 3, 10, 20});
  const std::vector<int> y{0, 0, 0, 0, 1, 1};
  EXPECT_EQ(smote(x, y, 5, 4).features, smote(x, y, 5, 4).features);
}

TEST(LoadCsv, ParsesTypesAndMissingTokens) {
  TempDir dir;
  const auto path = dir.write("t.csv",
                              "fraud_bool,income,age,source\n"
                              "0,0.5,30,INTERNET\n"
                              "1,,40,\"TELE,APP\"\n"
                              "0,NA,50,INTERNET\r\n");
  const auto t = load_csv(path, small_schema());
  EXPECT_EQ(t.row_count, 3u);
  EXPECT_EQ(*t.column("income").numeric[0], 0.5);
  EXPECT_FALSE(t.column("income").numeric[1]);
  EXPECT_FALSE(t.column("income").numeric[2]);
  EXPECT_EQ(*t.column("source").text[1], "TELE,APP");
}

TEST(LoadCsv, ErrorPaths) {
  TempDir dir;
  const auto schema = small_schema();
  EXPECT_THROW(load_csv(dir.write("h.csv", "fraud_bool,income,age,source\n"), schema), DataError);
  EXPECT_THROW(load_csv(dir.write("u.csv", "fraud_bool,income,age,source,zzz\n0,1,2,a,3\n"), schema), DataError);
  EXPECT_THROW(load_csv(dir.write("m.csv", "fraud_bool,income,age\n0,1,2\n"), schema), DataError);
  EXPECT_THROW(load_csv(dir.write("t.csv", "fraud_bool,income,age,source\n2,1,2,a\n"), schema), DataError);
  EXPECT_THROW(load_csv(dir.write("w.csv", "fraud_bool,income,age,source\n0,1,2\n"), schema), ParseError);
  try {
    load_csv(dir.write("p.csv", "fraud_bool,income,age,source\n0,0.1,3,a\n0,abc,3,a\n"), schema);
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("row 2"), std::string::npos) << what;
    EXPECT_NE(what.find("income"), std::string::npos) << what;
  }
  EXPECT_THROW(load_csv(dir.write("i.csv", "fraud_bool,income,age,source\n0,0.1,3.5,a\n"), schema), ParseError);
  EXPECT_THROW(load_csv("/nonexistent/file.csv", schema), IoError);
}

TEST(LoadCsv, InferSchemaReadsKinds) {
  TempDir dir;
  const auto path = dir.write("s.csv", "fraud_bool,income,age,source\n0,0.5,30,A\n1,1.5,,B\n");
  const auto s = infer_schema(path);
  EXPECT_EQ(s.find("income")->kind, ColumnKind::floating);
  EXPECT_EQ(s.find("age")->kind, ColumnKind::integer);
  EXPECT_EQ(s.find("source")->kind, ColumnKind::categorical);
}

TEST(Preprocess, NumericOutputWithoutTargetAndDeterministic) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::optional<double>> target, income, age;
  std::vector<std::optional<std::string>> source;
  for (int i = 0; i < 200; ++i) {
    target.push_back(u(gen) < 0.2 ? 1.0 : 0.0);
    income.push_back(i % 23 == 0 ? std::nullopt : std::optional<double>(u(gen)));
    age.push_back(std::floor(u(gen) * 60 + 18));
    source.push_back(i % 31 == 0 ? std::nullopt : std::optional<std::string>(u(gen) < 0.5 ? "A" : "B"));
  }
  const auto raw = table_of({num("fraud_bool", target, ColumnKind::integer), num("income", income),
                             num("age", age, ColumnKind::integer), cat("source", source)});
  const auto ds = preprocess(raw);
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"binned_income", "age", "source=A", "source=B"}));
  EXPECT_EQ(ds.rows(), ds.labels.size());
  for (const double v : ds.features.values()) EXPECT_TRUE(std::isfinite(v));
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    EXPECT_GE(ds.features(r, 0), 0.0);
    EXPECT_LE(ds.features(r, 0), 9.0);
  }
  EXPECT_EQ(preprocess(raw).features, ds.features);

  // Statistics fitted on one table replay on another.
  const auto meta = fit_pipeline(raw, {});
  const auto replay = apply_pipeline(raw, meta, {});
  EXPECT_EQ(replay.features, ds.features);

  const auto j = dataset_to_json(ds);
  const auto back = dataset_from_json(j);
  EXPECT_EQ(back.features, ds.features);
  EXPECT_EQ(back.labels, ds.labels);
  EXPECT_EQ(back.feature_names, ds.feature_names);
}
