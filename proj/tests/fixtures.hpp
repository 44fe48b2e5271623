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

#include <random>
#include <string>

#include "fedfraud/dataset.hpp"

namespace fedfraud::fixture {

/// Two Gaussian blobs, label 1 shifted by `shift` in every coordinate.
inline data::ProcessedDataset blobs(std::size_t n, std::size_t d, std::uint64_t seed, double shift = 2.0,
                                    double positive_rate = 0.5) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  data::ProcessedDataset ds;
  ds.features = Matrix(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const int y = u(gen) < positive_rate ? 1 : 0;
    ds.labels.push_back(y);
    for (std::size_t j = 0; j < d; ++j) ds.features(r, j) = g(gen) + (y ? shift : 0.0);
  }
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  return ds;
}

}  // namespace fedfraud::fixture
