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
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedfraud/dataset.hpp"
#include "fedfraud/error.hpp"
#include "fedfraud/matrix.hpp"
#include "fedfraud/random.hpp"

// Dense binary classifier: input -> hidden1 (ReLU) -> hidden2 (ReLU) -> 1 (sigmoid),
// trained on mean binary cross-entropy with SGD or Adam. All arithmetic is
// float64 and every loop runs in a fixed order, so seeded runs are
// bit-reproducible.
namespace fedfraud::nn {

inline constexpr std::size_t kLayerCount = 3;
inline constexpr double kProbabilityClamp = 1e-12;

struct ModelConfig {
  std::size_t input_dim = 1;
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 32;
  std::uint64_t seed = 0;

  static constexpr std::size_t output = 1;

  void validate() const {
    if (input_dim < 1 || hidden1 < 1 || hidden2 < 1) {
      throw ConfigError("model dimensions must all be >= 1");
    }
  }

  /// (fan_in, fan_out) for each layer.
  std::vector<std::pair<std::size_t, std::size_t>> layer_shapes() const {
    return {{input_dim, hidden1}, {hidden1, hidden2}, {hidden2, output}};
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Layer {
  Matrix weight;  // fan_in x fan_out
  std::vector<double> bias;
  friend bool operator==(const Layer&, const Layer&) = default;
};

struct ModelParams {
  ModelConfig config;
  std::vector<Layer> layers;

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Shape-congruent with the ModelParams it differentiates.
struct Gradients {
  std::vector<Layer> layers;
};

struct AdamState {
  std::vector<Layer> m;
  std::vector<Layer> v;
  std::uint64_t t = 0;
};

enum class Optimizer { sgd, adam };

inline std::string_view to_string(Optimizer o) { return o == Optimizer::sgd ? "sgd" : "adam"; }

inline Optimizer optimizer_from_string(std::string_view s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

struct TrainingConfig {
  double learning_rate = 0.001;
  std::size_t epochs = 1;
  std::size_t batch_size = 32;
  Optimizer optimizer = Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t shuffle_seed = 0;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
      throw ConfigError("learning rate must be a positive finite number");
    }
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
      throw ConfigError("invalid Adam hyperparameters");
    }
  }
};

namespace detail {

inline std::vector<Layer> zeros_like(const std::vector<Layer>& layers) {
  std::vector<Layer> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    out.push_back({Matrix(l.weight.rows(), l.weight.cols()), std::vector<double>(l.bias.size())});
  }
  return out;
}

inline bool congruent(const std::vector<Layer>& a, const std::vector<Layer>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols() ||
        a[i].bias.size() != b[i].bias.size()) {
      return false;
    }
  }
  return true;
}

inline void require_congruent(const std::vector<Layer>& a, const std::vector<Layer>& b,
                              const char* what) {
  if (!congruent(a, b)) throw DimensionError(std::string(what) + ": layer shapes differ");
}

/// Visits every scalar of `target` alongside the matching scalar of `other`.
template <typename Fn>
void zip_values(std::vector<Layer>& target, const std::vector<Layer>& other, Fn&& fn) {
  for (std::size_t l = 0; l < target.size(); ++l) {
    auto& tw = target[l].weight.values();
    const auto& ow = other[l].weight.values();
    for (std::size_t i = 0; i < tw.size(); ++i) fn(tw[i], ow[i]);
    auto& tb = target[l].bias;
    const auto& ob = other[l].bias;
    for (std::size_t i = 0; i < tb.size(); ++i) fn(tb[i], ob[i]);
  }
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

// Subgradient at exactly 0 is taken as 0.
inline double relu_grad(double z) { return z > 0.0 ? 1.0 : 0.0; }

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// out = in * W + b, row by row.
inline Matrix affine(const Matrix& in, const Layer& layer) {
  const std::size_t n = in.rows();
  const std::size_t fan_in = layer.weight.rows();
  const std::size_t fan_out = layer.weight.cols();
  Matrix out(n, fan_out);
  for (std::size_t r = 0; r < n; ++r) {
    auto dst = out.row(r);
    std::copy(layer.bias.begin(), layer.bias.end(), dst.begin());
    const auto src = in.row(r);
    for (std::size_t k = 0; k < fan_in; ++k) {
      const double x = src[k];
      if (x == 0.0) continue;
      const auto w = layer.weight.row(k);
      for (std::size_t o = 0; o < fan_out; ++o) dst[o] += x * w[o];
    }
  }
  return out;
}

inline Matrix apply_relu(Matrix z) {
  for (double& v : z.values()) v = relu(v);
  return z;
}

struct ForwardCache {
  Matrix z1, a1, z2, a2;
  std::vector<double> logits;
  std::vector<double> probabilities;
};

inline void check_params(const ModelParams& params) {
  if (params.layers.size() != kLayerCount) {
    throw DimensionError("model must have exactly 3 layers");
  }
  const auto shapes = params.config.layer_shapes();
  for (std::size_t l = 0; l < kLayerCount; ++l) {
    const auto& layer = params.layers[l];
    if (layer.weight.rows() != shapes[l].first || layer.weight.cols() != shapes[l].second ||
        layer.bias.size() != shapes[l].second) {
      throw DimensionError("layer " + std::to_string(l) + " shape does not match model config");
    }
  }
}

inline ForwardCache run_forward(const ModelParams& params, const Matrix& batch) {
  check_params(params);
  if (batch.cols() != params.config.input_dim) {
    throw DimensionError("batch has " + std::to_string(batch.cols()) + " columns, model expects " +
                         std::to_string(params.config.input_dim));
  }
  ForwardCache c;
  c.z1 = affine(batch, params.layers[0]);
  c.a1 = apply_relu(c.z1);
  c.z2 = affine(c.a1, params.layers[1]);
  c.a2 = apply_relu(c.z2);
  const Matrix z3 = affine(c.a2, params.layers[2]);
  c.logits = z3.values();
  c.probabilities.resize(c.logits.size());
  // Keep outputs strictly inside (0, 1) even when exp() saturates.
  constexpr double lo = std::numeric_limits<double>::min();
  const double hi = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < c.logits.size(); ++i) {
    c.probabilities[i] = std::clamp(sigmoid(c.logits[i]), lo, hi);
  }
  return c;
}

}  // namespace detail

inline void validate_params(const ModelParams& params) {
  params.config.validate();
  detail::check_params(params);
  for (const auto& l : params.layers) {
    for (const double v : l.weight.values()) {
      if (!std::isfinite(v)) throw NonFiniteError("model weight is not finite");
    }
    for (const double v : l.bias) {
      if (!std::isfinite(v)) throw NonFiniteError("model bias is not finite");
    }
  }
}

/// Xavier-uniform weights from a generator seeded by config.seed; zero biases.
inline ModelParams init_model(const ModelConfig& config) {
  config.validate();
  Rng rng(config.seed);
  ModelParams params{config, {}};
  for (const auto& [fan_in, fan_out] : config.layer_shapes()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Layer layer{Matrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    for (double& w : layer.weight.values()) w = rng.uniform(-limit, limit);
    params.layers.push_back(std::move(layer));
  }
  return params;
}

/// All-zero parameters of the configured shape.
inline ModelParams zero_model(const ModelConfig& config) {
  ModelParams params = init_model(config);
  for (auto& l : params.layers) std::fill(l.weight.values().begin(), l.weight.values().end(), 0.0);
  return params;
}

inline std::vector<double> forward(const ModelParams& params, const Matrix& batch) {
  return detail::run_forward(params, batch).probabilities;
}

inline double bce_loss(std::span<const double> probabilities, std::span<const int> labels) {
  if (probabilities.size() != labels.size()) {
    throw DimensionError("bce_loss: " + std::to_string(probabilities.size()) +
                         " probabilities vs " + std::to_string(labels.size()) + " labels");
  }
  if (probabilities.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    const double p = std::clamp(probabilities[i], kProbabilityClamp, 1.0 - kProbabilityClamp);
    total += labels[i] == 1 ? -std::log(p) : -std::log(1.0 - p);
  }
  return total / static_cast<double>(probabilities.size());
}

struct LossAndGradients {
  double loss = 0.0;
  Gradients grads;
};

/// Mean BCE and its analytic gradient. Uses the fused sigmoid/BCE derivative
/// (p - y) at the output.
inline LossAndGradients backward(const ModelParams& params, const Matrix& batch,
                                 std::span<const int> labels) {
  if (labels.size() != batch.rows()) {
    throw DimensionError("backward: batch rows and label count differ");
  }
  if (batch.rows() == 0) throw DataError("backward: empty batch");
  const auto cache = detail::run_forward(params, batch);
  const std::size_t n = batch.rows();
  const double inv_n = 1.0 / static_cast<double>(n);

  LossAndGradients out;
  out.loss = bce_loss(cache.probabilities, labels);
  out.grads.layers = detail::zeros_like(params.layers);
  auto& g = out.grads.layers;

  const auto& w2 = params.layers[1].weight;
  const auto& w3 = params.layers[2].weight;
  const std::size_t h1 = w2.rows();
  const std::size_t h2 = w2.cols();
  const std::size_t d = batch.cols();

  std::vector<double> dz2(h2);
  std::vector<double> dz1(h1);
  for (std::size_t r = 0; r < n; ++r) {
    const double dlogit = (cache.probabilities[r] - static_cast<double>(labels[r])) * inv_n;

    const auto a2 = cache.a2.row(r);
    for (std::size_t j = 0; j < h2; ++j) g[2].weight(j, 0) += a2[j] * dlogit;
    g[2].bias[0] += dlogit;

    const auto z2 = cache.z2.row(r);
    for (std::size_t j = 0; j < h2; ++j) dz2[j] = dlogit * w3(j, 0) * detail::relu_grad(z2[j]);

    const auto a1 = cache.a1.row(r);
    for (std::size_t i = 0; i < h1; ++i) {
      const auto gw = g[1].weight.row(i);
      for (std::size_t j = 0; j < h2; ++j) gw[j] += a1[i] * dz2[j];
    }
    for (std::size_t j = 0; j < h2; ++j) g[1].bias[j] += dz2[j];

    const auto z1 = cache.z1.row(r);
    for (std::size_t i = 0; i < h1; ++i) {
      double acc = 0.0;
      const auto w = w2.row(i);
      for (std::size_t j = 0; j < h2; ++j) acc += w[j] * dz2[j];
      dz1[i] = acc * detail::relu_grad(z1[i]);
    }

    const auto x = batch.row(r);
    for (std::size_t k = 0; k < d; ++k) {
      const auto gw = g[0].weight.row(k);
      for (std::size_t i = 0; i < h1; ++i) gw[i] += x[k] * dz1[i];
    }
    for (std::size_t i = 0; i < h1; ++i) g[0].bias[i] += dz1[i];
  }
  return out;
}

/// W - lr * g, elementwise.
inline ModelParams sgd_step(ModelParams params, const Gradients& grads, double learning_rate) {
  detail::require_congruent(params.layers, grads.layers, "sgd_step");
  detail::zip_values(params.layers, grads.layers,
                     [learning_rate](double& w, double g) { w -= learning_rate * g; });
  return params;
}

inline AdamState make_adam_state(const ModelParams& params) {
  return {detail::zeros_like(params.layers), detail::zeros_like(params.layers), 0};
}

/// Bias-corrected Adam update.
inline std::pair<ModelParams, AdamState> adam_step(ModelParams params, const Gradients& grads,
                                                   AdamState state, const TrainingConfig& cfg) {
  detail::require_congruent(params.layers, grads.layers, "adam_step");
  if (state.m.empty() && state.v.empty() && state.t == 0) state = make_adam_state(params);
  detail::require_congruent(params.layers, state.m, "adam_step (first moment)");
  detail::require_congruent(params.layers, state.v, "adam_step (second moment)");

  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](std::vector<double>& w, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        w[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
      }
    };
    update(params.layers[l].weight.values(), grads.layers[l].weight.values(),
           state.m[l].weight.values(), state.v[l].weight.values());
    update(params.layers[l].bias, grads.layers[l].bias, state.m[l].bias, state.v[l].bias);
  }
  return {std::move(params), std::move(state)};
}

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_losses;
};

/// Minibatch training for cfg.epochs passes. Each epoch visits rows in an
/// order drawn from a generator seeded once by cfg.shuffle_seed; the final
/// short batch is kept. Adam state starts fresh on every call.
inline TrainResult train_local(ModelParams params, const Matrix& features,
                               std::span<const int> labels, const TrainingConfig& cfg) {
  cfg.validate();
  if (features.rows() == 0) throw DataError("train_local: empty dataset");
  if (labels.size() != features.rows()) {
    throw DimensionError("train_local: feature rows and label count differ");
  }
  detail::check_params(params);

  TrainResult result;
  Rng rng(cfg.shuffle_seed);
  AdamState state = make_adam_state(params);
  const std::size_t n = features.rows();
  std::vector<std::size_t> order(n);
  std::vector<int> batch_labels;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    double weighted_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix batch = features.select_rows(idx);
      batch_labels.clear();
      for (const auto i : idx) batch_labels.push_back(labels[i]);

      auto [loss, grads] = backward(params, batch, batch_labels);
      weighted_loss += loss * static_cast<double>(idx.size());
      if (cfg.optimizer == Optimizer::sgd) {
        params = sgd_step(std::move(params), grads, cfg.learning_rate);
      } else {
        std::tie(params, state) = adam_step(std::move(params), grads, std::move(state), cfg);
      }
    }
    result.epoch_losses.push_back(weighted_loss / static_cast<double>(n));
  }
  result.params = std::move(params);
  return result;
}

inline TrainResult train_local(ModelParams params, const data::ProcessedDataset& dataset,
                               const TrainingConfig& cfg) {
  return train_local(std::move(params), dataset.features, dataset.labels, cfg);
}

inline nlohmann::json training_config_to_json(const TrainingConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"optimizer", to_string(c.optimizer)},
          {"beta1", c.beta1},                 {"beta2", c.beta2},
          {"epsilon", c.epsilon},             {"shuffle_seed", c.shuffle_seed}};
}

/// Missing keys keep the defaults of `base`.
inline TrainingConfig training_config_from_json(const nlohmann::json& j, TrainingConfig base = {}) {
  try {
    base.learning_rate = j.value("learning_rate", base.learning_rate);
    base.epochs = j.value("epochs", base.epochs);
    base.batch_size = j.value("batch_size", base.batch_size);
    if (j.contains("optimizer")) base.optimizer = optimizer_from_string(j.at("optimizer").get<std::string>());
    base.beta1 = j.value("beta1", base.beta1);
    base.beta2 = j.value("beta2", base.beta2);
    base.epsilon = j.value("epsilon", base.epsilon);
    base.shuffle_seed = j.value("shuffle_seed", base.shuffle_seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  base.validate();
  return base;
}

// --- canonical text form -----------------------------------------------------

inline constexpr const char* kParamsFormat = "fedfraud.params.v1";

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"input_dim", c.input_dim},
          {"hidden1", c.hidden1},
          {"hidden2", c.hidden2},
          {"output", ModelConfig::output},
          {"seed", c.seed}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.input_dim = j.at("input_dim").get<std::size_t>();
  c.hidden1 = j.at("hidden1").get<std::size_t>();
  c.hidden2 = j.at("hidden2").get<std::size_t>();
  if (j.contains("output") && j.at("output").get<std::size_t>() != ModelConfig::output) {
    throw DimensionError("model output width must be 1");
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.validate();
  return c;
}

/// Layer-major; within a layer weights (row-major, fan_in x fan_out) precede bias.
inline nlohmann::json params_to_json(const ModelParams& params) {
  validate_params(params);
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : params.layers) {
    layers.push_back({{"weight", {{"shape", nlohmann::json::array({l.weight.rows(), l.weight.cols()})},
                                  {"values", l.weight.values()}}},
                      {"bias", {{"shape", nlohmann::json::array({l.bias.size()})}, {"values", l.bias}}}});
  }
  return {{"format", kParamsFormat},
          {"model_config", model_config_to_json(params.config)},
          {"layers", std::move(layers)}};
}

namespace detail {

inline std::vector<double> finite_values(const nlohmann::json& arr, std::size_t expected,
                                         const std::string& where) {
  if (!arr.is_array()) throw ParseError(where + ": values must be an array");
  if (arr.size() != expected) {
    throw DimensionError(where + ": expected " + std::to_string(expected) + " values, got " +
                         std::to_string(arr.size()));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : arr) {
    // JSON has no NaN/Inf; serializers emit null in their place.
    if (v.is_null()) throw NonFiniteError(where + ": non-finite value");
    if (!v.is_number()) throw ParseError(where + ": non-numeric value");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw NonFiniteError(where + ": non-finite value");
    out.push_back(x);
  }
  return out;
}

}  // namespace detail

inline ModelParams params_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ParseError("params document must be an object");
    if (j.contains("format") && j.at("format").get<std::string>() != kParamsFormat) {
      throw ParseError("unsupported params format tag");
    }
    ModelParams params;
    params.config = model_config_from_json(j.at("model_config"));
    const auto& layers = j.at("layers");
    if (!layers.is_array() || layers.size() != kLayerCount) {
      throw DimensionError("params must contain exactly 3 layers");
    }
    const auto shapes = params.config.layer_shapes();
    for (std::size_t l = 0; l < kLayerCount; ++l) {
      const auto& jl = layers[l];
      const auto wshape = jl.at("weight").at("shape").get<std::vector<std::size_t>>();
      const auto bshape = jl.at("bias").at("shape").get<std::vector<std::size_t>>();
      if (wshape != std::vector<std::size_t>{shapes[l].first, shapes[l].second} ||
          bshape != std::vector<std::size_t>{shapes[l].second}) {
        throw DimensionError("layer " + std::to_string(l) + " shape inconsistent with model_config");
      }
      const std::string where = "layer " + std::to_string(l);
      auto w = detail::finite_values(jl.at("weight").at("values"), wshape[0] * wshape[1],
                                     where + " weight");
      auto b = detail::finite_values(jl.at("bias").at("values"), bshape[0], where + " bias");
      params.layers.push_back({Matrix(wshape[0], wshape[1], std::move(w)), std::move(b)});
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed params document: ") + e.what());
  }
}

inline std::string serialize_params(const ModelParams& params) { return params_to_json(params).dump(); }

inline ModelParams deserialize_params(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("params payload is not valid structured text: ") + e.what());
  }
  return params_from_json(j);
}

inline void save_params(const ModelParams& params, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << serialize_params(params) << '\n';
}

inline ModelParams load_params(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_params(text);
}

}  // namespace fedfraud::nn
