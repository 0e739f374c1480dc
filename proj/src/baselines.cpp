/*
 * Copyright 2026 The CKI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "cki/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>

#include "cki/error.hpp"
#include "cki/models.hpp"

namespace cki {

ParameterSet magnitude_prune(const ParameterSet& model, double sparsity) {
  if (!(sparsity >= 0.0 && sparsity < 1.0)) {
    throw ValidationError("sparsity must lie in [0, 1), got " + std::to_string(sparsity));
  }
  struct Slot {
    double magnitude;
    std::size_t matrix, index;
  };
  std::vector<Slot> slots;
  slots.reserve(model.parameter_count());
  for (std::size_t m = 0; m < model.size(); ++m) {
    const Tensor& w = model.value(m);
    for (std::size_t i = 0; i < w.size(); ++i) slots.push_back({std::abs(w[i]), m, i});
  }
  const auto count = static_cast<std::size_t>(
      std::ceil(sparsity * static_cast<double>(slots.size()) - 1e-12));
  // Ascending magnitude; ties put later positions first so they go first.
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.magnitude != b.magnitude) return a.magnitude < b.magnitude;
    return std::tie(a.matrix, a.index) > std::tie(b.matrix, b.index);
  });
  ParameterSet out = model;
  for (std::size_t s = 0; s < count; ++s) out.value(slots[s].matrix)[slots[s].index] = 0.0;
  return out;
}

namespace {

std::vector<double> resolve_weights(std::size_t n, std::span<const double> weights) {
  if (n == 0) throw ValidationError("ensemble needs at least one model");
  if (weights.empty()) return std::vector<double>(n, 1.0 / static_cast<double>(n));
  if (weights.size() != n) {
    throw ValidationError("ensemble has " + std::to_string(n) + " models but " +
                          std::to_string(weights.size()) + " weights");
  }
  for (double w : weights)
    if (!std::isfinite(w)) throw ValidationError("ensemble weights must be finite");
  return {weights.begin(), weights.end()};
}

template <typename Forward>
Tensor combine(std::size_t n, std::span<const double> weights, CostCounter* cost,
               Forward&& forward) {
  const auto w = resolve_weights(n, weights);
  Tensor out;
  for (std::size_t k = 0; k < n; ++k) {
    Tensor scores = forward(k);
    if (cost) ++cost->forward_passes;
    if (k == 0) {
      out = Tensor(scores.shape(), 0.0);
    } else if (scores.shape() != out.shape()) {
      throw ShapeError("ensemble member " + std::to_string(k) + " produced " +
                       shape_string(scores.shape()) + ", expected " + shape_string(out.shape()));
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += w[k] * scores[i];
  }
  return out;
}

}  // namespace

Tensor output_ensemble(const std::vector<ParameterSet>& models, const Tensor& features,
                       std::span<const double> weights, CostCounter* cost) {
  return combine(models.size(), weights, cost,
                 [&](std::size_t k) { return predict(models[k], features); });
}

Tensor output_ensemble(const std::vector<ParameterSet>& models,
                       std::span<const RankingCase> cases, std::span<const double> weights,
                       CostCounter* cost) {
  return combine(models.size(), weights, cost,
                 [&](std::size_t k) { return predict(models[k], cases); });
}

ParameterSet parameter_average(const std::vector<ParameterSet>& models) {
  validate_compatible(models);
  const double w = 1.0 / static_cast<double>(models.size());
  ParameterSet out(models.front().architecture());
  for (std::size_t m = 0; m < models.front().size(); ++m) {
    const Tensor& w0 = models[0].value(m);
    Tensor acc = w0;
    for (std::size_t k = 1; k < models.size(); ++k) {
      const Tensor& wk = models[k].value(m);
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += (wk[i] - w0[i]) * w;
    }
    out.add(models[0][m].name, std::move(acc));
  }
  return out;
}

}  // namespace cki
