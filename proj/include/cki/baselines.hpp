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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cki/checkpoint.hpp"
#include "cki/data.hpp"
#include "cki/tensor.hpp"

namespace cki {

// Zeroes the ceil(sparsity * N) smallest-magnitude weights across the whole
// model (one global threshold). Among equal magnitudes the later entry is
// pruned first, so earlier entries survive.
ParameterSet magnitude_prune(const ParameterSet& model, double sparsity);

// Counts forward passes issued on behalf of a method.
struct CostCounter {
  std::size_t forward_passes = 0;
};

// Weighted sum of each model's scores. Empty `weights` means 1/n each.
Tensor output_ensemble(const std::vector<ParameterSet>& models, const Tensor& features,
                       std::span<const double> weights = {}, CostCounter* cost = nullptr);
Tensor output_ensemble(const std::vector<ParameterSet>& models,
                       std::span<const RankingCase> cases, std::span<const double> weights = {},
                       CostCounter* cost = nullptr);

// Positionwise mean, accumulated as W_1 + sum_{k>1} (W_k - W_1) / n in model
// order, the same arithmetic soft_splice does at uniform compatibility.
ParameterSet parameter_average(const std::vector<ParameterSet>& models);

}  // namespace cki
