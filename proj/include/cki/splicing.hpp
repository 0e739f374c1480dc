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

#include <string>
#include <vector>

#include "cki/autodiff.hpp"
#include "cki/checkpoint.hpp"
#include "cki/compatibility.hpp"

namespace cki {

enum class SpliceMode { soft, hard };

const char* to_string(SpliceMode mode);
SpliceMode parse_splice_mode(const std::string& s);

// W = sum_k W_k * V^(k), positionwise. Evaluated as
// W_1 + sum_{k>1} V^(k) (W_k - W_1), equal while the weights sum to one, so
// identical models come back bitwise.
ParameterSet soft_splice(const std::vector<ParameterSet>& models, const CompatibilityMap& compat);

// Each position takes the entry of the model with the largest V^(k); ties
// go to the lowest model index.
ParameterSet hard_splice(const std::vector<ParameterSet>& models, const CompatibilityMap& compat);

// One-hot argmax indicators for a single matrix, [model] -> 0/1 tensor.
std::vector<Tensor> binarize(const std::vector<Tensor>& weights);

ParameterSet splice(const std::vector<ParameterSet>& models, const CompatibilityMap& compat,
                    SpliceMode mode);

// Differentiable splice, one Var per parameter matrix. Soft mode is the
// convex blend. Hard mode forwards the one-hot selection and routes the
// adjoint through the soft weights unchanged (straight-through estimator),
// so its gradients equal soft mode's at the same compatibility.
std::vector<Var> splice_for_training(Graph& graph, const std::vector<ParameterSet>& models,
                                     const std::vector<std::vector<Var>>& compat,
                                     SpliceMode mode);

// Copies the values of spliced graph variables back into a ParameterSet
// with the structure of `like`.
ParameterSet to_parameter_set(const ParameterSet& like, const std::vector<Var>& matrices);

}  // namespace cki
