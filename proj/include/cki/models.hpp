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
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cki/autodiff.hpp"
#include "cki/checkpoint.hpp"
#include "cki/data.hpp"

namespace cki {

enum class ArchitectureKind { mlp_classifier, matrix_factorization };

struct OptimizerSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 256;
  std::size_t epochs = 20;
};

struct ModelConfig {
  ArchitectureKind kind = ArchitectureKind::mlp_classifier;
  std::vector<std::size_t> hidden = {64, 32};  // MLP hidden widths
  std::size_t factor_dim = 32;                 // MF embedding width
  std::size_t negatives = 100;                 // MF sampled-softmax negatives
  std::uint64_t seed = 0;
  // Initialization stream; defaults to `seed`. Models sharing it start from
  // the same weights and differ only in data order.
  std::optional<std::uint64_t> init_seed;
  OptimizerSettings optimizer;

  void validate() const;
};

// Parsed architecture tag, e.g. "mlp:20-64-32-4" or "mf:300-400-32".
struct Architecture {
  ArchitectureKind kind;
  std::vector<std::size_t> dims;

  static Architecture parse(const std::string& tag);
  std::string tag() const;
};

// Fresh parameters sized for `data`. MLP layers are named layer<i>.weight
// (in x out, applied as x W) and layer<i>.bias (1 x out); MF uses
// user_embedding and item_embedding.
ParameterSet init_model(const ModelConfig& config, const Dataset& data);

// MLP logits, rows aligned with `features`.
Tensor predict(const ParameterSet& model, const Tensor& features);
// MF scores, one row per case, columns aligned with its candidates.
Tensor predict(const ParameterSet& model, std::span<const RankingCase> cases);

// Graph forward of the MLP; `params` follow the model's declared order.
Var forward_mlp(Graph& graph, const std::vector<Var>& params, Var features);

}  // namespace cki
