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
#include <utility>
#include <variant>
#include <vector>

#include "cki/tensor.hpp"

namespace cki {

enum class TaskKind { classification, ranking };

const char* to_string(TaskKind kind);

struct ClassificationSplit {
  Tensor features;  // rows are samples
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

struct ClassificationData {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  ClassificationSplit train, validation, test;
};

// One leave-one-out evaluation case. candidates[0] is the held-out positive,
// the rest are sampled items the user never interacted with.
struct RankingCase {
  std::size_t user = 0;
  std::vector<std::size_t> candidates;
};

struct InteractionData {
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::vector<std::pair<std::size_t, std::size_t>> train;  // (user, item)
  std::vector<RankingCase> validation, test;
  Tensor planted_affinity;  // users x items, the generating preferences
};

using Dataset = std::variant<ClassificationData, InteractionData>;

TaskKind task_kind(const Dataset& data);

struct ClassificationSpec {
  std::size_t n_train = 5000;
  std::size_t n_validation = 1000;
  std::size_t n_test = 1000;
  std::size_t n_features = 20;
  std::size_t n_classes = 4;
  std::size_t clusters_per_class = 3;
  double separation = 0.7;  // scale of the cluster centers; noise is unit
};

// Gaussian mixture: each class owns `clusters_per_class` centers drawn from
// N(0, separation^2 I); samples add unit Gaussian noise to a random center
// of a uniformly drawn class.
ClassificationData gen_classification(std::uint64_t seed, const ClassificationSpec& spec);

struct InteractionSpec {
  std::size_t n_users = 300;
  std::size_t n_items = 400;
  std::size_t latent_dim = 8;
  std::size_t interactions_per_user = 20;
  std::size_t negatives = 100;
  double temperature = 1.0;
};

// Implicit feedback from a planted low-rank affinity matrix P Q^T. Each user
// draws `interactions_per_user` distinct items with probability
// proportional to exp(affinity / temperature); the last draw is the test
// item, the one before it the validation item.
InteractionData gen_interactions(std::uint64_t seed, const InteractionSpec& spec);

}  // namespace cki
