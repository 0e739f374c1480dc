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

#include "cki/data.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <unordered_set>

#include "cki/error.hpp"
#include "cki/random.hpp"

namespace cki {

const char* to_string(TaskKind kind) {
  return kind == TaskKind::classification ? "classification" : "ranking";
}

TaskKind task_kind(const Dataset& data) {
  return std::holds_alternative<ClassificationData>(data) ? TaskKind::classification
                                                          : TaskKind::ranking;
}

ClassificationData gen_classification(std::uint64_t seed, const ClassificationSpec& spec) {
  if (spec.n_train == 0 || spec.n_validation == 0 || spec.n_test == 0 || spec.n_features == 0 ||
      spec.n_classes < 2 || spec.clusters_per_class == 0) {
    throw ValidationError("classification data needs non-empty splits, features and >= 2 classes");
  }
  if (!(spec.separation > 0.0)) throw ValidationError("separation must be positive");
  Rng rng(derive_seed(seed, "classification"));
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t d = spec.n_features;
  const std::size_t n_centers = spec.n_classes * spec.clusters_per_class;
  Tensor centers = Tensor::matrix(n_centers, d);
  for (double& v : centers.raw()) v = spec.separation * normal(rng);

  std::uniform_int_distribution<std::size_t> pick_class(0, spec.n_classes - 1);
  std::uniform_int_distribution<std::size_t> pick_cluster(0, spec.clusters_per_class - 1);
  auto draw = [&](std::size_t n) {
    ClassificationSplit split;
    split.features = Tensor::matrix(n, d);
    split.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = pick_class(rng);
      const std::size_t center = c * spec.clusters_per_class + pick_cluster(rng);
      split.labels[i] = static_cast<int>(c);
      for (std::size_t j = 0; j < d; ++j) split.features.at(i, j) = centers.at(center, j) + normal(rng);
    }
    return split;
  };
  ClassificationData data;
  data.n_features = d;
  data.n_classes = spec.n_classes;
  data.train = draw(spec.n_train);
  data.validation = draw(spec.n_validation);
  data.test = draw(spec.n_test);
  return data;
}

InteractionData gen_interactions(std::uint64_t seed, const InteractionSpec& spec) {
  if (spec.n_users == 0 || spec.n_items == 0 || spec.latent_dim == 0) {
    throw ValidationError("interaction data needs positive users, items and latent dimension");
  }
  if (spec.interactions_per_user < 3) {
    throw ValidationError("need at least 3 interactions per user (train, validation, test)");
  }
  if (spec.interactions_per_user + spec.negatives > spec.n_items) {
    throw ValidationError("not enough items for the interactions plus sampled negatives");
  }
  if (!(spec.temperature > 0.0)) throw ValidationError("temperature must be positive");

  Rng rng(derive_seed(seed, "interactions"));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(spec.latent_dim)));
  Tensor users = Tensor::matrix(spec.n_users, spec.latent_dim);
  Tensor items = Tensor::matrix(spec.n_items, spec.latent_dim);
  for (double& v : users.raw()) v = normal(rng);
  for (double& v : items.raw()) v = normal(rng);

  InteractionData data;
  data.n_users = spec.n_users;
  data.n_items = spec.n_items;
  data.planted_affinity = matmul(users, transpose(items));

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> order(spec.n_items);
  std::vector<double> key(spec.n_items);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    // Gumbel top-k samples without replacement proportional to exp(a / T).
    for (std::size_t i = 0; i < spec.n_items; ++i) {
      const double g = -std::log(-std::log(std::max(unit(rng), 1e-300)));
      key[i] = data.planted_affinity.at(u, i) / spec.temperature + g;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::partial_sort(order.begin(),
                      order.begin() + static_cast<std::ptrdiff_t>(spec.interactions_per_user),
                      order.end(), [&](std::size_t a, std::size_t b) {
                        return key[a] > key[b] || (key[a] == key[b] && a < b);
                      });
    std::vector<std::size_t> chosen(order.begin(),
                                    order.begin() + static_cast<std::ptrdiff_t>(spec.interactions_per_user));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    const std::unordered_set<std::size_t> seen(chosen.begin(), chosen.end());

    auto make_case = [&](std::size_t positive) {
      RankingCase c;
      c.user = u;
      c.candidates.push_back(positive);
      std::unordered_set<std::size_t> taken;
      std::uniform_int_distribution<std::size_t> pick(0, spec.n_items - 1);
      while (c.candidates.size() < spec.negatives + 1) {
        const std::size_t item = pick(rng);
        if (seen.count(item) || taken.count(item)) continue;
        taken.insert(item);
        c.candidates.push_back(item);
      }
      return c;
    };
    const std::size_t n = chosen.size();
    for (std::size_t i = 0; i + 2 < n; ++i) data.train.emplace_back(u, chosen[i]);
    data.validation.push_back(make_case(chosen[n - 2]));
    data.test.push_back(make_case(chosen[n - 1]));
  }
  return data;
}

}  // namespace cki
