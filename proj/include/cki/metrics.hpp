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

#include <chrono>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "cki/tensor.hpp"

namespace cki {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double f1 = 0.0;            // macro average over classes seen in labels or predictions
  std::optional<double> auc;  // empty when a class has no positives or no negatives
};

// `scores` is samples x classes. Accuracy uses the argmax (first on ties).
// Binary AUC ranks scores[:,1] - scores[:,0]; with more classes it is the
// one-vs-rest macro average of softmax probabilities.
ClassificationMetrics classification_metrics(const Tensor& scores, std::span<const int> labels);

// Rank-statistic AUC: P(score_pos > score_neg) with ties counted half.
std::optional<double> auc(std::span<const double> scores, std::span<const int> positive);

struct RankingMetrics {
  double ndcg = 0.0;
  double hit_rate = 0.0;
};

// Leave-one-out HR@k and NDCG@k (gain 1 / log2(rank + 1), rank from 1).
RankingMetrics ranking_metrics(const std::vector<std::vector<std::size_t>>& ranked_lists,
                               std::span<const std::size_t> held_out, std::size_t k);

// 1-based rank of column 0 in each row; ties with the target rank ahead of it.
std::vector<std::size_t> target_ranks(const Tensor& scores);
RankingMetrics ranking_metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t k);

// Wall-clock seconds of each of `repetitions` calls.
std::vector<double> time_runs(const std::function<void()>& fn, std::size_t repetitions);

double median(std::vector<double> values);

// median(method) / median(base), rounded to one decimal.
double cost_ratio(std::span<const double> method_times, std::span<const double> base_times);
double unrounded_cost_ratio(std::span<const double> method_times,
                            std::span<const double> base_times);

}  // namespace cki
