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

#include "cki/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cki/error.hpp"

namespace cki {

std::optional<double> auc(std::span<const double> scores, std::span<const int> positive) {
  if (scores.size() != positive.size()) throw ShapeError("auc: scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: average ranks over tied groups.
  double rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        rank_sum += avg_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

ClassificationMetrics classification_metrics(const Tensor& scores, std::span<const int> labels) {
  const std::size_t n = scores.rows(), c = scores.cols();
  if (n == 0 || labels.size() != n) {
    throw ShapeError("classification metrics need one label per non-empty score row");
  }
  if (c < 2) throw ShapeError("classification metrics need at least two score columns");
  std::vector<std::size_t> tp(c, 0), fp(c, 0), fn(c, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
      if (scores.at(i, j) > scores.at(i, best)) best = j;
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= c) throw ValidationError("label outside the score columns");
    if (best == y) {
      ++correct;
      ++tp[y];
    } else {
      ++fp[best];
      ++fn[y];
    }
  }
  ClassificationMetrics out;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
  double f1_sum = 0.0;
  std::size_t classes = 0;
  for (std::size_t j = 0; j < c; ++j) {
    const std::size_t denom = 2 * tp[j] + fp[j] + fn[j];
    if (denom == 0) continue;
    f1_sum += 2.0 * static_cast<double>(tp[j]) / static_cast<double>(denom);
    ++classes;
  }
  out.f1 = classes ? f1_sum / static_cast<double>(classes) : 0.0;

  if (c == 2) {
    std::vector<double> margin(n);
    std::vector<int> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      margin[i] = scores.at(i, 1) - scores.at(i, 0);
      pos[i] = labels[i] == 1;
    }
    out.auc = auc(margin, pos);
  } else {
    Tensor probs(scores.shape());
    for (std::size_t i = 0; i < n; ++i) {
      double m = scores.at(i, 0);
      for (std::size_t j = 1; j < c; ++j) m = std::max(m, scores.at(i, j));
      double s = 0.0;
      for (std::size_t j = 0; j < c; ++j) s += probs.at(i, j) = std::exp(scores.at(i, j) - m);
      for (std::size_t j = 0; j < c; ++j) probs.at(i, j) /= s;
    }
    double total = 0.0;
    std::vector<double> col(n);
    std::vector<int> pos(n);
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = probs.at(i, j);
        pos[i] = labels[i] == static_cast<int>(j);
      }
      const auto a = auc(col, pos);
      if (!a) return out;  // some class absent: AUC undefined
      total += *a;
    }
    out.auc = total / static_cast<double>(c);
  }
  return out;
}

RankingMetrics ranking_metrics_from_ranks(std::span<const std::size_t> ranks, std::size_t k) {
  if (k < 1) throw ValidationError("ranking cutoff k must be at least 1");
  if (ranks.empty()) throw ValidationError("ranking metrics need at least one user");
  RankingMetrics out;
  for (std::size_t r : ranks) {
    if (r >= 1 && r <= k) {
      out.hit_rate += 1.0;
      out.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
    }
  }
  out.hit_rate /= static_cast<double>(ranks.size());
  out.ndcg /= static_cast<double>(ranks.size());
  return out;
}

RankingMetrics ranking_metrics(const std::vector<std::vector<std::size_t>>& ranked_lists,
                               std::span<const std::size_t> held_out, std::size_t k) {
  if (k < 1) throw ValidationError("ranking cutoff k must be at least 1");
  if (ranked_lists.size() != held_out.size()) {
    throw ShapeError("one held-out item per ranked list is required");
  }
  std::vector<std::size_t> ranks(held_out.size());
  for (std::size_t u = 0; u < held_out.size(); ++u) {
    const auto& list = ranked_lists[u];
    const auto it = std::find(list.begin(), list.end(), held_out[u]);
    // Missing from the list counts as ranked past every cutoff.
    ranks[u] = it == list.end() ? list.size() + k + 1
                                : static_cast<std::size_t>(it - list.begin()) + 1;
  }
  return ranking_metrics_from_ranks(ranks, k);
}

std::vector<std::size_t> target_ranks(const Tensor& scores) {
  std::vector<std::size_t> ranks(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) {
    std::size_t ahead = 0;
    for (std::size_t j = 1; j < scores.cols(); ++j)
      if (scores.at(i, j) >= scores.at(i, 0)) ++ahead;
    ranks[i] = ahead + 1;
  }
  return ranks;
}

std::vector<double> time_runs(const std::function<void()>& fn, std::size_t repetitions) {
  std::vector<double> out;
  out.reserve(repetitions);
  for (std::size_t r = 0; r < repetitions; ++r) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    const auto stop = std::chrono::steady_clock::now();
    out.push_back(std::chrono::duration<double>(stop - start).count());
  }
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

double unrounded_cost_ratio(std::span<const double> method_times,
                            std::span<const double> base_times) {
  if (method_times.size() < 5 || base_times.size() < 5) {
    throw ValidationError("cost ratio needs at least 5 timed repetitions per side");
  }
  const double base = median({base_times.begin(), base_times.end()});
  if (!(base > 0.0)) throw ValidationError("base inference time is zero");
  return median({method_times.begin(), method_times.end()}) / base;
}

double cost_ratio(std::span<const double> method_times, std::span<const double> base_times) {
  return std::round(unrounded_cost_ratio(method_times, base_times) * 10.0) / 10.0;
}

}  // namespace cki
