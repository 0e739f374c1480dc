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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "cki/error.hpp"
#include "cki/metrics.hpp"
#include "oracles.hpp"

using namespace cki;

TEST_CASE("classification metric examples") {
  Tensor perfect = Tensor::from_rows({{2, 0}, {0, 3}, {1, -1}, {-2, 2}});
  const std::vector<int> labels = {0, 1, 0, 1};
  auto m = classification_metrics(perfect, labels);
  CHECK(m.accuracy == 1.0);
  CHECK(m.f1 == 1.0);
  REQUIRE(m.auc);
  CHECK(*m.auc == 1.0);

  Tensor inverted = Tensor::from_rows({{0, 2}, {3, 0}, {-1, 1}, {2, -2}});
  auto inv = classification_metrics(inverted, labels);
  CHECK(inv.accuracy == 0.0);
  CHECK(*inv.auc == 0.0);

  const std::vector<int> one_class = {1, 1, 1, 1};
  CHECK_FALSE(classification_metrics(perfect, one_class).auc.has_value());
  CHECK_FALSE(auc(std::vector<double>{1, 2}, std::vector<int>{0, 0}).has_value());

  const std::vector<int> out_of_range = {0, 1, 2, 0};
  CHECK_THROWS_AS(classification_metrics(perfect, out_of_range), ValidationError);
  CHECK_THROWS_AS(classification_metrics(perfect, std::vector<int>{0, 1}), ShapeError);
}

TEST_CASE("macro F1 by hand") {
  // predictions: 0, 0, 1, 2 ; labels: 0, 1, 1, 2
  Tensor s = Tensor::from_rows({{1, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  auto m = classification_metrics(s, std::vector<int>{0, 1, 1, 2});
  CHECK(m.accuracy == 0.75);
  // class 0: tp1 fp1 fn0 -> 2/3; class 1: tp1 fp0 fn1 -> 2/3; class 2: 1
  CHECK(m.f1 == doctest::Approx((2.0 / 3 + 2.0 / 3 + 1.0) / 3).epsilon(1e-15));
}

TEST_CASE("AUC matches the all-pairs oracle") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> coarse(0, 6);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < 50; ++i) {
      s[i] = trial % 2 ? coarse(rng) : std::normal_distribution<double>()(rng);
      y[i] = coin(rng);
    }
    if (std::count(y.begin(), y.end(), 1) == 0) y[0] = 1;
    if (std::count(y.begin(), y.end(), 0) == 0) y[0] = 0;
    CHECK(*auc(s, y) == oracle::auc(s, y));
  }
}

TEST_CASE("AUC is invariant under strictly monotone transforms") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(40), t(40);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
      s[i] = std::round(std::normal_distribution<double>()(rng) * 4) / 4;
      t[i] = std::exp(3 * s[i]) - 7;
      y[i] = static_cast<int>(i % 3 == 0);
    }
    CHECK(*auc(s, y) == *auc(t, y));
  }
}

TEST_CASE("multiclass AUC is the one-vs-rest mean") {
  std::mt19937_64 rng(3);
  Tensor s = oracle::random_matrix(rng, 30, 3);
  std::vector<int> y(30);
  for (std::size_t i = 0; i < 30; ++i) y[i] = static_cast<int>(i % 3);
  double expect = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    std::vector<double> col(30);
    std::vector<int> pos(30);
    for (std::size_t i = 0; i < 30; ++i) {
      double z = 0.0;
      for (std::size_t j = 0; j < 3; ++j) z += std::exp(s.at(i, j));
      col[i] = std::exp(s.at(i, c)) / z;
      pos[i] = y[i] == static_cast<int>(c);
    }
    expect += oracle::auc(col, pos);
  }
  CHECK(*classification_metrics(s, y).auc == doctest::Approx(expect / 3).epsilon(1e-12));
}

TEST_CASE("ranking metric examples") {
  const std::vector<std::vector<std::size_t>> first = {{7, 1, 2}, {3, 9, 4}};
  const std::vector<std::size_t> targets = {7, 3};
  auto m = ranking_metrics(first, targets, 5);
  CHECK(m.ndcg == 1.0);
  CHECK(m.hit_rate == 1.0);

  const std::vector<std::vector<std::size_t>> late = {{1, 2, 3, 7}, {9, 4, 5, 3}};
  auto none = ranking_metrics(late, targets, 3);
  CHECK(none.ndcg == 0.0);
  CHECK(none.hit_rate == 0.0);

  CHECK_THROWS_AS(ranking_metrics(first, targets, 0), ValidationError);
  CHECK_THROWS_AS(ranking_metrics(first, std::vector<std::size_t>{7}, 5), ShapeError);

  auto second = ranking_metrics({{1, 7}}, std::vector<std::size_t>{7}, 5);
  CHECK(second.ndcg == doctest::Approx(1.0 / std::log2(3.0)).epsilon(1e-15));
}

TEST_CASE("ranking metrics match a per-user computation") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::uniform_int_distribution<int> coarse(0, 9);
    Tensor scores = Tensor::matrix(10, 21);
    for (auto& v : scores.raw()) v = trial % 2 ? coarse(rng) : std::normal_distribution<double>()(rng);
    for (std::size_t k : {1, 5, 10, 25}) {
      double ndcg = 0.0, hr = 0.0;
      for (std::size_t u = 0; u < 10; ++u) {
        std::vector<double> row(21);
        for (std::size_t j = 0; j < 21; ++j) row[j] = scores.at(u, j);
        auto [n, h] = oracle::leave_one_out(row, k);
        ndcg += n;
        hr += h;
      }
      auto m = ranking_metrics_from_ranks(target_ranks(scores), k);
      CHECK(m.ndcg == doctest::Approx(ndcg / 10).epsilon(1e-12));
      CHECK(m.hit_rate == doctest::Approx(hr / 10).epsilon(1e-12));

      // the same through explicit ranked lists (ties already broken against the target)
      std::vector<std::vector<std::size_t>> lists;
      std::vector<std::size_t> held(10, 0);
      for (std::size_t u = 0; u < 10; ++u) {
        std::vector<std::size_t> items(21);
        std::iota(items.begin(), items.end(), std::size_t{0});
        std::stable_sort(items.begin(), items.end(), [&](std::size_t a, std::size_t b) {
          const double sa = scores.at(u, a), sb = scores.at(u, b);
          if (sa != sb) return sa > sb;
          return a != 0 && b == 0;
        });
        lists.push_back(items);
      }
      auto listed = ranking_metrics(lists, held, k);
      CHECK(listed.ndcg == doctest::Approx(m.ndcg).epsilon(1e-12));
      CHECK(listed.hit_rate == m.hit_rate);
    }
  }
}

TEST_CASE("ranking metrics do not grow as k shrinks") {
  std::mt19937_64 rng(5);
  Tensor scores = oracle::random_matrix(rng, 40, 30);
  const auto ranks = target_ranks(scores);
  RankingMetrics prev = ranking_metrics_from_ranks(ranks, 30);
  for (std::size_t k = 29; k >= 1; --k) {
    auto m = ranking_metrics_from_ranks(ranks, k);
    CHECK(m.ndcg <= prev.ndcg);
    CHECK(m.hit_rate <= prev.hit_rate);
    prev = m;
  }
}

TEST_CASE("target ranks are pessimistic on ties") {
  auto r = target_ranks(Tensor::from_rows({{1, 1, 0}, {2, 1, 3}, {5, 1, 2}}));
  CHECK(r == std::vector<std::size_t>{2, 2, 1});
}

TEST_CASE("cost ratio") {
  const std::vector<double> base = {1.0, 1.1, 0.9, 1.0, 1.05};
  CHECK(cost_ratio(base, base) == 1.0);
  const std::vector<double> twice = {2.0, 2.2, 1.8, 2.0, 2.1};
  CHECK(cost_ratio(twice, base) == 2.0);
  CHECK(unrounded_cost_ratio(std::vector<double>{1.24, 1.24, 1.24, 1.24, 1.24}, base) ==
        doctest::Approx(1.24).epsilon(1e-12));
  CHECK(cost_ratio(std::vector<double>{1.24, 1.24, 1.24, 1.24, 1.24}, base) == 1.2);
  CHECK_THROWS_AS(cost_ratio(std::vector<double>{1, 1, 1, 1}, base), ValidationError);
  CHECK_THROWS_AS(cost_ratio(base, std::vector<double>{0, 0, 0, 0, 0}), ValidationError);
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == 2.5);
}

TEST_CASE("timing measures each repetition") {
  int calls = 0;
  auto times = time_runs([&] {
    ++calls;
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }, 5);
  CHECK(calls == 5);
  REQUIRE(times.size() == 5);
  for (double t : times) CHECK(t >= 0.002);
}
