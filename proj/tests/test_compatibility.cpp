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
#include <random>

#include "cki/compatibility.hpp"
#include "cki/error.hpp"
#include "oracles.hpp"

using namespace cki;

namespace {

const ScalarFn identity = [](double x) { return x; };

ParameterSet single(const Tensor& w, const std::string& name = "w") {
  ParameterSet s("test");
  s.add(name, w);
  return s;
}

// n models sharing a random list of matrix shapes.
std::vector<ParameterSet> random_models(std::mt19937_64& rng, std::size_t n) {
  std::uniform_int_distribution<std::size_t> dim(1, 5), count(1, 3);
  std::vector<Shape> shapes(count(rng));
  for (auto& s : shapes) s = {dim(rng), dim(rng)};
  std::uniform_real_distribution<double> scale(0.1, 3.0);
  std::vector<ParameterSet> models;
  for (std::size_t k = 0; k < n; ++k) {
    ParameterSet p("test");
    for (std::size_t m = 0; m < shapes.size(); ++m) {
      p.add("m" + std::to_string(m), oracle::random_matrix(rng, shapes[m][0], shapes[m][1], scale(rng)));
    }
    models.push_back(std::move(p));
  }
  return models;
}

AssessmentNetworks random_networks(std::mt19937_64& rng) {
  auto nets = AssessmentNetworks::initialized(rng());
  std::normal_distribution<double> jitter(0.0, 0.3);
  for (ScalarNetwork* net : {&nets.local, &nets.global}) {
    for (Tensor* t : net->parameters())
      for (auto& v : t->raw()) v += jitter(rng);
  }
  return nets;
}

}  // namespace

TEST_CASE("local uncertainty examples") {
  auto z = local_uncertainty({single(Tensor::row({1, 2})), single(Tensor::row({1, 2}))}, "w", identity);
  CHECK(z[0] == Tensor::row({0, 0}));
  CHECK(z[1] == Tensor::row({0, 0}));

  auto v = local_uncertainty({single(Tensor::row({1, 2})), single(Tensor::row({3, 1}))}, "w", identity);
  CHECK(v[0] == Tensor::row({2, 1}));
  CHECK(v[1] == Tensor::row({2, 1}));

  CHECK_THROWS_AS(local_uncertainty({single(Tensor::row({1})), single(Tensor::row({1, 2}))}, "w", identity),
                  ShapeError);
  const ScalarFn bad = [](double) { return NAN; };
  CHECK_THROWS_AS(local_uncertainty({single(Tensor::row({1})), single(Tensor::row({2}))}, "w", bad),
                  NumericError);
}

TEST_CASE("three-model local uncertainty is the sum of pairwise results") {
  std::mt19937_64 rng(4);
  const ScalarFn f = [](double x) { return std::sin(x) + x * x; };
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_models(rng, 3);
    const std::string name = m[0][0].name;
    auto tri = local_uncertainty(m, name, f);
    for (std::size_t k = 0; k < 3; ++k) {
      Tensor expect(tri[k].shape(), 0.0);
      for (std::size_t l = 0; l < 3; ++l) {
        if (l == k) continue;
        auto pair = local_uncertainty({m[k], m[l]}, name, f);
        for (std::size_t i = 0; i < expect.size(); ++i) expect[i] += pair[0][i];
      }
      CHECK(max_abs_diff(tri[k], expect) <= 1e-12);
    }
  }
}

TEST_CASE("histogram examples") {
  CHECK(histogram(Tensor::row({0, 0, 1, 1}), {2}) == std::vector<std::size_t>{2, 2});
  CHECK(histogram(Tensor::row({0.0, 0.1, 0.2, 0.9}), {2}) == std::vector<std::size_t>{3, 1});
  CHECK(histogram(Tensor::row({0.0, 0.1, 0.2, 0.9}), {2}) ==
        oracle::histogram(Tensor::row({0.0, 0.1, 0.2, 0.9}), 2));
  CHECK(histogram(Tensor::row({5, 5, 5}), {4}) == std::vector<std::size_t>{3, 0, 0, 0});
  // the maximum lands in the closed last bin, a shared edge in the upper bin
  CHECK(histogram(Tensor::row({0, 0.5, 1}), {2}) == std::vector<std::size_t>{1, 2});
  CHECK_THROWS_AS(histogram(Tensor::row({1}), {0}), ValidationError);
}

TEST_CASE("histogram matches the scanning oracle and sums to the size") {
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<int> ints(-3, 3);
  for (int trial = 0; trial < 300; ++trial) {
    Tensor w = oracle::random_matrix(rng, 1 + trial % 7, 1 + trial % 5);
    if (trial % 3 == 0)
      for (auto& v : w.raw()) v = ints(rng) * 0.25;  // values on bin edges
    for (std::size_t u : {1, 2, 3, 16, 64}) {
      auto c = histogram(w, {u});
      CHECK(c == oracle::histogram(w, u));
      std::size_t total = 0;
      for (auto x : c) total += x;
      CHECK(total == w.size());
    }
  }
}

TEST_CASE("entropy examples") {
  CHECK(entropy(Tensor::row({3, 3, 3}), {8}) == 0.0);
  CHECK(entropy(Tensor::row({0, 1, 2, 3}), {4}) == doctest::Approx(std::log(4.0)).epsilon(1e-15));
  const double e = entropy(Tensor::row({0.0, 0.1, 0.2, 0.9}), {2});
  CHECK(e == doctest::Approx(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25))).epsilon(1e-15));
  CHECK(e == doctest::Approx(0.5623).epsilon(1e-4));
}

TEST_CASE("entropy is permutation invariant and bounded") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    Tensor w = oracle::random_matrix(rng, 4, 6);
    Tensor shuffled = w;
    std::shuffle(shuffled.raw().begin(), shuffled.raw().end(), rng);
    for (std::size_t u : {1, 2, 16, 64}) {
      const double e = entropy(w, {u});
      CHECK(e == entropy(shuffled, {u}));
      CHECK(e >= 0.0);
      CHECK(e <= std::log(static_cast<double>(u)) + 1e-15);
    }
  }
}

TEST_CASE("global information") {
  std::mt19937_64 rng(12);
  Tensor w = oracle::random_matrix(rng, 3, 3);
  auto same = global_information({single(w), single(w)}, "w", [](double x) { return 2 * x + 0.7; }, {16});
  CHECK(same[0] == 0.7);
  CHECK(same[1] == 0.7);

  // E(A) = ln 4 (uniform over 4 bins), E(B) = 0 (degenerate)
  auto g = global_information({single(Tensor::row({0, 1, 2, 3})), single(Tensor::row({1, 1, 1, 1}))},
                              "w", identity, {4});
  CHECK(g[0] == std::log(4.0));
  CHECK(g[1] == std::log(4.0));

  const ScalarFn f = [](double x) { return std::exp(-x) + x; };
  for (int trial = 0; trial < 20; ++trial) {
    auto m = random_models(rng, 3);
    const std::string name = m[0][0].name;
    auto tri = global_information(m, name, f, {16});
    for (std::size_t k = 0; k < 3; ++k) {
      double expect = 0.0;
      for (std::size_t l = 0; l < 3; ++l)
        if (l != k) expect += global_information({m[k], m[l]}, name, f, {16})[0];
      CHECK(std::abs(tri[k] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("blend examples") {
  CHECK(blend(2.0, Tensor::row({0, 0})) == Tensor::row({0, 0}));
  CHECK(blend(0.0, Tensor::row({1, 5})) == Tensor::row({0, 0}));
  CHECK(blend(1.0, Tensor::row({1}))[0] == doctest::Approx(1 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(blend(1.0, Tensor::row({1}))[0] == doctest::Approx(0.6321).epsilon(1e-4));
}

TEST_CASE("normalize examples") {
  auto half = normalize({Tensor::row({3}), Tensor::row({3})});
  CHECK(half[0][0] == 0.5);
  CHECK(half[1][0] == 0.5);
  auto two = normalize({Tensor::row({1.0}), Tensor::row({0.0})});
  CHECK(two[0][0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(two[1][0] == doctest::Approx(0.2689).epsilon(1e-4));
  auto three = normalize({Tensor::row({0}), Tensor::row({0}), Tensor::row({0})});
  for (const auto& t : three) CHECK(t[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  // large raws stay finite through max subtraction
  auto big = normalize({Tensor::row({800.0}), Tensor::row({799.0})});
  CHECK(big[0][0] == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK_THROWS_AS(normalize({Tensor::row({1})}), ValidationError);
  CHECK_THROWS_AS(normalize({Tensor::row({1}), Tensor::row({1, 2})}), ShapeError);
}

TEST_CASE("near-identity initialization") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScalarNetwork f = ScalarNetwork::near_identity(seed);
    CHECK(f.hidden() == 16);
    CHECK(f.parameter_count() == 49);
    CHECK(std::abs(f(0.0)) < 1e-12);
    const double h = 1e-5;
    CHECK((f(h) - f(-h)) / (2 * h) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(f(0.01) == doctest::Approx(0.01).epsilon(1e-2));
  }
  CHECK(ScalarNetwork::near_identity(1).w1() == ScalarNetwork::near_identity(1).w1());
  CHECK_FALSE(ScalarNetwork::near_identity(1).w1() == ScalarNetwork::near_identity(2).w1());
}

TEST_CASE("graph network matches the value network bitwise") {
  std::mt19937_64 rng(13);
  auto nets = random_networks(rng);
  Graph g;
  auto vars = bind(g, nets.local, false);
  Tensor x = oracle::random_matrix(rng, 3, 4);
  for (auto& v : x.raw()) v = std::abs(v);
  Tensor y = g.value(apply(vars, g.constant(x)));
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == nets.local(x[i]));
}

TEST_CASE("assessment networks round-trip through a parameter set") {
  auto nets = AssessmentNetworks::initialized(5);
  ParameterSet p = nets.to_parameters();
  CHECK(p.size() == 8);
  CHECK(p[0].name == "local.w1");
  CHECK(p[7].name == "global.b2");
  auto back = AssessmentNetworks::from_parameters(decode(encode(p)));
  CHECK(back.to_parameters() == p);
  ParameterSet broken("x");
  broken.add("local.w1", Tensor::matrix(1, 1));
  CHECK_THROWS(AssessmentNetworks::from_parameters(broken));
}

TEST_CASE("identical models assess to one half") {
  std::mt19937_64 rng(14);
  auto m = random_models(rng, 1);
  auto map = assess({m[0], m[0]}, random_networks(rng), {64});
  for (std::size_t j = 0; j < map.matrix_count(); ++j)
    for (std::size_t i = 0; i < map.weight(0, j).size(); ++i) {
      CHECK(map.weight(0, j)[i] == 0.5);
      CHECK(map.weight(1, j)[i] == 0.5);
    }
}

TEST_CASE("assess satisfies the normalization contract") {
  std::mt19937_64 rng(15);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 7);
    auto m = random_models(rng, n);
    for (auto variant : {AssessmentVariant::both, AssessmentVariant::local_only,
                         AssessmentVariant::global_only, AssessmentVariant::neither}) {
      auto map = assess(m, random_networks(rng), {16}, variant);
      CHECK_NOTHROW(map.check(1e-9));
      CHECK(map.model_count() == n);
    }
  }
}

TEST_CASE("two-model path equals the dual-model formulas") {
  std::mt19937_64 rng(16);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = random_models(rng, 2);
    auto nets = random_networks(rng);
    auto map = assess(m, nets, {64});
    for (std::size_t j = 0; j < map.matrix_count(); ++j) {
      auto pair = assess_pair(m[0].value(j), m[1].value(j), nets.local, nets.global, {64});
      CHECK(max_abs_diff(map.local[0][j], pair.local_a) <= 1e-12);
      CHECK(std::abs(map.global[1][j] - pair.global_b) <= 1e-12);
      CHECK(max_abs_diff(map.weight(0, j), pair.weight_a) <= 1e-12);
      CHECK(max_abs_diff(map.weight(1, j), pair.weight_b) <= 1e-12);
    }
  }
}

TEST_CASE("swapping model labels swaps the compatibility") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
    auto m = random_models(rng, n);
    auto nets = random_networks(rng);
    auto swapped = m;
    std::swap(swapped[0], swapped[1]);
    auto a = assess(m, nets, {16});
    auto b = assess(swapped, nets, {16});
    for (std::size_t j = 0; j < a.matrix_count(); ++j) {
      CHECK(a.weight(0, j) == b.weight(1, j));
      CHECK(a.weight(1, j) == b.weight(0, j));
    }
  }
}

TEST_CASE("ablation variants") {
  std::mt19937_64 rng(18);
  auto m = random_models(rng, 3);
  auto nets = random_networks(rng);
  auto both = assess(m, nets, {16}, AssessmentVariant::both);
  auto neither = assess(m, nets, {16}, AssessmentVariant::neither);
  auto local = assess(m, nets, {16}, AssessmentVariant::local_only);
  auto global = assess(m, nets, {16}, AssessmentVariant::global_only);
  for (std::size_t j = 0; j < both.matrix_count(); ++j) {
    std::vector<Tensor> blended, locals, globals;
    for (std::size_t k = 0; k < 3; ++k) {
      blended.push_back(blend(both.global[k][j], both.local[k][j]));
      locals.push_back(both.local[k][j]);
      globals.push_back(Tensor(both.local[k][j].shape(), both.global[k][j]));
    }
    auto nb = normalize(blended), nl = normalize(locals), ng = normalize(globals);
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(both.weight(k, j) == nb[k]);
      CHECK(local.weight(k, j) == nl[k]);
      CHECK(global.weight(k, j) == ng[k]);
      for (double v : neither.weight(k, j).raw()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    }
  }
  CHECK(parse_assessment_variant("local") == AssessmentVariant::local_only);
  CHECK(std::string(to_string(AssessmentVariant::global_only)) == "global");
  CHECK_THROWS_AS(parse_assessment_variant("sideways"), ValidationError);
}

TEST_CASE("graph assessment matches the value assessment") {
  std::mt19937_64 rng(19);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 4);
    auto m = random_models(rng, n);
    auto nets = random_networks(rng);
    for (auto variant : {AssessmentVariant::both, AssessmentVariant::local_only,
                         AssessmentVariant::global_only, AssessmentVariant::neither}) {
      auto map = assess(m, nets, {16}, variant);
      Graph g;
      auto vars = bind(g, nets, true);
      auto v = assess(g, m, vars, {16}, variant);
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < map.matrix_count(); ++j)
          CHECK(max_abs_diff(v[k][j].value(), map.weight(k, j)) <= 1e-12);
    }
  }
}

TEST_CASE("compatibility map check") {
  CompatibilityMap map;
  map.names = {"w"};
  map.weights = {{Tensor::row({0.6})}, {Tensor::row({0.6})}};
  CHECK_THROWS_AS(map.check(), ValidationError);
  map.weights = {{Tensor::row({1.2})}, {Tensor::row({-0.2})}};
  CHECK_THROWS_AS(map.check(), ValidationError);
  map.weights = {{Tensor::row({0.25})}, {Tensor::row({0.75})}};
  CHECK_NOTHROW(map.check());
}
