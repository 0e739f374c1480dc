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
#include <random>
#include <set>

#include "cki/error.hpp"
#include "cki/metrics.hpp"
#include "cki/models.hpp"
#include "cki/training.hpp"
#include "oracles.hpp"

using namespace cki;

namespace {

ClassificationSpec small_spec() {
  ClassificationSpec s;
  s.n_train = 600;
  s.n_validation = 200;
  s.n_test = 200;
  s.n_features = 6;
  s.n_classes = 3;
  s.clusters_per_class = 2;
  s.separation = 1.5;
  return s;
}

InteractionSpec small_interactions() {
  InteractionSpec s;
  s.n_users = 60;
  s.n_items = 150;
  s.latent_dim = 4;
  s.interactions_per_user = 10;
  s.negatives = 50;
  return s;
}

ModelConfig small_mlp(std::uint64_t seed, std::size_t epochs = 5) {
  ModelConfig c;
  c.hidden = {16, 8};
  c.seed = seed;
  c.optimizer.epochs = epochs;
  c.optimizer.batch_size = 64;
  c.optimizer.learning_rate = 1e-2;
  return c;
}

double accuracy(const ParameterSet& model, const ClassificationSplit& split) {
  return classification_metrics(predict(model, split.features), split.labels).accuracy;
}

}  // namespace

TEST_CASE("classification data is reproducible and well formed") {
  const auto spec = small_spec();
  auto a = gen_classification(1, spec), b = gen_classification(1, spec), c = gen_classification(2, spec);
  CHECK(a.train.features == b.train.features);
  CHECK(a.test.labels == b.test.labels);
  CHECK_FALSE(a.train.features == c.train.features);
  CHECK(a.train.size() == 600);
  CHECK(a.validation.size() == 200);
  CHECK(a.test.features.rows() == 200);
  CHECK(a.train.features.cols() == 6);
  for (int y : a.train.labels) CHECK((y >= 0 && y < 3));
  auto bad = spec;
  bad.n_classes = 1;
  CHECK_THROWS_AS(gen_classification(1, bad), ValidationError);
  bad = spec;
  bad.n_train = 0;
  CHECK_THROWS_AS(gen_classification(1, bad), ValidationError);
}

TEST_CASE("a linear probe separates well-separated classes") {
  ClassificationSpec spec;
  spec.n_train = 1000;
  spec.n_validation = 200;
  spec.n_test = 500;
  spec.n_features = 5;
  spec.n_classes = 2;
  spec.clusters_per_class = 1;
  spec.separation = 5.0;
  auto data = gen_classification(3, spec);
  ModelConfig c;
  c.hidden = {};
  c.seed = 1;
  c.optimizer.epochs = 20;
  c.optimizer.batch_size = 50;
  c.optimizer.learning_rate = 5e-2;
  auto probe = train_base(c, data);
  CHECK(probe.size() == 2);
  CHECK(accuracy(probe, data.test) > 0.95);
}

TEST_CASE("interaction data is reproducible and leave-one-out") {
  const auto spec = small_interactions();
  auto a = gen_interactions(4, spec), b = gen_interactions(4, spec), c = gen_interactions(5, spec);
  CHECK(a.train == b.train);
  CHECK(a.planted_affinity == b.planted_affinity);
  CHECK_FALSE(a.train == c.train);
  CHECK(a.train.size() == spec.n_users * (spec.interactions_per_user - 2));
  REQUIRE(a.test.size() == spec.n_users);
  std::vector<std::set<std::size_t>> seen(spec.n_users);
  for (auto [u, i] : a.train) seen[u].insert(i);
  for (std::size_t u = 0; u < spec.n_users; ++u) {
    const auto& t = a.test[u];
    const auto& v = a.validation[u];
    CHECK(t.user == u);
    CHECK(t.candidates.size() == spec.negatives + 1);
    CHECK(seen[u].count(t.candidates[0]) == 0);
    CHECK(t.candidates[0] != v.candidates[0]);
    std::set<std::size_t> distinct(t.candidates.begin(), t.candidates.end());
    CHECK(distinct.size() == t.candidates.size());
    for (std::size_t j = 1; j < t.candidates.size(); ++j) {
      CHECK(seen[u].count(t.candidates[j]) == 0);
      CHECK(t.candidates[j] != v.candidates[0]);
    }
  }
  auto bad = spec;
  bad.interactions_per_user = 2;
  CHECK_THROWS_AS(gen_interactions(1, bad), ValidationError);
}

TEST_CASE("planted scorer ranks well, a random scorer ranks at chance") {
  auto spec = small_interactions();
  spec.temperature = 0.05;
  auto data = gen_interactions(6, spec);
  Tensor planted = Tensor::matrix(data.test.size(), spec.negatives + 1);
  Tensor random = planted;
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t r = 0; r < data.test.size(); ++r)
    for (std::size_t j = 0; j < spec.negatives + 1; ++j) {
      planted.at(r, j) = data.planted_affinity.at(data.test[r].user, data.test[r].candidates[j]);
      random.at(r, j) = u(rng);
    }
  CHECK(ranking_metrics_from_ranks(target_ranks(planted), 5).ndcg > 0.9);

  // the expected hit rate of a random ranking is k / candidates
  double hits = 0.0;
  const int reps = 50;
  for (int rep = 0; rep < reps; ++rep) {
    for (auto& v : random.raw()) v = u(rng);
    hits += ranking_metrics_from_ranks(target_ranks(random), 5).hit_rate;
  }
  CHECK(hits / reps == doctest::Approx(5.0 / 51.0).epsilon(0.15));
}

TEST_CASE("architecture tags") {
  auto a = Architecture::parse("mlp:20-64-32-4");
  CHECK(a.kind == ArchitectureKind::mlp_classifier);
  CHECK(a.dims == std::vector<std::size_t>{20, 64, 32, 4});
  CHECK(a.tag() == "mlp:20-64-32-4");
  CHECK(Architecture::parse("mf:300-400-32").dims.size() == 3);
  CHECK_THROWS_AS(Architecture::parse("cnn:1-2"), ValidationError);
  CHECK_THROWS_AS(Architecture::parse("mlp:"), ValidationError);
}

TEST_CASE("predict examples") {
  ParameterSet zero("mlp:3-2");
  zero.add("layer0.weight", Tensor::matrix(3, 2));
  zero.add("layer0.bias", Tensor::matrix(1, 2));
  Tensor x = Tensor::from_rows({{1, 2, 3}, {-1, 0, 4}});
  Tensor logits = predict(zero, x);
  for (std::size_t r = 0; r < 2; ++r) CHECK(logits.at(r, 0) == logits.at(r, 1));

  ParameterSet eye("mlp:3-3-3");
  Tensor i3 = Tensor::from_rows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}});
  eye.add("layer0.weight", i3);
  eye.add("layer0.bias", Tensor::matrix(1, 3));
  eye.add("layer1.weight", i3);
  eye.add("layer1.bias", Tensor::matrix(1, 3));
  Tensor pos = Tensor::from_rows({{0.5, 2, 3}, {1, 0, 4}});
  CHECK(predict(eye, pos) == pos);

  CHECK_THROWS_AS(predict(eye, Tensor::from_rows({{1, 2}})), ShapeError);
}

TEST_CASE("predict matches a straight-line forward") {
  auto data = gen_classification(7, small_spec());
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto model = train_base(small_mlp(seed, 1), data);
    CHECK(max_abs_diff(predict(model, data.test.features), oracle::mlp_forward(model, data.test.features)) <= 1e-12);
  }
}

TEST_CASE("graph forward equals predict") {
  auto data = gen_classification(7, small_spec());
  auto model = init_model(small_mlp(3), data);
  Graph g;
  std::vector<Var> params;
  for (const auto& e : model) params.push_back(g.constant(e.value));
  Var out = forward_mlp(g, params, g.constant(data.test.features));
  CHECK(max_abs_diff(out.value(), predict(model, data.test.features)) <= 1e-12);
}

TEST_CASE("MF scores are dot products") {
  auto data = gen_interactions(8, small_interactions());
  ModelConfig c;
  c.kind = ArchitectureKind::matrix_factorization;
  c.factor_dim = 5;
  c.seed = 2;
  auto model = init_model(c, Dataset(data));
  Tensor scores = predict(model, data.test);
  const Tensor& users = model.get("user_embedding");
  const Tensor& items = model.get("item_embedding");
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t j = 0; j < 4; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < 5; ++d) s += users.at(data.test[r].user, d) * items.at(data.test[r].candidates[j], d);
      CHECK(scores.at(r, j) == doctest::Approx(s).epsilon(1e-12));
    }
}

TEST_CASE("train_base contract") {
  auto data = gen_classification(9, small_spec());
  TrainingHistory h;
  auto a = train_base(small_mlp(1), data, &h);
  auto a2 = train_base(small_mlp(1), data);
  auto b = train_base(small_mlp(2), data);
  CHECK(a == a2);
  CHECK(validate_compatible({a, b}).size() == 6);
  CHECK_FALSE(a == b);
  REQUIRE(h.epoch_loss.size() == 5);
  for (double l : h.epoch_loss) CHECK(std::isfinite(l));
  CHECK(h.final_loss < h.initial_loss);
  CHECK(h.epoch_loss.back() < h.epoch_loss.front());

  // beats the majority class
  std::vector<std::size_t> count(3, 0);
  for (int y : data.test.labels) ++count[static_cast<std::size_t>(y)];
  const double majority = static_cast<double>(*std::max_element(count.begin(), count.end())) / 200.0;
  CHECK(accuracy(a, data.test) > majority + 0.1);

  CHECK(train_base(small_mlp(1, 0), data) == init_model(small_mlp(1, 0), data));

  auto shared = small_mlp(1);
  shared.init_seed = 77;
  auto other = small_mlp(2);
  other.init_seed = 77;
  CHECK(init_model(shared, data) == init_model(other, data));
}

TEST_CASE("MF training lowers the loss") {
  Dataset data = gen_interactions(10, small_interactions());
  ModelConfig c;
  c.kind = ArchitectureKind::matrix_factorization;
  c.factor_dim = 8;
  c.negatives = 20;
  c.seed = 3;
  c.optimizer.epochs = 3;
  c.optimizer.learning_rate = 1e-2;
  TrainingHistory h;
  auto model = train_base(c, data, &h);
  CHECK(h.final_loss < h.initial_loss);
  CHECK(model == train_base(c, data));
}

TEST_CASE("divergence is an error") {
  auto data = gen_classification(11, small_spec());
  auto c = small_mlp(1, 3);
  c.optimizer.learning_rate = 1e300;
  CHECK_THROWS_AS(train_base(c, data), DivergenceError);
  c.optimizer.learning_rate = 0.0;
  CHECK_THROWS_AS(train_base(c, data), ValidationError);
}

TEST_CASE("finetune contract") {
  auto data = gen_classification(12, small_spec());
  auto model = train_base(small_mlp(1, 1), data);
  OptimizerSettings opt;
  opt.epochs = 0;
  CHECK(finetune(model, data, opt, 5) == model);
  opt.epochs = 1;
  opt.batch_size = 64;
  TrainingHistory h;
  auto tuned = finetune(model, data, opt, 5, 100, &h);
  CHECK(h.epoch_loss.size() == 1);
  CHECK(h.final_loss <= h.initial_loss);
  CHECK(validate_compatible({model, tuned}).size() == model.size());
  CHECK(tuned.architecture() == model.architecture());
}

TEST_CASE("assessment training contract") {
  auto spec = small_spec();
  Dataset data = gen_classification(13, spec);
  std::vector<ParameterSet> models;
  for (std::uint64_t s = 1; s <= 3; ++s) {
    auto c = small_mlp(s, 3);
    c.init_seed = 99;
    models.push_back(train_base(c, data));
  }
  const auto frozen = models;

  AssessmentTrainingConfig cfg;
  cfg.seed = 21;
  cfg.optimizer.epochs = 3;
  cfg.optimizer.batch_size = spec.n_train;  // one full batch per epoch
  cfg.optimizer.learning_rate = 1e-2;
  cfg.histogram = {16};
  auto result = train_assessment(models, data, cfg);
  CHECK(models == frozen);

  const Objective objective(data);
  const double initial_train = spliced_loss(models, result.initial, objective, cfg, Split::train);
  CHECK(result.first_step_loss == doctest::Approx(initial_train).epsilon(1e-12));
  CHECK(result.initial_validation_loss == spliced_loss(models, result.initial, objective, cfg, Split::validation));
  CHECK(result.best_validation_loss <= result.initial_validation_loss);
  CHECK(spliced_loss(models, result.networks, objective, cfg, Split::validation) == result.best_validation_loss);
  CHECK(result.epoch_loss.size() == 3);
  CHECK(result.validation_loss.size() == 3);

  cfg.mode = SpliceMode::hard;
  auto hard = train_assessment(models, data, cfg);
  CHECK(models == frozen);
  CHECK(hard.best_validation_loss <= hard.initial_validation_loss);

  CHECK_THROWS_AS(train_assessment({models[0]}, data, cfg), ValidationError);
}

TEST_CASE("adam takes a bias-corrected first step") {
  OptimizerSettings s;
  s.learning_rate = 0.1;
  Adam adam(s);
  Tensor p = Tensor::row({1.0, -2.0});
  std::vector<Tensor*> slots = {&p};
  std::vector<Tensor> g = {Tensor::row({0.5, -3.0})};
  adam.step(slots, g);
  // first step moves each coordinate by lr * sign(g), up to epsilon
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p[1] == doctest::Approx(-1.9).epsilon(1e-6));
}
