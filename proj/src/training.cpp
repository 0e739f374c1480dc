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

#include "cki/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cki/error.hpp"

namespace cki {

namespace {

double mean_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    double m = logits.at(i, 0);
    for (std::size_t j = 1; j < logits.cols(); ++j) m = std::max(m, logits.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < logits.cols(); ++j) denom += std::exp(logits.at(i, j) - m);
    loss -= logits.at(i, static_cast<std::size_t>(labels[i])) - m - std::log(denom);
  }
  return loss / static_cast<double>(logits.rows());
}

// Candidate lists for ranking examples: the positive first, then negatives
// drawn uniformly from all other items.
std::vector<std::size_t> sample_candidates(std::size_t positive, std::size_t n_items,
                                           std::size_t negatives, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, n_items - 1);
  std::vector<std::size_t> out;
  out.reserve(negatives + 1);
  out.push_back(positive);
  while (out.size() < negatives + 1) {
    const std::size_t item = pick(rng);
    if (item != positive) out.push_back(item);
  }
  return out;
}

void check_finite_loss(double loss, const char* stage, std::size_t epoch) {
  if (!std::isfinite(loss)) {
    throw DivergenceError(std::string(stage) + ": non-finite loss at epoch " +
                          std::to_string(epoch));
  }
}

// Runs one epoch; a non-finite value anywhere in the graph is reported as
// divergence of `stage`.
template <typename Fn>
void guarded_epoch(const char* stage, std::size_t epoch, Fn&& fn) {
  try {
    fn();
  } catch (const DivergenceError&) {
    throw;
  } catch (const NumericError& e) {
    throw DivergenceError(std::string(stage) + ": diverged at epoch " + std::to_string(epoch) +
                          " (" + e.what() + ")");
  }
}

std::vector<std::size_t> shuffled(std::size_t n, Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

Objective::Objective(const Dataset& data, std::size_t negatives)
    : data_(&data), negatives_(negatives) {
  if (negatives_ == 0) throw ValidationError("ranking objective needs at least one negative");
}

std::size_t Objective::train_size() const {
  if (const auto* cls = std::get_if<ClassificationData>(data_)) return cls->train.size();
  return std::get<InteractionData>(*data_).train.size();
}

Var Objective::batch_loss(Graph& graph, const ParameterSet& like, const std::vector<Var>& params,
                          std::span<const std::size_t> batch, Rng& rng) const {
  if (batch.empty()) throw ValidationError("empty minibatch");
  if (params.size() != like.size()) throw ShapeError("parameter count mismatch");
  if (const auto* cls = std::get_if<ClassificationData>(data_)) {
    const std::size_t d = cls->n_features;
    Tensor x = Tensor::matrix(batch.size(), d);
    std::vector<int> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) x.at(i, j) = cls->train.features.at(batch[i], j);
      y[i] = cls->train.labels[batch[i]];
    }
    Var logits = forward_mlp(graph, params, graph.constant(std::move(x)));
    return graph.softmax_cross_entropy(logits, y);
  }
  const auto& inter = std::get<InteractionData>(*data_);
  std::vector<std::size_t> users(batch.size());
  std::vector<std::size_t> items;
  items.reserve(batch.size() * (negatives_ + 1));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto [u, pos] = inter.train[batch[i]];
    users[i] = u;
    const auto cands = sample_candidates(pos, inter.n_items, negatives_, rng);
    items.insert(items.end(), cands.begin(), cands.end());
  }
  std::size_t user_idx = 0, item_idx = 1;
  for (std::size_t m = 0; m < like.size(); ++m) {
    if (like[m].name == "user_embedding") user_idx = m;
    if (like[m].name == "item_embedding") item_idx = m;
  }
  Var u = graph.gather_rows(params[user_idx], users);
  Var v = graph.gather_rows(params[item_idx], items);
  Var scores = graph.group_dot(u, v, negatives_ + 1);
  const std::vector<int> labels(batch.size(), 0);
  return graph.softmax_cross_entropy(scores, labels);
}

double Objective::split_loss(const ParameterSet& model, Split split) const {
  if (const auto* cls = std::get_if<ClassificationData>(data_)) {
    const ClassificationSplit& s = split == Split::train        ? cls->train
                                   : split == Split::validation ? cls->validation
                                                                : cls->test;
    return mean_cross_entropy(predict(model, s.features), s.labels);
  }
  const auto& inter = std::get<InteractionData>(*data_);
  std::vector<RankingCase> train_cases;
  std::span<const RankingCase> cases;
  if (split == Split::train) {
    Rng rng(derive_seed(0, "train-loss-negatives"));
    train_cases.reserve(inter.train.size());
    for (const auto& [u, pos] : inter.train) {
      train_cases.push_back({u, sample_candidates(pos, inter.n_items, negatives_, rng)});
    }
    cases = train_cases;
  } else {
    cases = split == Split::validation ? inter.validation : inter.test;
  }
  const Tensor scores = predict(model, cases);
  const std::vector<int> labels(cases.size(), 0);
  return mean_cross_entropy(scores, labels);
}

void Adam::step(std::span<Tensor* const> params, std::span<const Tensor> grads) {
  if (params.size() != grads.size()) throw ShapeError("Adam: parameter/gradient count mismatch");
  if (m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape(), 0.0);
      v_.emplace_back(p->shape(), 0.0);
    }
  }
  ++t_;
  const double b1 = settings_.beta1, b2 = settings_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& w = *params[p];
    const Tensor& g = grads[p];
    if (g.shape() != w.shape()) throw ShapeError("Adam: gradient shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) {
      m_[p][i] = b1 * m_[p][i] + (1.0 - b1) * g[i];
      v_[p][i] = b2 * v_[p][i] + (1.0 - b2) * g[i] * g[i];
      const double mh = m_[p][i] / c1;
      const double vh = v_[p][i] / c2;
      w[i] -= settings_.learning_rate * mh / (std::sqrt(vh) + settings_.epsilon);
    }
  }
}

namespace {

ParameterSet run_training(ParameterSet model, const Dataset& data,
                          const OptimizerSettings& optimizer, std::uint64_t seed,
                          std::size_t negatives, const char* stage, TrainingHistory* history) {
  if (optimizer.batch_size == 0) throw ValidationError("batch size must be positive");
  const Objective objective(data, negatives);
  TrainingHistory local;
  local.initial_loss = objective.split_loss(model, Split::train);
  check_finite_loss(local.initial_loss, stage, 0);

  Adam adam(optimizer);
  Rng rng(derive_seed(seed, "shuffle"));
  const std::size_t n = objective.train_size();
  std::vector<Tensor*> slots;
  for (std::size_t m = 0; m < model.size(); ++m) slots.push_back(&model.value(m));

  for (std::size_t epoch = 1; epoch <= optimizer.epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    double total = 0.0;
    std::size_t batches = 0;
    guarded_epoch(stage, epoch, [&] {
      for (std::size_t start = 0; start < n; start += optimizer.batch_size) {
        const std::size_t stop = std::min(n, start + optimizer.batch_size);
        const std::span<const std::size_t> batch(order.data() + start, stop - start);
        Graph graph;
        std::vector<Var> params;
        for (const Tensor* t : slots) params.push_back(graph.leaf(*t));
        Var loss = objective.batch_loss(graph, model, params, batch, rng);
        check_finite_loss(loss.value()[0], stage, epoch);
        graph.backward(loss);
        std::vector<Tensor> grads;
        for (const Var& p : params) grads.push_back(graph.grad(p));
        adam.step(slots, grads);
        total += loss.value()[0];
        ++batches;
      }
    });
    local.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  local.final_loss = objective.split_loss(model, Split::train);
  check_finite_loss(local.final_loss, stage, optimizer.epochs);
  if (history) *history = std::move(local);
  return model;
}

}  // namespace

ParameterSet train_base(const ModelConfig& config, const Dataset& data, TrainingHistory* history) {
  config.validate();
  return run_training(init_model(config, data), data, config.optimizer, config.seed,
                      config.negatives, "train-base", history);
}

ParameterSet finetune(const ParameterSet& model, const Dataset& data,
                      const OptimizerSettings& optimizer, std::uint64_t seed,
                      std::size_t negatives, TrainingHistory* history) {
  return run_training(model, data, optimizer, seed, negatives, "finetune", history);
}

double spliced_loss(const std::vector<ParameterSet>& models, const AssessmentNetworks& networks,
                    const Objective& objective, const AssessmentTrainingConfig& config,
                    Split split) {
  const CompatibilityMap compat = assess(models, networks, config.histogram, config.variant);
  return objective.split_loss(splice(models, compat, config.mode), split);
}

AssessmentResult train_assessment(const std::vector<ParameterSet>& models, const Dataset& data,
                                  const AssessmentTrainingConfig& config) {
  validate_compatible(models);
  if (config.optimizer.batch_size == 0) throw ValidationError("batch size must be positive");
  const Objective objective(data, config.negatives);

  AssessmentResult result;
  result.initial = AssessmentNetworks::initialized(config.seed);
  AssessmentNetworks current = result.initial;
  result.networks = current;
  result.initial_validation_loss = spliced_loss(models, current, objective, config, Split::validation);
  check_finite_loss(result.initial_validation_loss, "train-assessment", 0);
  result.best_validation_loss = result.initial_validation_loss;

  Adam adam(config.optimizer);
  Rng rng(derive_seed(config.seed, "assessment-shuffle"));
  const std::size_t n = objective.train_size();
  std::vector<Tensor*> slots;
  for (Tensor* t : current.local.parameters()) slots.push_back(t);
  for (Tensor* t : current.global.parameters()) slots.push_back(t);
  const ParameterSet& like = models.front();

  bool first = true;
  for (std::size_t epoch = 1; epoch <= config.optimizer.epochs; ++epoch) {
    const auto order = shuffled(n, rng);
    double total = 0.0;
    std::size_t batches = 0;
    guarded_epoch("train-assessment", epoch, [&] {
      for (std::size_t start = 0; start < n; start += config.optimizer.batch_size) {
        const std::size_t stop = std::min(n, start + config.optimizer.batch_size);
        const std::span<const std::size_t> batch(order.data() + start, stop - start);
        Graph graph;
        const AssessmentVars vars = bind(graph, current, true);
        const auto compat = assess(graph, models, vars, config.histogram, config.variant);
        const auto spliced = splice_for_training(graph, models, compat, config.mode);
        Var loss = objective.batch_loss(graph, like, spliced, batch, rng);
        check_finite_loss(loss.value()[0], "train-assessment", epoch);
        if (first) {
          result.first_step_loss = loss.value()[0];
          first = false;
        }
        graph.backward(loss);
        std::vector<Tensor> grads;
        for (const Var& p : vars.local.parameters()) grads.push_back(graph.grad(p));
        for (const Var& p : vars.global.parameters()) grads.push_back(graph.grad(p));
        adam.step(slots, grads);
        total += loss.value()[0];
        ++batches;
      }
    });
    result.epoch_loss.push_back(total / static_cast<double>(batches));
    const double val = spliced_loss(models, current, objective, config, Split::validation);
    check_finite_loss(val, "train-assessment", epoch);
    result.validation_loss.push_back(val);
    if (val < result.best_validation_loss) {
      result.best_validation_loss = val;
      result.best_epoch = epoch;
      result.networks = current;
    }
  }
  return result;
}

}  // namespace cki
