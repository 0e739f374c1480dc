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
#include <span>
#include <vector>

#include "cki/autodiff.hpp"
#include "cki/checkpoint.hpp"
#include "cki/compatibility.hpp"
#include "cki/data.hpp"
#include "cki/models.hpp"
#include "cki/random.hpp"
#include "cki/splicing.hpp"

namespace cki {

enum class Split { train, validation, test };

// Task loss: multinomial logistic loss for classification, sampled softmax
// (held-out or observed positive against sampled negatives) for ranking.
class Objective {
 public:
  Objective(const Dataset& data, std::size_t negatives = 100);

  std::size_t train_size() const;

  // Mean loss over the listed training examples. `params` follow the
  // declared order of `like`.
  Var batch_loss(Graph& graph, const ParameterSet& like, const std::vector<Var>& params,
                 std::span<const std::size_t> batch, Rng& rng) const;

  // Mean loss over a whole split, evaluated without a graph. Ranking train
  // loss samples its negatives from a fixed stream so it is repeatable.
  double split_loss(const ParameterSet& model, Split split) const;

 private:
  const Dataset* data_;
  std::size_t negatives_;
};

class Adam {
 public:
  explicit Adam(OptimizerSettings settings) : settings_(settings) {}

  void step(std::span<Tensor* const> params, std::span<const Tensor> grads);

 private:
  OptimizerSettings settings_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

struct TrainingHistory {
  double initial_loss = 0.0;       // training-split loss before any update
  std::vector<double> epoch_loss;  // mean minibatch loss per epoch
  double final_loss = 0.0;         // training-split loss after the last update
};

// Trains a fresh model. Deterministic in (config, data); zero epochs return
// the initialization. Throws DivergenceError on a non-finite loss.
ParameterSet train_base(const ModelConfig& config, const Dataset& data,
                        TrainingHistory* history = nullptr);

// Continues training every weight of `model` for `optimizer.epochs` epochs.
ParameterSet finetune(const ParameterSet& model, const Dataset& data,
                      const OptimizerSettings& optimizer, std::uint64_t seed,
                      std::size_t negatives = 100, TrainingHistory* history = nullptr);

struct AssessmentTrainingConfig {
  SpliceMode mode = SpliceMode::soft;
  AssessmentVariant variant = AssessmentVariant::both;
  HistogramSpec histogram;
  OptimizerSettings optimizer;
  std::size_t negatives = 100;
  std::uint64_t seed = 0;
};

struct AssessmentResult {
  AssessmentNetworks networks;      // networks at the best validation loss
  AssessmentNetworks initial;       // networks before training
  double first_step_loss = 0.0;     // minibatch loss of the very first step
  double initial_validation_loss = 0.0;
  double best_validation_loss = 0.0;
  std::size_t best_epoch = 0;       // 0 means the initial networks won
  std::vector<double> epoch_loss;
  std::vector<double> validation_loss;
};

// Trains f_L and f_G through the splice; base models stay frozen.
AssessmentResult train_assessment(const std::vector<ParameterSet>& models, const Dataset& data,
                                  const AssessmentTrainingConfig& config);

// Loss of the model obtained by assessing and splicing with `networks`.
double spliced_loss(const std::vector<ParameterSet>& models, const AssessmentNetworks& networks,
                    const Objective& objective, const AssessmentTrainingConfig& config,
                    Split split);

}  // namespace cki
