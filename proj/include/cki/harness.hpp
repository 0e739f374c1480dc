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

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cki/checkpoint.hpp"
#include "cki/compatibility.hpp"
#include "cki/data.hpp"
#include "cki/models.hpp"
#include "cki/splicing.hpp"
#include "cki/training.hpp"

namespace cki {

struct ExperimentConfig {
  TaskKind task = TaskKind::classification;
  ClassificationSpec classification;
  InteractionSpec interactions;
  ModelConfig model;  // seed fields are filled per base model
  bool shared_init = true;
  std::size_t n_models = 2;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  SpliceMode mode = SpliceMode::soft;
  std::size_t bins = 64;
  OptimizerSettings assessment;
  OptimizerSettings finetune{.epochs = 1};
  std::vector<double> ensemble_weights;  // empty: 1/n each
  std::vector<double> sparsities = {0.1, 0.3, 0.5};
  std::size_t timing_repetitions = 15;
  std::vector<std::size_t> n_list = {2, 3, 4, 5, 6, 7, 8};
  std::filesystem::path output_dir = "out";

  // Throws ValidationError on unknown keys, wrong types, or broken
  // invariants (n_models >= 2, distinct seeds, bins >= 1, ...).
  static ExperimentConfig from_json(const nlohmann::json& doc);
  static ExperimentConfig load(const std::filesystem::path& path);
  nlohmann::json to_json() const;
  void validate() const;

  AssessmentTrainingConfig assessment_config(std::uint64_t master_seed, SpliceMode mode,
                                             AssessmentVariant variant) const;
  std::string primary_metric() const;
};

struct ReportRow {
  std::size_t n_models = 0;
  std::uint64_t seed = 0;
  std::string method;   // model-k, pruning, ensemble, averaging, cki-hard, cki-soft, cki-soft-finetuned
  std::string variant;  // assessment variant in ablations, empty otherwise
  std::string metric;
  double value = 0.0;
  double cost_ratio = 0.0;
  double wall_time_ms = 0.0;
};

struct Report {
  std::string kind;  // compare, sweep-models, ablate-assessment, ablate-splicing
  nlohmann::json config;
  std::vector<ReportRow> rows;
  nlohmann::json extras = nlohmann::json::object();

  std::string csv() const;
  nlohmann::json to_json() const;
  // Writes <stem>.csv and <stem>.json under `dir`.
  void write(const std::filesystem::path& dir, const std::string& stem) const;

  // Rows matching the filters (empty filter matches anything).
  std::vector<ReportRow> select(const std::string& method, const std::string& metric,
                                std::uint64_t seed, const std::string& variant = "*") const;
  double value(const std::string& method, const std::string& metric, std::uint64_t seed,
               const std::string& variant = "*") const;
};

bool is_declared_method(const std::string& method);

// Data and trained base models of one master seed.
struct SeedArtifacts {
  std::uint64_t seed = 0;
  Dataset data;
  std::vector<ParameterSet> bases;
};

Dataset make_dataset(const ExperimentConfig& config, std::uint64_t master_seed);
ModelConfig base_model_config(const ExperimentConfig& config, std::uint64_t master_seed,
                              std::size_t index);
SeedArtifacts prepare_seed(const ExperimentConfig& config, std::uint64_t master_seed,
                           std::size_t n_models);

// Metric name/value pairs for a single model on the given split.
std::vector<std::pair<std::string, double>> evaluate_model(const ParameterSet& model,
                                                           const Dataset& data,
                                                           Split split = Split::test);
std::vector<std::pair<std::string, double>> evaluate_scores(const Tensor& scores,
                                                            const Dataset& data,
                                                            Split split = Split::test);
std::vector<std::string> metric_names(TaskKind task);

Report run_compare(const ExperimentConfig& config);
Report sweep_model_count(const ExperimentConfig& config, const std::vector<std::size_t>& n_list);
Report ablation_assessment(const ExperimentConfig& config);
Report ablation_splicing(const ExperimentConfig& config);

// metric-vs-n table (mean over seeds) of a sweep report, as CSV.
std::string sweep_curve_csv(const Report& sweep);

}  // namespace cki
