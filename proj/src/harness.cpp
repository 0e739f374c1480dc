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

#include "cki/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "cki/baselines.hpp"
#include "cki/error.hpp"
#include "cki/metrics.hpp"
#include "cki/random.hpp"

namespace cki {

using nlohmann::json;

namespace {

void expect_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be a JSON object");
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) out = obj.at(key).get<T>();
}

void read_optimizer(const json& obj, const std::string& where, OptimizerSettings& out) {
  expect_keys(obj, {"learning_rate", "batch_size", "epochs"}, where);
  read(obj, "learning_rate", out.learning_rate);
  read(obj, "batch_size", out.batch_size);
  read(obj, "epochs", out.epochs);
}

json optimizer_json(const OptimizerSettings& o) {
  return {{"learning_rate", o.learning_rate}, {"batch_size", o.batch_size}, {"epochs", o.epochs}};
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

// --- config -------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  ExperimentConfig c;
  try {
    expect_keys(doc,
                {"task", "n_models", "seeds", "mode", "bins", "shared_init", "data", "model",
                 "assessment", "finetune", "baselines", "timing", "sweep", "output_dir"},
                "config");
    if (doc.contains("task")) {
      const auto task = doc.at("task").get<std::string>();
      if (task == "classification") {
        c.task = TaskKind::classification;
      } else if (task == "ranking") {
        c.task = TaskKind::ranking;
      } else {
        throw ValidationError("unknown task '" + task + "'");
      }
    }
    c.model.kind = c.task == TaskKind::classification ? ArchitectureKind::mlp_classifier
                                                      : ArchitectureKind::matrix_factorization;
    read(doc, "n_models", c.n_models);
    read(doc, "seeds", c.seeds);
    if (doc.contains("mode")) c.mode = parse_splice_mode(doc.at("mode").get<std::string>());
    read(doc, "bins", c.bins);
    read(doc, "shared_init", c.shared_init);
    if (doc.contains("output_dir")) c.output_dir = doc.at("output_dir").get<std::string>();

    if (doc.contains("data")) {
      const json& d = doc.at("data");
      if (c.task == TaskKind::classification) {
        expect_keys(d,
                    {"n_train", "n_validation", "n_test", "n_features", "n_classes",
                     "clusters_per_class", "separation"},
                    "data");
        auto& s = c.classification;
        read(d, "n_train", s.n_train);
        read(d, "n_validation", s.n_validation);
        read(d, "n_test", s.n_test);
        read(d, "n_features", s.n_features);
        read(d, "n_classes", s.n_classes);
        read(d, "clusters_per_class", s.clusters_per_class);
        read(d, "separation", s.separation);
      } else {
        expect_keys(d,
                    {"n_users", "n_items", "latent_dim", "interactions_per_user", "negatives",
                     "temperature"},
                    "data");
        auto& s = c.interactions;
        read(d, "n_users", s.n_users);
        read(d, "n_items", s.n_items);
        read(d, "latent_dim", s.latent_dim);
        read(d, "interactions_per_user", s.interactions_per_user);
        read(d, "negatives", s.negatives);
        read(d, "temperature", s.temperature);
      }
    }
    if (doc.contains("model")) {
      const json& m = doc.at("model");
      expect_keys(m,
                  {"hidden", "factor_dim", "negatives", "learning_rate", "batch_size", "epochs"},
                  "model");
      read(m, "hidden", c.model.hidden);
      read(m, "factor_dim", c.model.factor_dim);
      read(m, "negatives", c.model.negatives);
      read(m, "learning_rate", c.model.optimizer.learning_rate);
      read(m, "batch_size", c.model.optimizer.batch_size);
      read(m, "epochs", c.model.optimizer.epochs);
    }
    if (doc.contains("assessment")) read_optimizer(doc.at("assessment"), "assessment", c.assessment);
    if (doc.contains("finetune")) read_optimizer(doc.at("finetune"), "finetune", c.finetune);
    if (doc.contains("baselines")) {
      const json& b = doc.at("baselines");
      expect_keys(b, {"ensemble_weights", "sparsities"}, "baselines");
      read(b, "ensemble_weights", c.ensemble_weights);
      read(b, "sparsities", c.sparsities);
    }
    if (doc.contains("timing")) {
      expect_keys(doc.at("timing"), {"repetitions"}, "timing");
      read(doc.at("timing"), "repetitions", c.timing_repetitions);
    }
    if (doc.contains("sweep")) {
      expect_keys(doc.at("sweep"), {"n_list"}, "sweep");
      read(doc.at("sweep"), "n_list", c.n_list);
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(doc);
}

json ExperimentConfig::to_json() const {
  json data;
  if (task == TaskKind::classification) {
    const auto& s = classification;
    data = {{"n_train", s.n_train},       {"n_validation", s.n_validation},
            {"n_test", s.n_test},         {"n_features", s.n_features},
            {"n_classes", s.n_classes},   {"clusters_per_class", s.clusters_per_class},
            {"separation", s.separation}};
  } else {
    const auto& s = interactions;
    data = {{"n_users", s.n_users},
            {"n_items", s.n_items},
            {"latent_dim", s.latent_dim},
            {"interactions_per_user", s.interactions_per_user},
            {"negatives", s.negatives},
            {"temperature", s.temperature}};
  }
  return {
      {"task", to_string(task)},
      {"n_models", n_models},
      {"seeds", seeds},
      {"mode", to_string(mode)},
      {"bins", bins},
      {"shared_init", shared_init},
      {"data", data},
      {"model",
       {{"hidden", model.hidden},
        {"factor_dim", model.factor_dim},
        {"negatives", model.negatives},
        {"learning_rate", model.optimizer.learning_rate},
        {"batch_size", model.optimizer.batch_size},
        {"epochs", model.optimizer.epochs}}},
      {"assessment", optimizer_json(assessment)},
      {"finetune", optimizer_json(finetune)},
      {"baselines", {{"ensemble_weights", ensemble_weights}, {"sparsities", sparsities}}},
      {"timing", {{"repetitions", timing_repetitions}}},
      {"sweep", {{"n_list", n_list}}},
      {"output_dir", output_dir.string()},
  };
}

void ExperimentConfig::validate() const {
  if (n_models < 2) throw ValidationError("n_models must be at least 2");
  if (seeds.empty()) throw ValidationError("at least one seed is required");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ValidationError("seeds must be distinct");
  }
  if (bins < 1) throw ValidationError("bins must be at least 1");
  if (timing_repetitions < 5) throw ValidationError("timing repetitions must be at least 5");
  for (const auto* o : {&model.optimizer, &assessment, &finetune}) {
    if (!(o->learning_rate > 0.0)) throw ValidationError("learning rates must be positive");
    if (o->batch_size == 0) throw ValidationError("batch sizes must be positive");
  }
  if (!ensemble_weights.empty() && ensemble_weights.size() != n_models) {
    throw ValidationError("ensemble_weights needs one weight per model");
  }
  for (double w : ensemble_weights)
    if (!std::isfinite(w)) throw ValidationError("ensemble weights must be finite");
  if (sparsities.empty()) throw ValidationError("at least one pruning sparsity is required");
  for (double s : sparsities)
    if (!(s >= 0.0 && s < 1.0)) throw ValidationError("sparsities must lie in [0, 1)");
  for (std::size_t n : n_list)
    if (n < 2) throw ValidationError("every sweep model count must be at least 2");
  model.validate();
}

AssessmentTrainingConfig ExperimentConfig::assessment_config(std::uint64_t master_seed,
                                                             SpliceMode splice_mode,
                                                             AssessmentVariant variant) const {
  AssessmentTrainingConfig a;
  a.mode = splice_mode;
  a.variant = variant;
  a.histogram.bins = bins;
  a.optimizer = assessment;
  a.negatives = model.negatives;
  a.seed = derive_seed(master_seed, "assessment");
  return a;
}

std::string ExperimentConfig::primary_metric() const {
  return task == TaskKind::classification ? "accuracy" : "ndcg@10";
}

// --- reports ------------------------------------------------------------

bool is_declared_method(const std::string& method) {
  static const std::set<std::string> fixed = {
      "pruning", "ensemble", "averaging", "cki-hard", "cki-soft", "cki-soft-finetuned"};
  if (fixed.count(method)) return true;
  if (method.rfind("model-", 0) == 0 && method.size() > 6) {
    return std::all_of(method.begin() + 6, method.end(), [](char c) { return c >= '0' && c <= '9'; });
  }
  return false;
}

std::string Report::csv() const {
  std::ostringstream os;
  os << "n_models,seed,method,variant,metric,value,cost_ratio,wall_time_ms\n";
  for (const auto& r : rows) {
    os << r.n_models << ',' << r.seed << ',' << r.method << ',' << r.variant << ',' << r.metric
       << ',' << format_double(r.value) << ',' << format_double(r.cost_ratio) << ','
       << format_double(r.wall_time_ms) << '\n';
  }
  return os.str();
}

json Report::to_json() const {
  json out = {{"kind", kind}, {"config", config}, {"extras", extras}};
  json rs = json::array();
  for (const auto& r : rows) {
    rs.push_back({{"n_models", r.n_models},
                  {"seed", r.seed},
                  {"method", r.method},
                  {"variant", r.variant},
                  {"metric", r.metric},
                  {"value", r.value},
                  {"cost_ratio", r.cost_ratio},
                  {"wall_time_ms", r.wall_time_ms}});
  }
  out["rows"] = std::move(rs);
  return out;
}

void Report::write(const std::filesystem::path& dir, const std::string& stem) const {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / (stem + ".csv"), std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dir / (stem + ".csv")).string());
    out << csv();
  }
  std::ofstream out(dir / (stem + ".json"), std::ios::trunc);
  if (!out) throw IoError("cannot write " + (dir / (stem + ".json")).string());
  out << to_json().dump(2) << '\n';
}

std::vector<ReportRow> Report::select(const std::string& method, const std::string& metric,
                                      std::uint64_t seed, const std::string& variant) const {
  std::vector<ReportRow> out;
  for (const auto& r : rows) {
    if (!method.empty() && r.method != method) continue;
    if (!metric.empty() && r.metric != metric) continue;
    if (r.seed != seed) continue;
    if (variant != "*" && r.variant != variant) continue;
    out.push_back(r);
  }
  return out;
}

double Report::value(const std::string& method, const std::string& metric, std::uint64_t seed,
                     const std::string& variant) const {
  const auto found = select(method, metric, seed, variant);
  if (found.size() != 1) {
    throw ValidationError("report has " + std::to_string(found.size()) + " rows for " + method +
                          "/" + metric + "/" + std::to_string(seed) + "/" + variant);
  }
  return found.front().value;
}

// --- pipeline pieces ----------------------------------------------------

Dataset make_dataset(const ExperimentConfig& config, std::uint64_t master_seed) {
  const std::uint64_t seed = derive_seed(master_seed, "data");
  if (config.task == TaskKind::classification) return gen_classification(seed, config.classification);
  return gen_interactions(seed, config.interactions);
}

ModelConfig base_model_config(const ExperimentConfig& config, std::uint64_t master_seed,
                              std::size_t index) {
  ModelConfig mc = config.model;
  mc.seed = derive_seed(master_seed, "model", index);
  if (config.shared_init) mc.init_seed = derive_seed(master_seed, "shared-init");
  return mc;
}

SeedArtifacts prepare_seed(const ExperimentConfig& config, std::uint64_t master_seed,
                           std::size_t n_models) {
  SeedArtifacts art;
  art.seed = master_seed;
  art.data = make_dataset(config, master_seed);
  for (std::size_t k = 0; k < n_models; ++k) {
    art.bases.push_back(train_base(base_model_config(config, master_seed, k), art.data));
  }
  return art;
}

std::vector<std::string> metric_names(TaskKind task) {
  if (task == TaskKind::classification) return {"accuracy", "f1", "auc"};
  return {"ndcg@5", "hr@5", "ndcg@10", "hr@10"};
}

namespace {

Tensor model_scores(const ParameterSet& model, const Dataset& data, Split split) {
  if (const auto* cls = std::get_if<ClassificationData>(&data)) {
    const auto& s = split == Split::train ? cls->train
                    : split == Split::validation ? cls->validation
                                                 : cls->test;
    return predict(model, s.features);
  }
  const auto& inter = std::get<InteractionData>(data);
  return predict(model, split == Split::validation ? inter.validation : inter.test);
}

Tensor ensemble_scores(const std::vector<ParameterSet>& models, const Dataset& data, Split split,
                       std::span<const double> weights, CostCounter* cost) {
  if (const auto* cls = std::get_if<ClassificationData>(&data)) {
    const auto& s = split == Split::validation ? cls->validation : cls->test;
    return output_ensemble(models, s.features, weights, cost);
  }
  const auto& inter = std::get<InteractionData>(data);
  return output_ensemble(models, split == Split::validation ? inter.validation : inter.test,
                         weights, cost);
}

double metric_value(const std::vector<std::pair<std::string, double>>& metrics,
                    const std::string& name) {
  for (const auto& [k, v] : metrics)
    if (k == name) return v;
  throw ValidationError("metric '" + name + "' not computed");
}

}  // namespace

std::vector<std::pair<std::string, double>> evaluate_scores(const Tensor& scores,
                                                            const Dataset& data, Split split) {
  if (const auto* cls = std::get_if<ClassificationData>(&data)) {
    const auto& s = split == Split::train ? cls->train
                    : split == Split::validation ? cls->validation
                                                 : cls->test;
    const auto m = classification_metrics(scores, s.labels);
    if (!m.auc) throw ValidationError("AUC undefined: evaluation split lacks a class");
    return {{"accuracy", m.accuracy}, {"f1", m.f1}, {"auc", *m.auc}};
  }
  const auto ranks = target_ranks(scores);
  const auto at5 = ranking_metrics_from_ranks(ranks, 5);
  const auto at10 = ranking_metrics_from_ranks(ranks, 10);
  return {{"ndcg@5", at5.ndcg}, {"hr@5", at5.hit_rate}, {"ndcg@10", at10.ndcg},
          {"hr@10", at10.hit_rate}};
}

std::vector<std::pair<std::string, double>> evaluate_model(const ParameterSet& model,
                                                           const Dataset& data, Split split) {
  return evaluate_scores(model_scores(model, data, split), data, split);
}

namespace {

// Runs method and base inference alternately so drift hits both equally.
double measure_cost(const ExperimentConfig& config, const std::function<void()>& method,
                    const std::function<void()>& base) {
  // Enough inner iterations that one timed sample is a few milliseconds.
  const double once = median(time_runs(base, 3));
  const auto inner = static_cast<std::size_t>(std::clamp(std::ceil(0.004 / std::max(once, 1e-7)), 1.0, 1e4));
  auto repeat = [inner](const std::function<void()>& fn) {
    return [inner, &fn] {
      for (std::size_t i = 0; i < inner; ++i) fn();
    };
  };
  const auto method_loop = repeat(method);
  const auto base_loop = repeat(base);
  std::vector<double> method_times, base_times;
  for (std::size_t r = 0; r < config.timing_repetitions; ++r) {
    base_times.push_back(time_runs(base_loop, 1).front());
    method_times.push_back(time_runs(method_loop, 1).front());
  }
  return unrounded_cost_ratio(method_times, base_times);
}

struct MethodOutcome {
  std::string method;
  std::string variant;
  std::vector<std::pair<std::string, double>> metrics;
  double cost_ratio = 1.0;     // rounded to one decimal
  double cost_unrounded = 1.0;
  double wall_ms = 0.0;

  void set_cost(double ratio) {
    cost_unrounded = ratio;
    cost_ratio = std::round(ratio * 10.0) / 10.0;
  }
};

void append_rows(Report& report, std::uint64_t seed, std::size_t n,
                 const std::vector<MethodOutcome>& outcomes) {
  for (const auto& o : outcomes) {
    for (const auto& [metric, value] : o.metrics) {
      if (!std::isfinite(value)) {
        throw NumericError("non-finite " + metric + " for " + o.method);
      }
      report.rows.push_back({n, seed, o.method, o.variant, metric, value, o.cost_ratio, o.wall_ms});
    }
  }
}

// Evaluates a merged model after checking it lines up with the bases.
MethodOutcome evaluate_single(const ExperimentConfig& config, const std::string& method,
                              const ParameterSet& model, const SeedArtifacts& art,
                              std::chrono::steady_clock::time_point started) {
  validate_compatible({art.bases.front(), model});
  MethodOutcome o;
  o.method = method;
  o.metrics = evaluate_model(model, art.data);
  o.wall_ms = elapsed_ms(started);
  const auto* data = &art.data;
  const auto* base = &art.bases.front();
  o.set_cost(measure_cost(
      config, [&] { (void)model_scores(model, *data, Split::test); },
      [&] { (void)model_scores(*base, *data, Split::test); }));
  return o;
}

template <typename Fn>
auto staged(const char* stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw Error(std::string(stage) + ": " + e.what());
  }
}

json assessment_summary(const AssessmentResult& r) {
  return {{"initial_validation_loss", r.initial_validation_loss},
          {"best_validation_loss", r.best_validation_loss},
          {"best_epoch", r.best_epoch}};
}

// Every method of the comparison on the first `n` bases of `art`.
std::vector<MethodOutcome> compare_methods(const ExperimentConfig& config, const SeedArtifacts& art,
                                           json& extras) {
  const std::vector<ParameterSet>& bases = art.bases;
  const std::size_t n = bases.size();
  const std::string primary = config.primary_metric();
  std::vector<MethodOutcome> out;
  using clock = std::chrono::steady_clock;

  for (std::size_t k = 0; k < n; ++k) {
    out.push_back(evaluate_single(config, "model-" + std::to_string(k + 1), bases[k], art, clock::now()));
  }

  staged("pruning", [&] {
    const auto t0 = clock::now();
    double best_score = -1.0, best_sparsity = config.sparsities.front();
    for (double s : config.sparsities) {
      const double score = metric_value(
          evaluate_model(magnitude_prune(bases.front(), s), art.data, Split::validation), primary);
      if (score > best_score) {
        best_score = score;
        best_sparsity = s;
      }
    }
    extras["pruning_sparsity"] = best_sparsity;
    out.push_back(evaluate_single(config, "pruning", magnitude_prune(bases.front(), best_sparsity),
                                  art, t0));
  });

  staged("ensemble", [&] {
    const auto t0 = clock::now();
    MethodOutcome o;
    o.method = "ensemble";
    CostCounter counter;
    o.metrics = evaluate_scores(
        ensemble_scores(bases, art.data, Split::test, config.ensemble_weights, &counter), art.data);
    o.wall_ms = elapsed_ms(t0);
    extras["ensemble_forward_passes"] = counter.forward_passes;
    o.set_cost(measure_cost(
        config,
        [&] { (void)ensemble_scores(bases, art.data, Split::test, config.ensemble_weights, nullptr); },
        [&] { (void)model_scores(bases.front(), art.data, Split::test); }));
    out.push_back(std::move(o));
  });

  staged("averaging", [&] {
    const auto t0 = clock::now();
    out.push_back(evaluate_single(config, "averaging", parameter_average(bases), art, t0));
  });

  staged("cki-hard", [&] {
    const auto t0 = clock::now();
    const auto cfg = config.assessment_config(art.seed, SpliceMode::hard, AssessmentVariant::both);
    const auto trained = train_assessment(bases, art.data, cfg);
    extras["assessment_hard"] = assessment_summary(trained);
    const auto compat = assess(bases, trained.networks, cfg.histogram, cfg.variant);
    out.push_back(evaluate_single(config, "cki-hard", hard_splice(bases, compat), art, t0));
  });

  ParameterSet soft;
  staged("cki-soft", [&] {
    const auto t0 = clock::now();
    const auto cfg = config.assessment_config(art.seed, SpliceMode::soft, AssessmentVariant::both);
    const auto trained = train_assessment(bases, art.data, cfg);
    extras["assessment_soft"] = assessment_summary(trained);
    const auto compat = assess(bases, trained.networks, cfg.histogram, cfg.variant);
    soft = soft_splice(bases, compat);
    out.push_back(evaluate_single(config, "cki-soft", soft, art, t0));
  });

  staged("cki-soft-finetuned", [&] {
    const auto t0 = clock::now();
    const auto tuned = finetune(soft, art.data, config.finetune, derive_seed(art.seed, "finetune"),
                                config.model.negatives);
    out.push_back(evaluate_single(config, "cki-soft-finetuned", tuned, art, t0));
  });
  for (const auto& o : out) extras["cost_ratio_unrounded"][o.method] = o.cost_unrounded;
  return out;
}

SeedArtifacts first_n(const SeedArtifacts& art, std::size_t n) {
  SeedArtifacts sub;
  sub.seed = art.seed;
  sub.data = art.data;
  sub.bases.assign(art.bases.begin(), art.bases.begin() + static_cast<std::ptrdiff_t>(n));
  return sub;
}

}  // namespace

Report run_compare(const ExperimentConfig& config) {
  config.validate();
  Report report;
  report.kind = "compare";
  report.config = config.to_json();
  for (std::uint64_t seed : config.seeds) {
    const auto art = staged("train-base", [&] { return prepare_seed(config, seed, config.n_models); });
    json extras;
    append_rows(report, seed, config.n_models, compare_methods(config, art, extras));
    report.extras[std::to_string(seed)] = std::move(extras);
  }
  return report;
}

Report sweep_model_count(const ExperimentConfig& config, const std::vector<std::size_t>& n_list) {
  config.validate();
  if (n_list.empty()) throw ValidationError("sweep needs at least one model count");
  for (std::size_t n : n_list)
    if (n < 2) throw ValidationError("every sweep model count must be at least 2");
  Report report;
  report.kind = "sweep-models";
  report.config = config.to_json();
  report.config["sweep"]["n_list"] = n_list;
  const std::size_t n_max = *std::max_element(n_list.begin(), n_list.end());
  for (std::uint64_t seed : config.seeds) {
    const auto art = staged("train-base", [&] { return prepare_seed(config, seed, n_max); });
    for (std::size_t n : n_list) {
      ExperimentConfig at_n = config;
      at_n.n_models = n;
      at_n.ensemble_weights.clear();
      json extras;
      append_rows(report, seed, n, compare_methods(at_n, first_n(art, n), extras));
      report.extras[std::to_string(seed)][std::to_string(n)] = std::move(extras);
    }
  }
  return report;
}

Report ablation_assessment(const ExperimentConfig& config) {
  config.validate();
  Report report;
  report.kind = "ablate-assessment";
  report.config = config.to_json();
  const std::string method = std::string("cki-") + to_string(config.mode);
  for (std::uint64_t seed : config.seeds) {
    const auto art = staged("train-base", [&] { return prepare_seed(config, seed, config.n_models); });
    std::vector<MethodOutcome> outcomes;
    outcomes.push_back(evaluate_single(config, "averaging", parameter_average(art.bases), art,
                                       std::chrono::steady_clock::now()));
    for (auto variant : {AssessmentVariant::neither, AssessmentVariant::local_only,
                         AssessmentVariant::global_only, AssessmentVariant::both}) {
      staged(to_string(variant), [&] {
        const auto t0 = std::chrono::steady_clock::now();
        const auto cfg = config.assessment_config(seed, config.mode, variant);
        const auto trained = train_assessment(art.bases, art.data, cfg);
        const auto compat = assess(art.bases, trained.networks, cfg.histogram, variant);
        auto o = evaluate_single(config, method, splice(art.bases, compat, config.mode), art, t0);
        o.variant = to_string(variant);
        report.extras[std::to_string(seed)][o.variant] = assessment_summary(trained);
        outcomes.push_back(std::move(o));
      });
    }
    append_rows(report, seed, config.n_models, outcomes);
  }
  return report;
}

Report ablation_splicing(const ExperimentConfig& config) {
  config.validate();
  Report report;
  report.kind = "ablate-splicing";
  report.config = config.to_json();
  for (std::uint64_t seed : config.seeds) {
    const auto art = staged("train-base", [&] { return prepare_seed(config, seed, config.n_models); });
    std::vector<MethodOutcome> outcomes;
    outcomes.push_back(evaluate_single(config, "averaging", parameter_average(art.bases), art,
                                       std::chrono::steady_clock::now()));
    // One set of trained networks; only the splice differs between rows.
    const auto cfg = config.assessment_config(seed, config.mode, AssessmentVariant::both);
    const auto trained = staged("assessment", [&] { return train_assessment(art.bases, art.data, cfg); });
    const auto compat = assess(art.bases, trained.networks, cfg.histogram, cfg.variant);
    json seed_extras = {{"assessment", assessment_summary(trained)}};
    for (SpliceMode mode : {SpliceMode::hard, SpliceMode::soft}) {
      const auto t0 = std::chrono::steady_clock::now();
      const ParameterSet merged = splice(art.bases, compat, mode);
      if (mode == SpliceMode::hard) {
        std::size_t violations = 0;
        for (std::size_t m = 0; m < merged.size(); ++m) {
          for (std::size_t i = 0; i < merged.value(m).size(); ++i) {
            const double v = merged.value(m)[i];
            const bool member = std::any_of(art.bases.begin(), art.bases.end(),
                                            [&](const ParameterSet& b) { return b.value(m)[i] == v; });
            if (!member) ++violations;
          }
        }
        seed_extras["hard_selection_violations"] = violations;
        if (violations) throw Error("hard splice produced entries outside the inputs");
      }
      auto o = evaluate_single(config, std::string("cki-") + to_string(mode), merged, art, t0);
      o.variant = "both";
      outcomes.push_back(std::move(o));
    }
    report.extras[std::to_string(seed)] = std::move(seed_extras);
    append_rows(report, seed, config.n_models, outcomes);
  }
  return report;
}

std::string sweep_curve_csv(const Report& sweep) {
  // (n, method, metric) -> values across seeds, in first-seen order.
  std::vector<std::tuple<std::size_t, std::string, std::string>> keys;
  std::map<std::tuple<std::size_t, std::string, std::string>, std::vector<double>> values;
  for (const auto& r : sweep.rows) {
    const auto key = std::make_tuple(r.n_models, r.method, r.metric);
    if (!values.count(key)) keys.push_back(key);
    values[key].push_back(r.value);
  }
  std::ostringstream os;
  os << "n_models,method,metric,mean,min,max,seeds\n";
  for (const auto& key : keys) {
    const auto& v = values[key];
    double s = 0.0;
    for (double x : v) s += x;
    os << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key) << ','
       << format_double(s / static_cast<double>(v.size())) << ','
       << format_double(*std::min_element(v.begin(), v.end())) << ','
       << format_double(*std::max_element(v.begin(), v.end())) << ',' << v.size() << '\n';
  }
  return os.str();
}

}  // namespace cki
