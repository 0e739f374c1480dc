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

// Command-line front end: data generation, base training, assessment,
// splicing, fine-tuning, evaluation, and the experiment drivers.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cki/baselines.hpp"
#include "cki/checkpoint.hpp"
#include "cki/compatibility.hpp"
#include "cki/error.hpp"
#include "cki/harness.hpp"
#include "cki/splicing.hpp"
#include "cki/training.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kRuntime = 2;

struct Common {
  std::string config_path;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  std::optional<std::size_t> bins;
  std::vector<std::string> models;
};

void add_common(CLI::App* cmd, Common& c, bool with_models) {
  cmd->add_option("--config", c.config_path, "Experiment config (JSON)");
  cmd->add_option("--out", c.out, "Output directory");
  cmd->add_option("--seed", c.seed, "Master seed (defaults to the first config seed)");
  cmd->add_option("--mode", c.mode, "Splicing mode")->check(CLI::IsMember({"hard", "soft"}));
  cmd->add_option("--bins", c.bins, "Histogram bins u")->check(CLI::PositiveNumber);
  if (with_models) cmd->add_option("--models", c.models, "Checkpoint paths")->expected(1, -1);
}

cki::ExperimentConfig resolve_config(const Common& c) {
  cki::ExperimentConfig cfg =
      c.config_path.empty() ? cki::ExperimentConfig{} : cki::ExperimentConfig::load(c.config_path);
  if (c.mode) cfg.mode = cki::parse_splice_mode(*c.mode);
  if (c.bins) cfg.bins = *c.bins;
  if (c.seed) cfg.seeds = {*c.seed};
  cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

std::vector<cki::ParameterSet> load_models(const Common& c, std::size_t at_least) {
  if (c.models.size() < at_least) {
    throw cki::ValidationError("need at least " + std::to_string(at_least) + " --models");
  }
  std::vector<cki::ParameterSet> out;
  for (const auto& p : c.models) out.push_back(cki::load(p));
  if (out.size() >= 2) cki::validate_compatible(out);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw cki::IoError("cannot write " + path.string());
  out << text;
}

int gen_data(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto data = cki::make_dataset(cfg, cfg.seeds.front());
  fs::create_directories(c.out);
  std::ostringstream os;
  os.precision(17);
  if (const auto* cls = std::get_if<cki::ClassificationData>(&data)) {
    os << "split,label";
    for (std::size_t j = 0; j < cls->n_features; ++j) os << ",x" << j;
    os << '\n';
    auto dump = [&](const char* name, const cki::ClassificationSplit& s) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        os << name << ',' << s.labels[i];
        for (std::size_t j = 0; j < cls->n_features; ++j) os << ',' << s.features.at(i, j);
        os << '\n';
      }
    };
    dump("train", cls->train);
    dump("validation", cls->validation);
    dump("test", cls->test);
    write_text(fs::path(c.out) / "classification.csv", os.str());
  } else {
    const auto& inter = std::get<cki::InteractionData>(data);
    os << "split,user,item,is_positive\n";
    for (const auto& [u, i] : inter.train) os << "train," << u << ',' << i << ",1\n";
    auto dump = [&](const char* name, const std::vector<cki::RankingCase>& cases) {
      for (const auto& rc : cases)
        for (std::size_t j = 0; j < rc.candidates.size(); ++j)
          os << name << ',' << rc.user << ',' << rc.candidates[j] << ',' << (j == 0) << '\n';
    };
    dump("validation", inter.validation);
    dump("test", inter.test);
    write_text(fs::path(c.out) / "interactions.csv", os.str());
  }
  std::cout << "wrote " << cki::to_string(cfg.task) << " data to " << c.out << '\n';
  return kOk;
}

int train_base(const Common& c) {
  const auto cfg = resolve_config(c);
  const std::uint64_t seed = cfg.seeds.front();
  const auto data = cki::make_dataset(cfg, seed);
  fs::create_directories(c.out);
  for (std::size_t k = 0; k < cfg.n_models; ++k) {
    cki::TrainingHistory history;
    const auto model = cki::train_base(cki::base_model_config(cfg, seed, k), data, &history);
    const fs::path path = fs::path(c.out) / ("model-" + std::to_string(k + 1) + ".ckpt");
    cki::save(model, path);
    std::cout << path.string() << ": loss " << history.initial_loss << " -> " << history.final_loss
              << '\n';
  }
  return kOk;
}

cki::AssessmentResult train_networks(const cki::ExperimentConfig& cfg,
                                     const std::vector<cki::ParameterSet>& models,
                                     const cki::Dataset& data) {
  const auto a = cfg.assessment_config(cfg.seeds.front(), cfg.mode, cki::AssessmentVariant::both);
  auto result = cki::train_assessment(models, data, a);
  std::clog << "assessment validation loss " << result.initial_validation_loss << " -> "
            << result.best_validation_loss << " (epoch " << result.best_epoch << ")\n";
  return result;
}

int assess_cmd(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto models = load_models(c, 2);
  const auto data = cki::make_dataset(cfg, cfg.seeds.front());
  const auto trained = train_networks(cfg, models, data);
  const auto compat = cki::assess(models, trained.networks, {cfg.bins});
  fs::create_directories(c.out);
  cki::save(trained.networks.to_parameters(), fs::path(c.out) / "assessment.ckpt");
  cki::ParameterSet map("compatibility:" + std::to_string(models.size()));
  for (std::size_t k = 0; k < compat.model_count(); ++k)
    for (std::size_t m = 0; m < compat.matrix_count(); ++m)
      map.add("model" + std::to_string(k + 1) + "/" + compat.names[m], compat.weights[k][m]);
  cki::save(map, fs::path(c.out) / "compatibility.ckpt");
  std::cout << "wrote assessment.ckpt and compatibility.ckpt to " << c.out << '\n';
  return kOk;
}

int splice_cmd(const Common& c, const std::string& assessment_path) {
  const auto cfg = resolve_config(c);
  const auto models = load_models(c, 2);
  cki::AssessmentNetworks networks;
  if (!assessment_path.empty()) {
    networks = cki::AssessmentNetworks::from_parameters(cki::load(assessment_path));
  } else {
    networks = train_networks(cfg, models, cki::make_dataset(cfg, cfg.seeds.front())).networks;
  }
  const auto compat = cki::assess(models, networks, {cfg.bins});
  const auto merged = cki::splice(models, compat, cfg.mode);
  fs::create_directories(c.out);
  cki::save(merged, fs::path(c.out) / "spliced.ckpt");
  std::cout << "wrote " << cki::to_string(cfg.mode) << " splice to "
            << (fs::path(c.out) / "spliced.ckpt").string() << '\n';
  return kOk;
}

int finetune_cmd(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto models = load_models(c, 1);
  if (models.size() != 1) throw cki::ValidationError("finetune takes exactly one --models path");
  const auto data = cki::make_dataset(cfg, cfg.seeds.front());
  cki::TrainingHistory history;
  const auto tuned = cki::finetune(models.front(), data, cfg.finetune,
                                   cki::derive_seed(cfg.seeds.front(), "finetune"),
                                   cfg.model.negatives, &history);
  fs::create_directories(c.out);
  cki::save(tuned, fs::path(c.out) / "finetuned.ckpt");
  std::cout << "finetune loss " << history.initial_loss << " -> " << history.final_loss << '\n';
  return kOk;
}

int evaluate_cmd(const Common& c) {
  const auto cfg = resolve_config(c);
  const auto models = load_models(c, 1);
  const auto data = cki::make_dataset(cfg, cfg.seeds.front());
  std::ostringstream os;
  os << "model,metric,value\n";
  for (std::size_t k = 0; k < models.size(); ++k) {
    for (const auto& [metric, value] : cki::evaluate_model(models[k], data)) {
      os << c.models[k] << ',' << metric << ',' << value << '\n';
    }
  }
  fs::create_directories(c.out);
  write_text(fs::path(c.out) / "evaluation.csv", os.str());
  std::cout << os.str();
  return kOk;
}

void print_summary(const cki::Report& report, const std::string& metric) {
  for (const auto& r : report.rows) {
    if (r.metric != metric) continue;
    std::cout << "n=" << r.n_models << " seed=" << r.seed << ' ' << r.method
              << (r.variant.empty() ? "" : "[" + r.variant + "]") << ' ' << metric << '='
              << r.value << " cost=" << r.cost_ratio << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compatibility-aware parameter splicing toolkit"};
  app.require_subcommand(1);
  Common c;
  std::string assessment_path;
  std::string ablate_kind = "both";
  std::vector<std::size_t> n_list;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic dataset as CSV");
  add_common(gen, c, false);
  auto* train = app.add_subcommand("train-base", "Train n_models base models");
  add_common(train, c, false);
  auto* assess = app.add_subcommand("assess", "Train assessment networks, write compatibility");
  add_common(assess, c, true);
  auto* splice = app.add_subcommand("splice", "Splice models into one checkpoint");
  add_common(splice, c, true);
  splice->add_option("--assessment", assessment_path, "Trained assessment.ckpt (else trains one)");
  auto* tune = app.add_subcommand("finetune", "Fine-tune one model for the configured epochs");
  add_common(tune, c, true);
  auto* eval = app.add_subcommand("evaluate", "Evaluate checkpoints on the test split");
  add_common(eval, c, true);
  auto* compare = app.add_subcommand("compare", "Full comparison against the baselines");
  add_common(compare, c, false);
  auto* sweep = app.add_subcommand("sweep-models", "Vary the number of spliced models");
  add_common(sweep, c, false);
  sweep->add_option("--n-list", n_list, "Model counts (defaults to the config sweep list)");
  auto* ablate = app.add_subcommand("ablate", "Assessment and splicing ablations");
  add_common(ablate, c, false);
  ablate->add_option("--kind", ablate_kind, "assessment, splicing, or both")
      ->check(CLI::IsMember({"assessment", "splicing", "both"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidation;
  }

  try {
    if (gen->parsed()) return gen_data(c);
    if (train->parsed()) return train_base(c);
    if (assess->parsed()) return assess_cmd(c);
    if (splice->parsed()) return splice_cmd(c, assessment_path);
    if (tune->parsed()) return finetune_cmd(c);
    if (eval->parsed()) return evaluate_cmd(c);
    if (compare->parsed()) {
      const auto cfg = resolve_config(c);
      const auto report = cki::run_compare(cfg);
      report.write(cfg.output_dir, "compare");
      print_summary(report, cfg.primary_metric());
      return kOk;
    }
    if (sweep->parsed()) {
      const auto cfg = resolve_config(c);
      const auto report = cki::sweep_model_count(cfg, n_list.empty() ? cfg.n_list : n_list);
      report.write(cfg.output_dir, "sweep");
      write_text(cfg.output_dir / "sweep_curve.csv", cki::sweep_curve_csv(report));
      print_summary(report, cfg.primary_metric());
      return kOk;
    }
    if (ablate->parsed()) {
      const auto cfg = resolve_config(c);
      if (ablate_kind != "splicing") {
        const auto report = cki::ablation_assessment(cfg);
        report.write(cfg.output_dir, "ablate_assessment");
        print_summary(report, cfg.primary_metric());
      }
      if (ablate_kind != "assessment") {
        const auto report = cki::ablation_splicing(cfg);
        report.write(cfg.output_dir, "ablate_splicing");
        print_summary(report, cfg.primary_metric());
      }
      return kOk;
    }
  } catch (const cki::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const cki::ShapeError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const cki::FormatError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
