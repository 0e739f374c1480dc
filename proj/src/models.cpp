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

#include "cki/models.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "cki/error.hpp"
#include "cki/random.hpp"

namespace cki {

void ModelConfig::validate() const {
  if (!(optimizer.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (optimizer.batch_size == 0) throw ValidationError("batch size must be positive");
  if (kind == ArchitectureKind::mlp_classifier) {
    for (std::size_t h : hidden)
      if (h == 0) throw ValidationError("hidden widths must be positive");
  } else {
    if (factor_dim == 0) throw ValidationError("factor dimension must be positive");
    if (negatives == 0) throw ValidationError("need at least one sampled negative");
  }
}

Architecture Architecture::parse(const std::string& tag) {
  const auto colon = tag.find(':');
  if (colon == std::string::npos) throw ValidationError("bad architecture tag '" + tag + "'");
  const std::string kind = tag.substr(0, colon);
  Architecture arch;
  if (kind == "mlp") {
    arch.kind = ArchitectureKind::mlp_classifier;
  } else if (kind == "mf") {
    arch.kind = ArchitectureKind::matrix_factorization;
  } else {
    throw ValidationError("unknown architecture kind '" + kind + "'");
  }
  std::istringstream in(tag.substr(colon + 1));
  std::string part;
  while (std::getline(in, part, '-')) {
    try {
      arch.dims.push_back(static_cast<std::size_t>(std::stoull(part)));
    } catch (const std::exception&) {
      throw ValidationError("bad architecture tag '" + tag + "'");
    }
  }
  const std::size_t need_min = arch.kind == ArchitectureKind::mlp_classifier ? 2 : 3;
  if (arch.dims.size() < need_min ||
      (arch.kind == ArchitectureKind::matrix_factorization && arch.dims.size() != 3)) {
    throw ValidationError("bad architecture tag '" + tag + "'");
  }
  return arch;
}

std::string Architecture::tag() const {
  std::string s = kind == ArchitectureKind::mlp_classifier ? "mlp:" : "mf:";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "-";
    s += std::to_string(dims[i]);
  }
  return s;
}

ParameterSet init_model(const ModelConfig& config, const Dataset& data) {
  config.validate();
  Rng rng(derive_seed(config.init_seed.value_or(config.seed), "init"));
  Architecture arch;
  arch.kind = config.kind;
  if (config.kind == ArchitectureKind::mlp_classifier) {
    const auto* cls = std::get_if<ClassificationData>(&data);
    if (!cls) throw ValidationError("an MLP classifier needs classification data");
    arch.dims.push_back(cls->n_features);
    arch.dims.insert(arch.dims.end(), config.hidden.begin(), config.hidden.end());
    arch.dims.push_back(cls->n_classes);
    ParameterSet set(arch.tag());
    for (std::size_t l = 0; l + 1 < arch.dims.size(); ++l) {
      const std::size_t in = arch.dims[l], out = arch.dims[l + 1];
      // He-uniform for relu layers.
      const double bound = std::sqrt(6.0 / static_cast<double>(in));
      std::uniform_real_distribution<double> u(-bound, bound);
      Tensor w = Tensor::matrix(in, out);
      for (double& v : w.raw()) v = u(rng);
      set.add("layer" + std::to_string(l) + ".weight", std::move(w));
      set.add("layer" + std::to_string(l) + ".bias", Tensor::matrix(1, out));
    }
    return set;
  }
  const auto* inter = std::get_if<InteractionData>(&data);
  if (!inter) throw ValidationError("matrix factorization needs interaction data");
  arch.dims = {inter->n_users, inter->n_items, config.factor_dim};
  ParameterSet set(arch.tag());
  std::normal_distribution<double> normal(0.0, 0.1);
  Tensor users = Tensor::matrix(inter->n_users, config.factor_dim);
  Tensor items = Tensor::matrix(inter->n_items, config.factor_dim);
  for (double& v : users.raw()) v = normal(rng);
  for (double& v : items.raw()) v = normal(rng);
  set.add("user_embedding", std::move(users));
  set.add("item_embedding", std::move(items));
  return set;
}

Tensor predict(const ParameterSet& model, const Tensor& features) {
  const Architecture arch = Architecture::parse(model.architecture());
  if (arch.kind != ArchitectureKind::mlp_classifier) {
    throw ValidationError("feature prediction needs an MLP classifier");
  }
  if (model.size() % 2 != 0) throw ShapeError("MLP parameters must come in weight/bias pairs");
  Tensor h = features;
  const std::size_t layers = model.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = add_row(matmul(h, model.value(2 * l)), model.value(2 * l + 1));
    if (l + 1 < layers) relu_inplace(h);
  }
  return h;
}

Tensor predict(const ParameterSet& model, std::span<const RankingCase> cases) {
  const Architecture arch = Architecture::parse(model.architecture());
  if (arch.kind != ArchitectureKind::matrix_factorization) {
    throw ValidationError("ranking prediction needs a matrix factorization model");
  }
  const Tensor& users = model.get("user_embedding");
  const Tensor& items = model.get("item_embedding");
  if (users.cols() != items.cols()) throw ShapeError("embedding widths differ");
  const std::size_t d = users.cols();
  const std::size_t width = cases.empty() ? 0 : cases.front().candidates.size();
  Tensor scores = Tensor::matrix(cases.size(), width);
  for (std::size_t r = 0; r < cases.size(); ++r) {
    const RankingCase& c = cases[r];
    if (c.candidates.size() != width) throw ShapeError("ranking cases differ in candidate count");
    if (c.user >= users.rows()) throw ShapeError("user index out of range");
    for (std::size_t j = 0; j < width; ++j) {
      if (c.candidates[j] >= items.rows()) throw ShapeError("item index out of range");
      double s = 0.0;
      for (std::size_t p = 0; p < d; ++p) s += users.at(c.user, p) * items.at(c.candidates[j], p);
      scores.at(r, j) = s;
    }
  }
  return scores;
}

Var forward_mlp(Graph& graph, const std::vector<Var>& params, Var features) {
  if (params.empty() || params.size() % 2 != 0) {
    throw ShapeError("MLP parameters must come in weight/bias pairs");
  }
  Var h = features;
  const std::size_t layers = params.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = graph.add_row(matmul(h, params[2 * l]), params[2 * l + 1]);
    if (l + 1 < layers) h = relu(h);
  }
  return h;
}

}  // namespace cki
