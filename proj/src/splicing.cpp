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

#include "cki/splicing.hpp"

#include "cki/error.hpp"

namespace cki {

namespace {

void check_inputs(const std::vector<ParameterSet>& models, const CompatibilityMap& compat) {
  const ShapeTable table = validate_compatible(models);
  if (compat.model_count() != models.size()) {
    throw ShapeError("compatibility map covers " + std::to_string(compat.model_count()) +
                     " models, got " + std::to_string(models.size()));
  }
  if (compat.matrix_count() != table.size()) {
    throw ShapeError("compatibility map covers a different set of matrices");
  }
  for (std::size_t m = 0; m < table.size(); ++m) {
    if (compat.names[m] != table[m].name) {
      throw ShapeError("compatibility map has '" + compat.names[m] + "' where models have '" +
                       table[m].name + "'");
    }
    for (std::size_t k = 0; k < models.size(); ++k) {
      if (compat.weights[k][m].shape() != table[m].shape) {
        throw ShapeError("compatibility of '" + table[m].name + "' has the wrong shape");
      }
    }
  }
  compat.check();
}

}  // namespace

const char* to_string(SpliceMode mode) { return mode == SpliceMode::soft ? "soft" : "hard"; }

SpliceMode parse_splice_mode(const std::string& s) {
  if (s == "soft") return SpliceMode::soft;
  if (s == "hard") return SpliceMode::hard;
  throw ValidationError("unknown splicing mode '" + s + "' (expected hard or soft)");
}

ParameterSet soft_splice(const std::vector<ParameterSet>& models, const CompatibilityMap& compat) {
  check_inputs(models, compat);
  ParameterSet out(models.front().architecture());
  for (std::size_t m = 0; m < compat.matrix_count(); ++m) {
    const Tensor& w0 = models[0].value(m);
    Tensor w = w0;
    for (std::size_t k = 1; k < models.size(); ++k) {
      const Tensor& wk = models[k].value(m);
      const Tensor& vk = compat.weights[k][m];
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += (wk[i] - w0[i]) * vk[i];
    }
    out.add(compat.names[m], std::move(w));
  }
  return out;
}

std::vector<Tensor> binarize(const std::vector<Tensor>& weights) {
  const std::size_t n = weights.size();
  std::vector<Tensor> hot(n, Tensor(weights.at(0).shape(), 0.0));
  for (std::size_t i = 0; i < weights[0].size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < n; ++k) {
      if (weights[k][i] > weights[best][i]) best = k;
    }
    hot[best][i] = 1.0;
  }
  return hot;
}

ParameterSet hard_splice(const std::vector<ParameterSet>& models, const CompatibilityMap& compat) {
  check_inputs(models, compat);
  ParameterSet out(models.front().architecture());
  std::vector<Tensor> per_model(models.size());
  for (std::size_t m = 0; m < compat.matrix_count(); ++m) {
    for (std::size_t k = 0; k < models.size(); ++k) per_model[k] = compat.weights[k][m];
    const auto hot = binarize(per_model);
    Tensor w(models[0].value(m).shape(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (std::size_t k = 0; k < models.size(); ++k) {
        if (hot[k][i] == 1.0) {
          w[i] = models[k].value(m)[i];
          break;
        }
      }
    }
    out.add(compat.names[m], std::move(w));
  }
  return out;
}

ParameterSet splice(const std::vector<ParameterSet>& models, const CompatibilityMap& compat,
                    SpliceMode mode) {
  return mode == SpliceMode::soft ? soft_splice(models, compat) : hard_splice(models, compat);
}

std::vector<Var> splice_for_training(Graph& graph, const std::vector<ParameterSet>& models,
                                     const std::vector<std::vector<Var>>& compat,
                                     SpliceMode mode) {
  const ShapeTable table = validate_compatible(models);
  if (compat.size() != models.size()) throw ShapeError("compatibility/model count mismatch");
  std::vector<Var> out;
  out.reserve(table.size());
  for (std::size_t m = 0; m < table.size(); ++m) {
    std::vector<Var> weights(models.size());
    for (std::size_t k = 0; k < models.size(); ++k) {
      if (compat[k].size() != table.size() || compat[k][m].shape() != table[m].shape) {
        throw ShapeError("compatibility of '" + table[m].name + "' has the wrong shape");
      }
      weights[k] = compat[k][m];
    }
    const Tensor& w0 = models[0].value(m);
    Var acc = graph.constant(w0);
    for (std::size_t k = 1; k < models.size(); ++k) {
      Tensor delta = models[k].value(m);
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] -= w0[i];
      acc = acc + graph.constant(std::move(delta)) * weights[k];
    }
    if (mode == SpliceMode::hard) {
      std::vector<Tensor> values;
      for (const Var& v : weights) values.push_back(v.value());
      const auto hot = binarize(values);
      Tensor picked(w0.shape(), 0.0);
      for (std::size_t i = 0; i < picked.size(); ++i) {
        for (std::size_t k = 0; k < models.size(); ++k) {
          if (hot[k][i] == 1.0) {
            picked[i] = models[k].value(m)[i];
            break;
          }
        }
      }
      acc = graph.straight_through(std::move(picked), acc);
    }
    out.push_back(acc);
  }
  return out;
}

ParameterSet to_parameter_set(const ParameterSet& like, const std::vector<Var>& matrices) {
  if (matrices.size() != like.size()) throw ShapeError("matrix count mismatch");
  ParameterSet out(like.architecture());
  for (std::size_t m = 0; m < like.size(); ++m) out.add(like[m].name, matrices[m].value());
  return out;
}

}  // namespace cki
