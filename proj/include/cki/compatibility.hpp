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
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cki/autodiff.hpp"
#include "cki/checkpoint.hpp"
#include "cki/tensor.hpp"

namespace cki {

using ScalarFn = std::function<double(double)>;

// Scalar -> scalar network: x -> w2 . softplus(x * w1 + b1) + b2.
// One instance is shared by every position of every parameter matrix.
class ScalarNetwork {
 public:
  static constexpr std::size_t kDefaultHidden = 16;

  ScalarNetwork() = default;
  ScalarNetwork(Tensor w1, Tensor b1, Tensor w2, Tensor b2);

  // Hidden layer uniform in [-0.5, 0.5]; output layer solved so that
  // f(0) = 0 and f'(0) = 1, i.e. the network starts out close to identity
  // for small inputs.
  static ScalarNetwork near_identity(std::uint64_t seed, std::size_t hidden = kDefaultHidden);

  double operator()(double x) const;

  std::size_t hidden() const { return w1_.cols(); }
  std::size_t parameter_count() const { return 3 * hidden() + 1; }

  const Tensor& w1() const { return w1_; }  // 1 x H
  const Tensor& b1() const { return b1_; }  // 1 x H
  const Tensor& w2() const { return w2_; }  // H x 1
  const Tensor& b2() const { return b2_; }  // 1 x 1
  // Parameters in the fixed order w1, b1, w2, b2.
  std::vector<Tensor*> parameters() { return {&w1_, &b1_, &w2_, &b2_}; }
  std::vector<const Tensor*> parameters() const { return {&w1_, &b1_, &w2_, &b2_}; }

 private:
  Tensor w1_, b1_, w2_, b2_;
};

// The local-level (f_L) and global-level (f_G) assessment networks.
struct AssessmentNetworks {
  ScalarNetwork local;
  ScalarNetwork global;

  static AssessmentNetworks initialized(std::uint64_t seed,
                                        std::size_t hidden = ScalarNetwork::kDefaultHidden);

  // Checkpoint form: names local.w1, local.b1, ..., global.b2.
  ParameterSet to_parameters() const;
  static AssessmentNetworks from_parameters(const ParameterSet& set);
};

struct HistogramSpec {
  std::size_t bins = 64;
};

// Which perspectives feed the compatibility weights before normalization.
enum class AssessmentVariant {
  both,        // V_G * (1 - exp(-V_G * V_L))
  local_only,  // V_L
  global_only, // V_G broadcast over the matrix
  neither,     // all zeros, i.e. uniform after normalization
};

const char* to_string(AssessmentVariant v);
AssessmentVariant parse_assessment_variant(const std::string& s);

// Per-model, per-matrix compatibility. Indexed [model][matrix] in the
// declared parameter order.
struct CompatibilityMap {
  std::vector<std::string> names;
  std::vector<std::vector<Tensor>> weights;  // normalized V^(k)
  std::vector<std::vector<Tensor>> local;    // V_L^(k)
  std::vector<std::vector<double>> global;   // V_G^(k), one per matrix

  std::size_t model_count() const { return weights.size(); }
  std::size_t matrix_count() const { return names.size(); }
  const Tensor& weight(std::size_t model, std::size_t matrix) const {
    return weights[model][matrix];
  }

  // Every position sums to 1 across models within `tol` and lies in [0, 1].
  // Throws ValidationError otherwise.
  void check(double tol = 1e-9) const;

  // Every model gets 1/n everywhere.
  static CompatibilityMap uniform(const std::vector<ParameterSet>& models);
};

// V_L^(k)[i,j] = sum_{l != k} f_L(|W_k[i,j] - W_l[i,j]|) for the named matrix.
std::vector<Tensor> local_uncertainty(const std::vector<ParameterSet>& models,
                                      const std::string& name, const ScalarFn& f_local);

// Counts per equal-width bin over [min, max]; bins are [L_t, U_t) except the
// last, which is closed. A constant matrix puts everything in the first bin.
std::vector<std::size_t> histogram(const Tensor& w, HistogramSpec spec);

// Shannon entropy (nats) of the histogram distribution; in [0, ln u].
double entropy(const Tensor& w, HistogramSpec spec);

// V_G^(k) = sum_{l != k} f_G(|E(W_k) - E(W_l)|) for the named matrix.
std::vector<double> global_information(const std::vector<ParameterSet>& models,
                                       const std::string& name, const ScalarFn& f_global,
                                       HistogramSpec spec);

// V = V_G * (1 - exp(-V_G * V_L)).
Tensor blend(double v_global, const Tensor& v_local);

// Positionwise softmax across models (max-subtracted).
std::vector<Tensor> normalize(const std::vector<Tensor>& raws);

CompatibilityMap assess(const std::vector<ParameterSet>& models,
                        const AssessmentNetworks& networks, HistogramSpec spec,
                        AssessmentVariant variant = AssessmentVariant::both);

// Two-model closed form, evaluated directly without the n-model sums or the
// max-subtracted softmax. Used to cross-check the general path.
struct PairCompatibility {
  Tensor local_a, local_b;
  double global_a = 0.0, global_b = 0.0;
  Tensor weight_a, weight_b;
};
PairCompatibility assess_pair(const Tensor& w_a, const Tensor& w_b, const ScalarFn& f_local,
                              const ScalarFn& f_global, HistogramSpec spec);

// --- differentiable path -------------------------------------------------

struct ScalarNetworkVars {
  Var w1, b1, w2, b2;
  std::vector<Var> parameters() const { return {w1, b1, w2, b2}; }
};

// Registers the network's tensors on `graph` as leaves (trainable) or
// constants.
ScalarNetworkVars bind(Graph& graph, const ScalarNetwork& net, bool trainable);
// Applies the network elementwise; the result has the shape of `x`.
Var apply(const ScalarNetworkVars& net, Var x);

struct AssessmentVars {
  ScalarNetworkVars local, global;
};
AssessmentVars bind(Graph& graph, const AssessmentNetworks& networks, bool trainable);

// Normalized compatibility on the graph, indexed [model][matrix]. Base
// weights enter as constants; only the network parameters carry gradients.
std::vector<std::vector<Var>> assess(Graph& graph, const std::vector<ParameterSet>& models,
                                     const AssessmentVars& networks, HistogramSpec spec,
                                     AssessmentVariant variant = AssessmentVariant::both);

}  // namespace cki
