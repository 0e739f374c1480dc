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

#include "cki/compatibility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cki/error.hpp"
#include "cki/random.hpp"

namespace cki {

ScalarNetwork::ScalarNetwork(Tensor w1, Tensor b1, Tensor w2, Tensor b2)
    : w1_(std::move(w1)), b1_(std::move(b1)), w2_(std::move(w2)), b2_(std::move(b2)) {
  const std::size_t h = w1_.cols();
  if (w1_.rows() != 1 || b1_.shape() != Shape{1, h} || w2_.shape() != Shape{h, 1} ||
      b2_.shape() != Shape{1, 1}) {
    throw ShapeError("scalar network expects 1xH, 1xH, Hx1, 1x1 tensors");
  }
}

ScalarNetwork ScalarNetwork::near_identity(std::uint64_t seed, std::size_t hidden) {
  if (hidden == 0) throw ValidationError("scalar network needs at least one hidden unit");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  Tensor w1 = Tensor::matrix(1, hidden), b1 = Tensor::matrix(1, hidden);
  for (std::size_t i = 0; i < hidden; ++i) w1[i] = u(rng);
  for (std::size_t i = 0; i < hidden; ++i) b1[i] = u(rng);
  // f'(0) = sum_i w2_i w1_i sigmoid(b1_i); pick w2 proportional to w1.
  double slope = 0.0;
  for (std::size_t i = 0; i < hidden; ++i) slope += w1[i] * w1[i] * sigmoid(b1[i]);
  if (slope <= 0.0) throw NumericError("degenerate scalar network initialization");
  Tensor w2 = Tensor::matrix(hidden, 1);
  double offset = 0.0;
  for (std::size_t i = 0; i < hidden; ++i) {
    w2[i] = w1[i] / slope;
    offset += w2[i] * softplus(b1[i]);
  }
  return ScalarNetwork(std::move(w1), std::move(b1), std::move(w2), Tensor::scalar(-offset));
}

double ScalarNetwork::operator()(double x) const {
  // Same accumulation order as the graph path (matmul, then bias).
  double y = 0.0;
  for (std::size_t i = 0; i < hidden(); ++i) y += softplus(x * w1_[i] + b1_[i]) * w2_[i];
  return y + b2_[0];
}

AssessmentNetworks AssessmentNetworks::initialized(std::uint64_t seed, std::size_t hidden) {
  return {ScalarNetwork::near_identity(derive_seed(seed, "f_local"), hidden),
          ScalarNetwork::near_identity(derive_seed(seed, "f_global"), hidden)};
}

ParameterSet AssessmentNetworks::to_parameters() const {
  ParameterSet set("assessment:1-" + std::to_string(local.hidden()) + "-1");
  const char* parts[] = {"w1", "b1", "w2", "b2"};
  for (const auto& [prefix, net] : {std::pair{"local", &local}, std::pair{"global", &global}}) {
    const auto params = net->parameters();
    for (std::size_t i = 0; i < params.size(); ++i) {
      set.add(std::string(prefix) + "." + parts[i], *params[i]);
    }
  }
  return set;
}

AssessmentNetworks AssessmentNetworks::from_parameters(const ParameterSet& set) {
  auto net = [&](const std::string& prefix) {
    return ScalarNetwork(set.get(prefix + ".w1"), set.get(prefix + ".b1"),
                         set.get(prefix + ".w2"), set.get(prefix + ".b2"));
  };
  return {net("local"), net("global")};
}

const char* to_string(AssessmentVariant v) {
  switch (v) {
    case AssessmentVariant::both: return "both";
    case AssessmentVariant::local_only: return "local";
    case AssessmentVariant::global_only: return "global";
    case AssessmentVariant::neither: return "neither";
  }
  return "?";
}

AssessmentVariant parse_assessment_variant(const std::string& s) {
  if (s == "both") return AssessmentVariant::both;
  if (s == "local") return AssessmentVariant::local_only;
  if (s == "global") return AssessmentVariant::global_only;
  if (s == "neither") return AssessmentVariant::neither;
  throw ValidationError("unknown assessment variant '" + s + "'");
}

void CompatibilityMap::check(double tol) const {
  const std::size_t n = model_count();
  if (n < 2) throw ValidationError("compatibility map needs at least two models");
  for (std::size_t m = 0; m < matrix_count(); ++m) {
    const Shape& shape = weights[0][m].shape();
    for (std::size_t k = 1; k < n; ++k) {
      if (weights[k][m].shape() != shape) {
        throw ShapeError("compatibility shapes differ for '" + names[m] + "'");
      }
    }
    for (std::size_t i = 0; i < weights[0][m].size(); ++i) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double v = weights[k][m][i];
        if (!(v >= 0.0 && v <= 1.0)) {
          throw ValidationError("compatibility of '" + names[m] + "' outside [0, 1]");
        }
        s += v;
      }
      if (std::abs(s - 1.0) > tol) {
        throw ValidationError("compatibility of '" + names[m] + "' sums to " +
                              std::to_string(s) + " at position " + std::to_string(i));
      }
    }
  }
}

CompatibilityMap CompatibilityMap::uniform(const std::vector<ParameterSet>& models) {
  const ShapeTable table = validate_compatible(models);
  const double w = 1.0 / static_cast<double>(models.size());
  CompatibilityMap map;
  map.weights.resize(models.size());
  map.local.resize(models.size());
  map.global.resize(models.size());
  for (const auto& [name, shape] : table) {
    map.names.push_back(name);
    for (std::size_t k = 0; k < models.size(); ++k) {
      map.weights[k].emplace_back(shape, w);
      map.local[k].emplace_back(shape, 0.0);
      map.global[k].push_back(0.0);
    }
  }
  return map;
}

std::vector<Tensor> local_uncertainty(const std::vector<ParameterSet>& models,
                                      const std::string& name, const ScalarFn& f_local) {
  const std::size_t n = models.size();
  if (n < 2) throw ValidationError("local uncertainty needs at least two models");
  std::vector<const Tensor*> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    w[k] = &models[k].get(name);
    if (w[k]->shape() != w[0]->shape()) {
      throw ShapeError("'" + name + "' differs in shape between model 0 and model " +
                       std::to_string(k));
    }
  }
  const std::size_t size = w[0]->size();
  // f_L(|W_k - W_l|) is symmetric in (k, l); evaluate each pair once.
  std::vector<std::vector<double>> pair(n * n);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      auto& p = pair[k * n + l];
      p.resize(size);
      for (std::size_t i = 0; i < size; ++i) {
        p[i] = f_local(std::abs((*w[k])[i] - (*w[l])[i]));
        if (!std::isfinite(p[i])) throw NumericError("local network produced a non-finite value");
      }
    }
  }
  std::vector<Tensor> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    Tensor v(w[0]->shape());
    bool first = true;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == k) continue;
      const auto& p = pair[std::min(k, l) * n + std::max(k, l)];
      for (std::size_t i = 0; i < size; ++i) v[i] = first ? p[i] : v[i] + p[i];
      first = false;
    }
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

// Lower edge of 0-based bin t: W_min + (W_max - W_min) * t / u.
double bin_edge(double lo, double range, std::size_t t, std::size_t u) {
  return lo + range * static_cast<double>(t) / static_cast<double>(u);
}

}  // namespace

std::vector<std::size_t> histogram(const Tensor& w, HistogramSpec spec) {
  if (spec.bins == 0) throw ValidationError("histogram needs at least one bin");
  if (w.empty()) throw ValidationError("histogram of an empty matrix");
  const std::size_t u = spec.bins;
  std::vector<std::size_t> counts(u, 0);
  const auto [lo_it, hi_it] = std::minmax_element(w.raw().begin(), w.raw().end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi - lo;
  if (!(range > 0.0)) {
    counts[0] = w.size();
    return counts;
  }
  for (double v : w.raw()) {
    auto t = static_cast<std::size_t>((v - lo) / range * static_cast<double>(u));
    t = std::min(t, u - 1);
    // The arithmetic guess can land one bin off near an edge; settle it
    // against the edges themselves.
    while (t > 0 && v < bin_edge(lo, range, t, u)) --t;
    while (t + 1 < u && v >= bin_edge(lo, range, t + 1, u)) ++t;
    ++counts[t];
  }
  return counts;
}

double entropy(const Tensor& w, HistogramSpec spec) {
  const auto counts = histogram(w, spec);
  const double total = static_cast<double>(w.size());
  double e = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    e -= p * std::log(p);
  }
  return e;
}

std::vector<double> global_information(const std::vector<ParameterSet>& models,
                                       const std::string& name, const ScalarFn& f_global,
                                       HistogramSpec spec) {
  const std::size_t n = models.size();
  if (n < 2) throw ValidationError("global information needs at least two models");
  std::vector<double> e(n);
  for (std::size_t k = 0; k < n; ++k) e[k] = entropy(models[k].get(name), spec);
  std::vector<double> out(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    bool first = true;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == k) continue;
      const double v = f_global(std::abs(e[k] - e[l]));
      if (!std::isfinite(v)) throw NumericError("global network produced a non-finite value");
      out[k] = first ? v : out[k] + v;
      first = false;
    }
  }
  return out;
}

Tensor blend(double v_global, const Tensor& v_local) {
  Tensor out(v_local.shape());
  for (std::size_t i = 0; i < v_local.size(); ++i) {
    out[i] = v_global * (1.0 - std::exp(-(v_global * v_local[i])));
  }
  out.require_finite("blend");
  return out;
}

std::vector<Tensor> normalize(const std::vector<Tensor>& raws) {
  const std::size_t n = raws.size();
  if (n < 2) throw ValidationError("normalize needs at least two tensors");
  for (const auto& r : raws) {
    if (r.shape() != raws[0].shape()) throw ShapeError("normalize: shapes differ");
  }
  std::vector<Tensor> out(n, Tensor(raws[0].shape()));
  for (std::size_t i = 0; i < raws[0].size(); ++i) {
    double m = raws[0][i];
    for (std::size_t k = 1; k < n; ++k) m = std::max(m, raws[k][i]);
    double s = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      out[k][i] = std::exp(raws[k][i] - m);
      s += out[k][i];
    }
    for (std::size_t k = 0; k < n; ++k) out[k][i] /= s;
  }
  return out;
}

CompatibilityMap assess(const std::vector<ParameterSet>& models,
                        const AssessmentNetworks& networks, HistogramSpec spec,
                        AssessmentVariant variant) {
  const ShapeTable table = validate_compatible(models);
  const std::size_t n = models.size();
  const ScalarFn f_local = [&](double x) { return networks.local(x); };
  const ScalarFn f_global = [&](double x) { return networks.global(x); };

  CompatibilityMap map;
  map.weights.resize(n);
  map.local.resize(n);
  map.global.resize(n);
  for (const auto& [name, shape] : table) {
    map.names.push_back(name);
    auto v_local = local_uncertainty(models, name, f_local);
    auto v_global = global_information(models, name, f_global, spec);
    std::vector<Tensor> raw(n);
    for (std::size_t k = 0; k < n; ++k) {
      switch (variant) {
        case AssessmentVariant::both: raw[k] = blend(v_global[k], v_local[k]); break;
        case AssessmentVariant::local_only: raw[k] = v_local[k]; break;
        case AssessmentVariant::global_only: raw[k] = Tensor(shape, v_global[k]); break;
        case AssessmentVariant::neither: raw[k] = Tensor(shape, 0.0); break;
      }
    }
    auto weights = normalize(raw);
    for (std::size_t k = 0; k < n; ++k) {
      map.weights[k].push_back(std::move(weights[k]));
      map.local[k].push_back(std::move(v_local[k]));
      map.global[k].push_back(v_global[k]);
    }
  }
  return map;
}

PairCompatibility assess_pair(const Tensor& w_a, const Tensor& w_b, const ScalarFn& f_local,
                              const ScalarFn& f_global, HistogramSpec spec) {
  if (w_a.shape() != w_b.shape()) throw ShapeError("assess_pair: shapes differ");
  PairCompatibility r;
  r.local_a = Tensor(w_a.shape());
  r.local_b = Tensor(w_a.shape());
  for (std::size_t i = 0; i < w_a.size(); ++i) {
    r.local_a[i] = f_local(std::abs(w_a[i] - w_b[i]));
    r.local_b[i] = f_local(std::abs(w_b[i] - w_a[i]));
  }
  const double e_a = entropy(w_a, spec), e_b = entropy(w_b, spec);
  r.global_a = f_global(std::abs(e_a - e_b));
  r.global_b = f_global(std::abs(e_b - e_a));
  r.weight_a = Tensor(w_a.shape());
  r.weight_b = Tensor(w_a.shape());
  for (std::size_t i = 0; i < w_a.size(); ++i) {
    const double va = r.global_a * (1.0 - std::exp(-r.global_a * r.local_a[i]));
    const double vb = r.global_b * (1.0 - std::exp(-r.global_b * r.local_b[i]));
    r.weight_a[i] = std::exp(va) / (std::exp(va) + std::exp(vb));
    r.weight_b[i] = std::exp(vb) / (std::exp(va) + std::exp(vb));
  }
  return r;
}

ScalarNetworkVars bind(Graph& graph, const ScalarNetwork& net, bool trainable) {
  auto put = [&](const Tensor& t) { return trainable ? graph.leaf(t) : graph.constant(t); };
  return {put(net.w1()), put(net.b1()), put(net.w2()), put(net.b2())};
}

Var apply(const ScalarNetworkVars& net, Var x) {
  Graph& g = x.graph();
  const Shape shape = x.shape();
  Var column = g.reshape(x, {shape_size(shape), 1});
  Var hidden = softplus(g.add_row(matmul(column, net.w1), net.b1));
  Var out = g.add_row(matmul(hidden, net.w2), net.b2);
  return g.reshape(out, shape);
}

AssessmentVars bind(Graph& graph, const AssessmentNetworks& networks, bool trainable) {
  return {bind(graph, networks.local, trainable), bind(graph, networks.global, trainable)};
}

std::vector<std::vector<Var>> assess(Graph& graph, const std::vector<ParameterSet>& models,
                                     const AssessmentVars& networks, HistogramSpec spec,
                                     AssessmentVariant variant) {
  const ShapeTable table = validate_compatible(models);
  const std::size_t n = models.size();
  std::vector<std::vector<Var>> out(n);
  for (std::size_t m = 0; m < table.size(); ++m) {
    const Shape& shape = table[m].shape;
    std::vector<Var> raw(n);
    if (variant == AssessmentVariant::neither) {
      for (auto& r : raw) r = graph.constant(Tensor(shape, 0.0));
    } else {
      std::vector<Var> local(n * n), global(n * n);
      std::vector<double> e(n);
      for (std::size_t k = 0; k < n; ++k) e[k] = entropy(models[k].value(m), spec);
      for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t l = k + 1; l < n; ++l) {
          const Tensor& wk = models[k].value(m);
          const Tensor& wl = models[l].value(m);
          Tensor diff(shape);
          for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(wk[i] - wl[i]);
          if (variant != AssessmentVariant::global_only) {
            local[k * n + l] = apply(networks.local, graph.constant(std::move(diff)));
          }
          if (variant != AssessmentVariant::local_only) {
            global[k * n + l] =
                apply(networks.global, graph.constant(Tensor::scalar(std::abs(e[k] - e[l]))));
          }
        }
      }
      auto row_sum = [&](const std::vector<Var>& pairs, std::size_t k) {
        Var acc;
        for (std::size_t l = 0; l < n; ++l) {
          if (l == k) continue;
          Var p = pairs[std::min(k, l) * n + std::max(k, l)];
          acc = acc.valid() ? acc + p : p;
        }
        return acc;
      };
      Var one = graph.constant(Tensor::scalar(1.0));
      Var zeros = graph.constant(Tensor(shape, 0.0));
      for (std::size_t k = 0; k < n; ++k) {
        switch (variant) {
          case AssessmentVariant::both: {
            Var vg = row_sum(global, k);
            Var vl = row_sum(local, k);
            raw[k] = vg * (one - exp(-(vg * vl)));
            break;
          }
          case AssessmentVariant::local_only: raw[k] = row_sum(local, k); break;
          case AssessmentVariant::global_only: raw[k] = zeros + row_sum(global, k); break;
          case AssessmentVariant::neither: break;
        }
      }
    }
    // Positionwise softmax; the max is a constant shift.
    Tensor peak = raw[0].value();
    for (std::size_t k = 1; k < n; ++k)
      for (std::size_t i = 0; i < peak.size(); ++i) peak[i] = std::max(peak[i], raw[k].value()[i]);
    Var shift = graph.constant(std::move(peak));
    std::vector<Var> e(n);
    Var total;
    for (std::size_t k = 0; k < n; ++k) {
      e[k] = exp(raw[k] - shift);
      total = total.valid() ? total + e[k] : e[k];
    }
    for (std::size_t k = 0; k < n; ++k) out[k].push_back(e[k] / total);
  }
  return out;
}

}  // namespace cki
