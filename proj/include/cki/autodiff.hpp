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
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "cki/tensor.hpp"

namespace cki {

class Graph;

// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }

 private:
  friend class Graph;
  Var(Graph* g, std::size_t id) : graph_(g), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

enum class Unary { neg, abs, exp, log, relu, sigmoid, softplus };
enum class Binary { add, sub, mul, div };
enum class Reduction { sum, mean };

// Reverse-mode tape. Nodes are appended in evaluation order, so the node
// index is already a topological order and backward walks it in reverse.
// A fresh graph is built for every training step.
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Differentiable input; receives an adjoint in backward().
  Var leaf(Tensor value);
  // Input that never receives an adjoint.
  Var constant(Tensor value);

  Var unary(Unary kind, Var a);
  // Shapes must match, or one operand must be a 1x1 scalar.
  Var binary(Binary kind, Var a, Var b);
  Var scale(Var a, double c);
  Var matmul(Var a, Var b);
  Var reduce(Reduction kind, Var a);
  // Adds a 1 x n row to each row of an m x n matrix.
  Var add_row(Var a, Var row);
  Var reshape(Var a, Shape shape);
  // Rows of `a` selected by `index`, in order (repeats allowed).
  Var gather_rows(Var a, std::span<const std::size_t> index);
  // a: B x d, b: (B*group) x d -> B x group, out[i,j] = <a_i, b_{i*group+j}>.
  Var group_dot(Var a, Var b, std::size_t group);
  // Mean multinomial logistic loss of logits (B x C) against class labels.
  Var softmax_cross_entropy(Var logits, std::span<const int> labels);
  // Forward value is `forward`; the adjoint passes unchanged to `surrogate`.
  Var straight_through(Tensor forward, Var surrogate);

  // Populates adjoints of every node reachable from the scalar `loss`.
  void backward(Var loss);
  // Clears adjoints so backward() may run again.
  void reset();
  // Adjoint of `v` from the last backward(); zeros if unreachable.
  Tensor grad(Var v) const;

  const Tensor& value(Var v) const { return nodes_[v.id_].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op {
    leaf, constant, unary, binary, scale, matmul, reduce, add_row, reshape,
    gather_rows, group_dot, xent, straight_through
  };

  struct Node {
    Op op = Op::constant;
    int sub = 0;  // Unary / Binary / Reduction tag
    Tensor value;
    Tensor adjoint;
    std::size_t lhs = 0, rhs = 0;
    bool has_lhs = false, has_rhs = false;
    bool needs_grad = false;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    std::vector<int> labels;
    Tensor cache;  // op-specific forward by-product (softmax probabilities)
  };

  Var push(Node node, std::string_view what);
  void check_owner(Var v) const;
  void accumulate(std::size_t id, const Tensor& g);
  void backprop_node(std::size_t id);

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

// Convenience wrappers that read like arithmetic.
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
inline Var exp(Var a) { return a.graph().unary(Unary::exp, a); }
inline Var log(Var a) { return a.graph().unary(Unary::log, a); }
inline Var abs(Var a) { return a.graph().unary(Unary::abs, a); }
inline Var relu(Var a) { return a.graph().unary(Unary::relu, a); }
inline Var sigmoid(Var a) { return a.graph().unary(Unary::sigmoid, a); }
inline Var softplus(Var a) { return a.graph().unary(Unary::softplus, a); }
inline Var sum(Var a) { return a.graph().reduce(Reduction::sum, a); }
inline Var mean(Var a) { return a.graph().reduce(Reduction::mean, a); }
inline Var matmul(Var a, Var b) { return a.graph().matmul(a, b); }

// Numerically stable softplus used by both the tape and the value paths.
double softplus(double x);
double sigmoid(double x);

// Builds the scalar function on a fresh graph, backpropagates, and compares
// against central differences. Returns max_i |analytic - numeric| /
// max(1, |numeric|).
using GraphFunction = std::function<Var(Graph&, Var)>;
double grad_check(const GraphFunction& f, const Tensor& x, double eps = 1e-5);

}  // namespace cki
