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

#include "cki/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cki/error.hpp"

namespace cki {

double softplus(double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

const Tensor& Var::value() const { return graph_->value(*this); }

namespace {

bool is_scalar(const Tensor& t) { return t.size() == 1; }

const char* unary_name(Unary k) {
  switch (k) {
    case Unary::neg: return "neg";
    case Unary::abs: return "abs";
    case Unary::exp: return "exp";
    case Unary::log: return "log";
    case Unary::relu: return "relu";
    case Unary::sigmoid: return "sigmoid";
    case Unary::softplus: return "softplus";
  }
  return "unary";
}

const char* binary_name(Binary k) {
  switch (k) {
    case Binary::add: return "add";
    case Binary::sub: return "sub";
    case Binary::mul: return "mul";
    case Binary::div: return "div";
  }
  return "binary";
}

double apply_binary(Binary k, double x, double y) {
  switch (k) {
    case Binary::add: return x + y;
    case Binary::sub: return x - y;
    case Binary::mul: return x * y;
    case Binary::div: return x / y;
  }
  return 0.0;
}

// Sums a gradient down to the 1x1 shape of a broadcast scalar operand.
Tensor reduce_to(const Tensor& g, const Tensor& like) {
  if (g.shape() == like.shape()) return g;
  double s = 0.0;
  for (double v : g.raw()) s += v;
  return Tensor(like.shape(), std::vector<double>{s});
}

}  // namespace

void Graph::check_owner(Var v) const {
  if (v.graph_ != this || v.id_ >= nodes_.size()) {
    throw ValidationError("variable does not belong to this graph");
  }
}

Var Graph::push(Node node, std::string_view what) {
  node.value.require_finite(std::string(what));
  node.needs_grad = node.op == Op::leaf ||
                    (node.has_lhs && nodes_[node.lhs].needs_grad) ||
                    (node.has_rhs && nodes_[node.rhs].needs_grad);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Graph::leaf(Tensor value) {
  Node n;
  n.op = Op::leaf;
  n.value = std::move(value);
  return push(std::move(n), "leaf");
}

Var Graph::constant(Tensor value) {
  Node n;
  n.op = Op::constant;
  n.value = std::move(value);
  return push(std::move(n), "constant");
}

Var Graph::unary(Unary kind, Var a) {
  check_owner(a);
  const Tensor& x = nodes_[a.id_].value;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    switch (kind) {
      case Unary::neg: out[i] = -v; break;
      case Unary::abs: out[i] = std::abs(v); break;
      case Unary::exp: out[i] = std::exp(v); break;
      case Unary::log: out[i] = std::log(v); break;
      case Unary::relu: out[i] = v > 0.0 ? v : 0.0; break;
      case Unary::sigmoid: out[i] = cki::sigmoid(v); break;
      case Unary::softplus: out[i] = cki::softplus(v); break;
    }
  }
  Node n;
  n.op = Op::unary;
  n.sub = static_cast<int>(kind);
  n.value = std::move(out);
  n.lhs = a.id_;
  n.has_lhs = true;
  return push(std::move(n), unary_name(kind));
}

Var Graph::binary(Binary kind, Var a, Var b) {
  check_owner(a);
  check_owner(b);
  const Tensor& x = nodes_[a.id_].value;
  const Tensor& y = nodes_[b.id_].value;
  Tensor out;
  if (x.shape() == y.shape()) {
    out = Tensor(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply_binary(kind, x[i], y[i]);
  } else if (is_scalar(y)) {
    out = Tensor(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = apply_binary(kind, x[i], y[0]);
  } else if (is_scalar(x)) {
    out = Tensor(y.shape());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = apply_binary(kind, x[0], y[i]);
  } else {
    throw ShapeError(std::string(binary_name(kind)) + " shape mismatch " +
                     shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  Node n;
  n.op = Op::binary;
  n.sub = static_cast<int>(kind);
  n.value = std::move(out);
  n.lhs = a.id_;
  n.rhs = b.id_;
  n.has_lhs = n.has_rhs = true;
  return push(std::move(n), binary_name(kind));
}

Var Graph::scale(Var a, double c) {
  check_owner(a);
  Tensor out = nodes_[a.id_].value;
  for (double& v : out.raw()) v *= c;
  Node n;
  n.op = Op::scale;
  n.scalar = c;
  n.value = std::move(out);
  n.lhs = a.id_;
  n.has_lhs = true;
  return push(std::move(n), "scale");
}

Var Graph::matmul(Var a, Var b) {
  check_owner(a);
  check_owner(b);
  Node n;
  n.op = Op::matmul;
  n.value = cki::matmul(nodes_[a.id_].value, nodes_[b.id_].value);
  n.lhs = a.id_;
  n.rhs = b.id_;
  n.has_lhs = n.has_rhs = true;
  return push(std::move(n), "matmul");
}

Var Graph::reduce(Reduction kind, Var a) {
  check_owner(a);
  const Tensor& x = nodes_[a.id_].value;
  if (x.empty()) throw ShapeError("reduce over an empty tensor");
  double s = 0.0;
  for (double v : x.raw()) s += v;
  if (kind == Reduction::mean) s /= static_cast<double>(x.size());
  Node n;
  n.op = Op::reduce;
  n.sub = static_cast<int>(kind);
  n.value = Tensor::scalar(s);
  n.lhs = a.id_;
  n.has_lhs = true;
  return push(std::move(n), kind == Reduction::sum ? "sum" : "mean");
}

Var Graph::add_row(Var a, Var row) {
  check_owner(a);
  check_owner(row);
  Node n;
  n.op = Op::add_row;
  n.value = cki::add_row(nodes_[a.id_].value, nodes_[row.id_].value);
  n.lhs = a.id_;
  n.rhs = row.id_;
  n.has_lhs = n.has_rhs = true;
  return push(std::move(n), "add_row");
}

Var Graph::reshape(Var a, Shape shape) {
  check_owner(a);
  Node n;
  n.op = Op::reshape;
  n.value = nodes_[a.id_].value.reshaped(std::move(shape));
  n.lhs = a.id_;
  n.has_lhs = true;
  return push(std::move(n), "reshape");
}

Var Graph::gather_rows(Var a, std::span<const std::size_t> index) {
  check_owner(a);
  const Tensor& x = nodes_[a.id_].value;
  const std::size_t r = x.rows(), d = x.cols();
  Tensor out = Tensor::matrix(index.size(), d);
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] >= r) throw ShapeError("gather_rows index out of range");
    std::copy_n(x.raw().begin() + static_cast<std::ptrdiff_t>(index[i] * d), d,
                out.raw().begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  Node n;
  n.op = Op::gather_rows;
  n.value = std::move(out);
  n.index.assign(index.begin(), index.end());
  n.lhs = a.id_;
  n.has_lhs = true;
  return push(std::move(n), "gather_rows");
}

Var Graph::group_dot(Var a, Var b, std::size_t group) {
  check_owner(a);
  check_owner(b);
  const Tensor& x = nodes_[a.id_].value;
  const Tensor& y = nodes_[b.id_].value;
  const std::size_t batch = x.rows(), d = x.cols();
  if (group == 0 || y.cols() != d || y.rows() != batch * group) {
    throw ShapeError("group_dot " + shape_string(x.shape()) + " with " +
                     shape_string(y.shape()) + " group " + std::to_string(group));
  }
  Tensor out = Tensor::matrix(batch, group);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < group; ++j) {
      double s = 0.0;
      const std::size_t row = i * group + j;
      for (std::size_t p = 0; p < d; ++p) s += x.at(i, p) * y.at(row, p);
      out.at(i, j) = s;
    }
  }
  Node n;
  n.op = Op::group_dot;
  n.value = std::move(out);
  n.scalar = static_cast<double>(group);
  n.lhs = a.id_;
  n.rhs = b.id_;
  n.has_lhs = n.has_rhs = true;
  return push(std::move(n), "group_dot");
}

Var Graph::softmax_cross_entropy(Var logits, std::span<const int> labels) {
  check_owner(logits);
  const Tensor& z = nodes_[logits.id_].value;
  const std::size_t batch = z.rows(), classes = z.cols();
  if (labels.size() != batch || batch == 0) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                     " labels for " + shape_string(z.shape()) + " logits");
  }
  Tensor probs(z.shape());
  double loss = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    double m = z.at(i, 0);
    for (std::size_t j = 1; j < classes; ++j) m = std::max(m, z.at(i, j));
    double denom = 0.0;
    for (std::size_t j = 0; j < classes; ++j) {
      probs.at(i, j) = std::exp(z.at(i, j) - m);
      denom += probs.at(i, j);
    }
    for (std::size_t j = 0; j < classes; ++j) probs.at(i, j) /= denom;
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ValidationError("label " + std::to_string(y) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
    loss -= z.at(i, static_cast<std::size_t>(y)) - m - std::log(denom);
  }
  Node n;
  n.op = Op::xent;
  n.value = Tensor::scalar(loss / static_cast<double>(batch));
  n.cache = std::move(probs);
  n.labels.assign(labels.begin(), labels.end());
  n.lhs = logits.id_;
  n.has_lhs = true;
  return push(std::move(n), "softmax_cross_entropy");
}

Var Graph::straight_through(Tensor forward, Var surrogate) {
  check_owner(surrogate);
  if (forward.shape() != nodes_[surrogate.id_].value.shape()) {
    throw ShapeError("straight_through shape mismatch " + shape_string(forward.shape()) +
                     " vs " + shape_string(nodes_[surrogate.id_].value.shape()));
  }
  Node n;
  n.op = Op::straight_through;
  n.value = std::move(forward);
  n.lhs = surrogate.id_;
  n.has_lhs = true;
  return push(std::move(n), "straight_through");
}

void Graph::accumulate(std::size_t id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (n.adjoint.empty()) {
    n.adjoint = g;
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) n.adjoint[i] += g[i];
}

void Graph::backward(Var loss) {
  check_owner(loss);
  if (backward_done_) throw ValidationError("backward() called twice without reset()");
  if (nodes_[loss.id_].value.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got " +
                     shape_string(nodes_[loss.id_].value.shape()));
  }
  backward_done_ = true;
  accumulate(loss.id_, Tensor(nodes_[loss.id_].value.shape(), 1.0));
  for (std::size_t id = loss.id_ + 1; id-- > 0;) {
    if (!nodes_[id].adjoint.empty()) backprop_node(id);
  }
}

void Graph::backprop_node(std::size_t id) {
  // accumulate() only writes parents' adjoints, so `n` stays valid.
  const Node& n = nodes_[id];
  const Tensor& g = n.adjoint;
  switch (n.op) {
    case Op::leaf:
    case Op::constant:
      return;
    case Op::unary: {
      const Tensor& x = nodes_[n.lhs].value;
      Tensor d(x.shape());
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = x[i];
        double dv = 0.0;
        switch (static_cast<Unary>(n.sub)) {
          case Unary::neg: dv = -1.0; break;
          case Unary::abs: dv = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); break;
          case Unary::exp: dv = n.value[i]; break;
          case Unary::log: dv = 1.0 / v; break;
          case Unary::relu: dv = v > 0.0 ? 1.0 : 0.0; break;
          case Unary::sigmoid: dv = n.value[i] * (1.0 - n.value[i]); break;
          case Unary::softplus: dv = cki::sigmoid(v); break;
        }
        d[i] = g[i] * dv;
      }
      accumulate(n.lhs, d);
      return;
    }
    case Op::binary: {
      const Tensor& x = nodes_[n.lhs].value;
      const Tensor& y = nodes_[n.rhs].value;
      const bool xs = x.shape() != n.value.shape();
      const bool ys = y.shape() != n.value.shape();
      Tensor gx(n.value.shape()), gy(n.value.shape());
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double xv = xs ? x[0] : x[i];
        const double yv = ys ? y[0] : y[i];
        switch (static_cast<Binary>(n.sub)) {
          case Binary::add: gx[i] = g[i]; gy[i] = g[i]; break;
          case Binary::sub: gx[i] = g[i]; gy[i] = -g[i]; break;
          case Binary::mul: gx[i] = g[i] * yv; gy[i] = g[i] * xv; break;
          case Binary::div: gx[i] = g[i] / yv; gy[i] = -g[i] * xv / (yv * yv); break;
        }
      }
      const std::size_t lhs = n.lhs, rhs = n.rhs;
      if (nodes_[lhs].needs_grad) accumulate(lhs, reduce_to(gx, x));
      if (nodes_[rhs].needs_grad) accumulate(rhs, reduce_to(gy, y));
      return;
    }
    case Op::scale: {
      Tensor d = g;
      for (double& v : d.raw()) v *= n.scalar;
      accumulate(n.lhs, d);
      return;
    }
    case Op::matmul: {
      const std::size_t lhs = n.lhs, rhs = n.rhs;
      if (nodes_[lhs].needs_grad) {
        accumulate(lhs, cki::matmul(g, transpose(nodes_[rhs].value)));
      }
      if (nodes_[rhs].needs_grad) {
        accumulate(rhs, cki::matmul(transpose(nodes_[lhs].value), nodes_[id].adjoint));
      }
      return;
    }
    case Op::reduce: {
      const Tensor& x = nodes_[n.lhs].value;
      double v = g[0];
      if (static_cast<Reduction>(n.sub) == Reduction::mean) v /= static_cast<double>(x.size());
      accumulate(n.lhs, Tensor(x.shape(), v));
      return;
    }
    case Op::add_row: {
      const std::size_t rows = g.rows(), cols = g.cols();
      Tensor grow = Tensor::matrix(1, cols);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) grow[j] += g.at(i, j);
      const std::size_t lhs = n.lhs, rhs = n.rhs;
      accumulate(lhs, g);
      accumulate(rhs, grow);
      return;
    }
    case Op::reshape:
      accumulate(n.lhs, g.reshaped(nodes_[n.lhs].value.shape()));
      return;
    case Op::gather_rows: {
      const Tensor& x = nodes_[n.lhs].value;
      const std::size_t d = x.cols();
      Tensor gx(x.shape());
      for (std::size_t i = 0; i < n.index.size(); ++i)
        for (std::size_t p = 0; p < d; ++p) gx.at(n.index[i], p) += g.at(i, p);
      accumulate(n.lhs, gx);
      return;
    }
    case Op::group_dot: {
      const Tensor& x = nodes_[n.lhs].value;
      const Tensor& y = nodes_[n.rhs].value;
      const std::size_t group = static_cast<std::size_t>(n.scalar);
      const std::size_t batch = x.rows(), d = x.cols();
      Tensor gx(x.shape()), gy(y.shape());
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t j = 0; j < group; ++j) {
          const double gij = g.at(i, j);
          const std::size_t row = i * group + j;
          for (std::size_t p = 0; p < d; ++p) {
            gx.at(i, p) += gij * y.at(row, p);
            gy.at(row, p) += gij * x.at(i, p);
          }
        }
      }
      const std::size_t lhs = n.lhs, rhs = n.rhs;
      accumulate(lhs, gx);
      accumulate(rhs, gy);
      return;
    }
    case Op::xent: {
      Tensor d = n.cache;
      const std::size_t batch = d.rows();
      const double scale = g[0] / static_cast<double>(batch);
      for (std::size_t i = 0; i < batch; ++i) {
        d.at(i, static_cast<std::size_t>(n.labels[i])) -= 1.0;
        for (std::size_t j = 0; j < d.cols(); ++j) d.at(i, j) *= scale;
      }
      accumulate(n.lhs, d);
      return;
    }
    case Op::straight_through:
      accumulate(n.lhs, g);
      return;
  }
}

void Graph::reset() {
  for (Node& n : nodes_) n.adjoint = Tensor();
  backward_done_ = false;
}

Tensor Graph::grad(Var v) const {
  check_owner(v);
  const Node& n = nodes_[v.id_];
  if (n.adjoint.empty()) return Tensor(n.value.shape());
  return n.adjoint;
}

Var operator+(Var a, Var b) { return a.graph().binary(Binary::add, a, b); }
Var operator-(Var a, Var b) { return a.graph().binary(Binary::sub, a, b); }
Var operator*(Var a, Var b) { return a.graph().binary(Binary::mul, a, b); }
Var operator/(Var a, Var b) { return a.graph().binary(Binary::div, a, b); }
Var operator-(Var a) { return a.graph().unary(Unary::neg, a); }

double grad_check(const GraphFunction& f, const Tensor& x, double eps) {
  Tensor analytic;
  {
    Graph g;
    Var in = g.leaf(x);
    Var out = f(g, in);
    g.backward(out);
    analytic = g.grad(in);
  }
  auto eval = [&](const Tensor& at) {
    Graph g;
    const double v = f(g, g.constant(at)).value()[0];
    if (!std::isfinite(v)) throw NumericError("grad_check: non-finite evaluation");
    return v;
  };
  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = eval(probe);
    probe[i] = x[i] - eps;
    const double down = eval(probe);
    probe[i] = x[i];
    const double numeric = (up - down) / (2.0 * eps);
    worst = std::max(worst, std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace cki
