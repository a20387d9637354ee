// SPDX-License-Identifier: Apache-2.0
//
// evcsi: eigenvector CSI feedback with a Transformer autoencoder
// Copyright (C) 2026 The evcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "evcsi/ndiff.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <unordered_set>

#include <Eigen/Core>

#include "evcsi/errors.hpp"

namespace evcsi::ndiff {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

using NodePtr = std::shared_ptr<Node>;

thread_local bool g_no_grad = false;

constexpr std::size_t kLazyDim = 32;

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw ContractError(std::string(op) + ": incompatible shapes " + shape_str(a) + " and " +
                      shape_str(b));
}

void check_finite(std::span<const double> v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(op) + ": non-finite result");
  }
}

// Output node; links parents only when one of them needs a gradient.
NodePtr make_node(Shape shape, Buffer value,
                  std::initializer_list<const DiffTensor*> inputs, const char* op) {
  check_finite(value, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  for (const DiffTensor* in : inputs) {
    if (in->requires_grad() && !g_no_grad) node->requires_grad = true;
  }
  if (node->requires_grad) {
    for (const DiffTensor* in : inputs) node->parents.push_back(in->node_ptr());
  }
  return node;
}

// Accumulation target for parent i, or nullptr if it takes no gradient.
double* grad_of(Node& self, std::size_t i) {
  Node& p = *self.parents[i];
  return p.requires_grad ? p.grad.data() : nullptr;
}

enum class Broadcast { kSame, kSuffix, kLastOne };

Broadcast classify(const Shape& a, const Shape& b, const char* op) {
  if (a == b) return Broadcast::kSame;
  if (b.size() <= a.size() && std::equal(b.rbegin(), b.rend(), a.rbegin())) {
    return Broadcast::kSuffix;
  }
  if (a.size() == b.size() && !a.empty() && b.back() == 1 &&
      std::equal(a.begin(), a.end() - 1, b.begin())) {
    return Broadcast::kLastOne;
  }
  shape_error(op, a, b);
}

struct BroadcastIndex {
  Broadcast mode;
  std::size_t nb;    // size of b
  std::size_t last;  // size of a's last axis
  std::size_t operator()(std::size_t i) const {
    switch (mode) {
      case Broadcast::kSame: return i;
      case Broadcast::kSuffix: return i % nb;
      case Broadcast::kLastOne: return i / last;
    }
    return i;
  }
};

template <typename Fwd, typename Bwd>
DiffTensor binary(const DiffTensor& a, const DiffTensor& b, const char* op, Fwd fwd, Bwd bwd) {
  const BroadcastIndex bi{classify(a.shape(), b.shape(), op), b.size(),
                          a.rank() == 0 ? 1 : a.shape().back()};
  const auto av = a.values();
  const auto bv = b.values();
  Buffer out(av.size());
  if (bi.mode == Broadcast::kSame) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[bi(i)]);
  }
  NodePtr node = make_node(a.shape(), std::move(out), {&a, &b}, op);
  if (node->requires_grad) {
    node->backward = [bi, bwd](Node& self) {
      const auto& x = self.parents[0]->value;
      const auto& y = self.parents[1]->value;
      double* gx = grad_of(self, 0);
      double* gy = grad_of(self, 1);
      auto run = [&](auto index) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
          const std::size_t j = index(i);
          double dx = 0.0;
          double dy = 0.0;
          bwd(x[i], y[j], self.value[i], self.grad[i], dx, dy);
          if (gx) gx[i] += dx;
          if (gy) gy[j] += dy;
        }
      };
      if (bi.mode == Broadcast::kSame) {
        run([](std::size_t i) { return i; });
      } else {
        run(bi);
      }
    };
  }
  return DiffTensor(std::move(node));
}

template <typename Fwd, typename Deriv>
DiffTensor elementwise(const DiffTensor& x, const char* op, Fwd fwd, Deriv deriv) {
  const auto xv = x.values();
  Buffer out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xv[i]);
  NodePtr node = make_node(x.shape(), std::move(out), {&x}, op);
  if (node->requires_grad) {
    node->backward = [deriv](Node& self) {
      double* gx = grad_of(self, 0);
      if (!gx) return;
      const auto& xin = self.parents[0]->value;
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        gx[i] += self.grad[i] * deriv(xin[i], self.value[i]);
      }
    };
  }
  return DiffTensor(std::move(node));
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> s(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) s[i - 1] = s[i] * shape[i];
  return s;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

DiffTensor DiffTensor::constant(Shape shape, std::span<const double> values) {
  if (numel(shape) != values.size()) {
    throw ContractError("DiffTensor: " + std::to_string(values.size()) +
                        " values do not fill shape " + shape_str(shape));
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value.assign(values.begin(), values.end());
  check_finite(node->value, "constant");
  return DiffTensor(std::move(node));
}

DiffTensor DiffTensor::constant(Shape shape, double fill) {
  const std::size_t n = numel(shape);
  return constant(std::move(shape), std::vector<double>(n, fill));
}

DiffTensor DiffTensor::parameter(Shape shape, std::span<const double> values) {
  DiffTensor t = constant(std::move(shape), values);
  t.node_->requires_grad = true;
  return t;
}

NoGradGuard::NoGradGuard() : previous_(g_no_grad) { g_no_grad = true; }
NoGradGuard::~NoGradGuard() { g_no_grad = previous_; }

void DiffTensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double DiffTensor::item() const {
  if (size() != 1) throw ContractError("item: tensor of shape " + shape_str(shape()) + " is not a scalar");
  return node_->value[0];
}

DiffTensor DiffTensor::detach() const { return constant(shape(), node_->value); }

DiffTensor DiffTensor::clone() const {
  DiffTensor t = constant(shape(), node_->value);
  t.node_->requires_grad = node_->requires_grad;
  t.node_->grad = node_->grad;
  return t;
}

void backward(const DiffTensor& loss) {
  if (loss.size() != 1) throw ContractError("backward: loss must be a scalar");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  seen.insert(loss.node());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  for (Node* n : order) {
    const bool leaf = n->parents.empty();
    if (n->grad.size() != n->value.size()) {
      n->grad.assign(n->value.size(), 0.0);
    } else if (!leaf) {
      std::fill(n->grad.begin(), n->grad.end(), 0.0);
    }
  }
  Node* root = loss.node();
  if (root->parents.empty()) {
    root->grad[0] += 1.0;
    return;
  }
  root->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

DiffTensor matmul(const DiffTensor& a, const DiffTensor& b) {
  if (a.rank() < 1 || b.rank() < 2) shape_error("matmul", a.shape(), b.shape());
  if (b.rank() == 2) {
    const std::size_t k = b.dim(0);
    const std::size_t n = b.dim(1);
    if (a.shape().back() != k) shape_error("matmul", a.shape(), b.shape());
    const std::size_t rows = a.size() / k;
    Shape out_shape = a.shape();
    out_shape.back() = n;
    Buffer out(rows * n);
    MutMap(out.data(), rows, n).noalias() =
        ConstMap(a.values().data(), rows, k) * ConstMap(b.values().data(), k, n);
    NodePtr node = make_node(std::move(out_shape), std::move(out), {&a, &b}, "matmul");
    if (node->requires_grad) {
      node->backward = [rows, k, n](Node& self) {
        ConstMap dc(self.grad.data(), rows, n);
        if (double* ga = grad_of(self, 0)) {
          MutMap(ga, rows, k).noalias() += dc * ConstMap(self.parents[1]->value.data(), k, n).transpose();
        }
        if (double* gb = grad_of(self, 1)) {
          MutMap(gb, k, n).noalias() += ConstMap(self.parents[0]->value.data(), rows, k).transpose() * dc;
        }
      };
    }
    return DiffTensor(std::move(node));
  }

  if (a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin()) ||
      a.shape().back() != b.dim(b.rank() - 2)) {
    shape_error("matmul", a.shape(), b.shape());
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.shape().back();
  const std::size_t n = b.shape().back();
  const std::size_t batch = a.size() / (m * k);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Buffer out(batch * m * n);
  const double* av = a.values().data();
  const double* bv = b.values().data();
  // Per-head attention products are tiny; packed GEMM costs more than it saves there.
  const bool lazy = m <= kLazyDim && n <= kLazyDim && k <= kLazyDim;
  for (std::size_t i = 0; i < batch; ++i) {
    ConstMap x(av + i * m * k, m, k);
    ConstMap y(bv + i * k * n, k, n);
    MutMap o(out.data() + i * m * n, m, n);
    if (lazy) {
      o.noalias() = x.lazyProduct(y);
    } else {
      o.noalias() = x * y;
    }
  }
  NodePtr node = make_node(std::move(out_shape), std::move(out), {&a, &b}, "matmul");
  if (node->requires_grad) {
    node->backward = [batch, m, k, n](Node& self) {
      double* ga = grad_of(self, 0);
      double* gb = grad_of(self, 1);
      const double* av = self.parents[0]->value.data();
      const double* bv = self.parents[1]->value.data();
      const bool lazy = m <= kLazyDim && n <= kLazyDim && k <= kLazyDim;
      for (std::size_t i = 0; i < batch; ++i) {
        ConstMap dc(self.grad.data() + i * m * n, m, n);
        ConstMap x(av + i * m * k, m, k);
        ConstMap y(bv + i * k * n, k, n);
        if (ga) {
          MutMap g(ga + i * m * k, m, k);
          if (lazy) {
            g.noalias() += dc.lazyProduct(y.transpose());
          } else {
            g.noalias() += dc * y.transpose();
          }
        }
        if (gb) {
          MutMap g(gb + i * k * n, k, n);
          if (lazy) {
            g.noalias() += x.transpose().lazyProduct(dc);
          } else {
            g.noalias() += x.transpose() * dc;
          }
        }
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor add(const DiffTensor& a, const DiffTensor& b) {
  return binary(
      a, b, "add", [](double x, double y) { return x + y; },
      [](double, double, double, double g, double& dx, double& dy) {
        dx = g;
        dy = g;
      });
}

DiffTensor sub(const DiffTensor& a, const DiffTensor& b) {
  return binary(
      a, b, "sub", [](double x, double y) { return x - y; },
      [](double, double, double, double g, double& dx, double& dy) {
        dx = g;
        dy = -g;
      });
}

DiffTensor mul(const DiffTensor& a, const DiffTensor& b) {
  return binary(
      a, b, "mul", [](double x, double y) { return x * y; },
      [](double x, double y, double, double g, double& dx, double& dy) {
        dx = g * y;
        dy = g * x;
      });
}

DiffTensor div(const DiffTensor& a, const DiffTensor& b) {
  return binary(
      a, b, "div", [](double x, double y) { return x / y; },
      [](double, double y, double out, double g, double& dx, double& dy) {
        dx = g / y;
        dy = -g * out / y;
      });
}

DiffTensor scale(const DiffTensor& x, double c) {
  return elementwise(
      x, "scale", [c](double v) { return c * v; }, [c](double, double) { return c; });
}

DiffTensor add_scalar(const DiffTensor& x, double c) {
  return elementwise(
      x, "add_scalar", [c](double v) { return v + c; }, [](double, double) { return 1.0; });
}

DiffTensor square(const DiffTensor& x) {
  return elementwise(
      x, "square", [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

DiffTensor sqrt(const DiffTensor& x) {
  for (double v : x.values()) {
    if (v < 0.0) throw NumericError("sqrt: negative input");
  }
  return elementwise(
      x, "sqrt", [](double v) { return std::sqrt(v); },
      [](double, double y) { return y > 0.0 ? 0.5 / y : 0.0; });
}

DiffTensor reshape(const DiffTensor& x, Shape shape) {
  if (numel(shape) != x.size()) shape_error("reshape", x.shape(), shape);
  NodePtr node = make_node(std::move(shape), Buffer(x.values().begin(), x.values().end()),
                           {&x}, "reshape");
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      if (double* gx = grad_of(self, 0)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) gx[i] += self.grad[i];
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor flatten(const DiffTensor& x, std::size_t start_axis) {
  if (start_axis >= x.rank()) {
    throw ContractError("flatten: axis " + std::to_string(start_axis) + " out of range for " +
                        shape_str(x.shape()));
  }
  Shape shape(x.shape().begin(), x.shape().begin() + static_cast<std::ptrdiff_t>(start_axis));
  shape.push_back(numel(Shape(x.shape().begin() + static_cast<std::ptrdiff_t>(start_axis), x.shape().end())));
  return reshape(x, std::move(shape));
}

DiffTensor permute(const DiffTensor& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.rank();
  std::vector<bool> used(r, false);
  if (axes.size() != r) throw ContractError("permute: axis list length mismatch");
  for (std::size_t a : axes) {
    if (a >= r || used[a]) throw ContractError("permute: invalid axis list");
    used[a] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.dim(axes[i]);
  const auto in_strides = strides_of(x.shape());
  // src_index[i] = flat input offset of output element i.
  std::vector<std::size_t> src(x.size());
  std::vector<std::size_t> counter(r, 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    src[i] = off;
    for (std::size_t d = r; d-- > 0;) {
      const std::size_t stride = in_strides[axes[d]];
      if (++counter[d] < out_shape[d]) {
        off += stride;
        break;
      }
      off -= (counter[d] - 1) * stride;
      counter[d] = 0;
    }
  }
  const auto xv = x.values();
  Buffer out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[src[i]];
  NodePtr node = make_node(std::move(out_shape), std::move(out), {&x}, "permute");
  if (node->requires_grad) {
    node->backward = [src = std::move(src)](Node& self) {
      if (double* gx = grad_of(self, 0)) {
        for (std::size_t i = 0; i < src.size(); ++i) gx[src[i]] += self.grad[i];
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor transpose(const DiffTensor& x) {
  if (x.rank() < 2) throw ContractError("transpose: rank must be >= 2");
  std::vector<std::size_t> axes(x.rank());
  std::iota(axes.begin(), axes.end(), std::size_t{0});
  std::swap(axes[x.rank() - 1], axes[x.rank() - 2]);
  return permute(x, axes);
}

DiffTensor concat(const std::vector<DiffTensor>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& ref = parts.front().shape();
  if (axis >= ref.size()) throw ContractError("concat: axis out of range");
  Shape out_shape = ref;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    if (p.rank() != ref.size()) shape_error("concat", ref, p.shape());
    for (std::size_t d = 0; d < ref.size(); ++d) {
      if (d != axis && p.dim(d) != ref[d]) shape_error("concat", ref, p.shape());
    }
    out_shape[axis] += p.dim(axis);
  }
  const std::size_t outer = numel(Shape(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t inner = numel(Shape(ref.begin() + static_cast<std::ptrdiff_t>(axis) + 1, ref.end()));
  const std::size_t out_row = out_shape[axis] * inner;
  Buffer out(numel(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t chunk = p.dim(axis) * inner;
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(p.values().begin() + static_cast<std::ptrdiff_t>(o * chunk), chunk,
                  out.begin() + static_cast<std::ptrdiff_t>(o * out_row + off));
    }
    off += chunk;
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(out_shape);
  node->value = std::move(out);
  check_finite(node->value, "concat");
  for (const auto& p : parts) node->requires_grad = node->requires_grad || (p.requires_grad() && !g_no_grad);
  if (node->requires_grad) {
    for (const auto& p : parts) node->parents.push_back(p.node_ptr());
    node->backward = [offsets, outer, out_row](Node& self) {
      for (std::size_t i = 0; i < self.parents.size(); ++i) {
        Node& p = *self.parents[i];
        if (!p.requires_grad) continue;
        const std::size_t chunk = p.value.size() / outer;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t j = 0; j < chunk; ++j) {
            p.grad[o * chunk + j] += self.grad[o * out_row + offsets[i] + j];
          }
        }
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor slice(const DiffTensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  if (axis >= x.rank() || start + length > x.dim(axis) || length == 0) {
    throw ContractError("slice: range out of bounds for " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  const std::size_t outer = numel(Shape(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(axis)));
  const std::size_t inner = numel(Shape(s.begin() + static_cast<std::ptrdiff_t>(axis) + 1, s.end()));
  const std::size_t in_row = s[axis] * inner;
  const std::size_t out_row = length * inner;
  Buffer out(outer * out_row);
  const auto xv = x.values();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>(o * in_row + start * inner), out_row,
                out.begin() + static_cast<std::ptrdiff_t>(o * out_row));
  }
  Shape out_shape = s;
  out_shape[axis] = length;
  NodePtr node = make_node(std::move(out_shape), std::move(out), {&x}, "slice");
  if (node->requires_grad) {
    node->backward = [outer, in_row, out_row, first = start * inner](Node& self) {
      if (double* gx = grad_of(self, 0)) {
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t j = 0; j < out_row; ++j) gx[o * in_row + first + j] += self.grad[o * out_row + j];
        }
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor softmax(const DiffTensor& x) {
  if (x.rank() < 1) throw ContractError("softmax: rank must be >= 1");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  const auto xv = x.values();
  Buffer out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double* o = out.data() + r * n;
    const double mx = *std::max_element(in, in + n);
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      z += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= z;
  }
  NodePtr node = make_node(x.shape(), std::move(out), {&x}, "softmax");
  if (node->requires_grad) {
    node->backward = [rows, n](Node& self) {
      double* gx = grad_of(self, 0);
      if (!gx) return;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* y = self.value.data() + r * n;
        const double* g = self.grad.data() + r * n;
        double dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += g[j] * y[j];
        for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += y[j] * (g[j] - dot);
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor sum(const DiffTensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  NodePtr node = make_node(Shape{}, Buffer{acc}, {&x}, "sum");
  if (node->requires_grad) {
    node->backward = [](Node& self) {
      if (double* gx = grad_of(self, 0)) {
        const std::size_t n = self.parents[0]->value.size();
        for (std::size_t i = 0; i < n; ++i) gx[i] += self.grad[0];
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor mean(const DiffTensor& x) {
  return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

DiffTensor sum_last(const DiffTensor& x) {
  if (x.rank() < 1) throw ContractError("sum_last: rank must be >= 1");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  const auto xv = x.values();
  Buffer out(rows, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t j = 0; j < n; ++j) out[r] += xv[r * n + j];
  }
  Shape out_shape = x.shape();
  out_shape.back() = 1;
  NodePtr node = make_node(std::move(out_shape), std::move(out), {&x}, "sum_last");
  if (node->requires_grad) {
    node->backward = [rows, n](Node& self) {
      if (double* gx = grad_of(self, 0)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < n; ++j) gx[r * n + j] += self.grad[r];
        }
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor gelu(const DiffTensor& x) {
  constexpr double c = 0.7978845608028654;  // sqrt(2 / pi)
  constexpr double a = 0.044715;
  return elementwise(
      x, "gelu",
      [](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + a * v * v * v))); },
      [](double v, double) {
        const double t = std::tanh(c * (v + a * v * v * v));
        return 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * c * (1.0 + 3.0 * a * v * v);
      });
}

DiffTensor sigmoid(const DiffTensor& x) {
  return elementwise(
      x, "sigmoid", [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
      [](double, double y) { return y * (1.0 - y); });
}

DiffTensor layer_norm(const DiffTensor& x, const DiffTensor& gain, const DiffTensor& bias,
                      double epsilon) {
  if (x.rank() < 1) throw ContractError("layer_norm: rank must be >= 1");
  const std::size_t n = x.shape().back();
  if (gain.shape() != Shape{n} || bias.shape() != Shape{n}) {
    shape_error("layer_norm", x.shape(), gain.shape());
  }
  const std::size_t rows = x.size() / n;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  Buffer out(x.size());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * n;
    double mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += in[j];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t j = 0; j < n; ++j) var += (in[j] - mu) * (in[j] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < n; ++j) {
      xhat[r * n + j] = (in[j] - mu) * inv_std[r];
      out[r * n + j] = xhat[r * n + j] * gv[j] + bv[j];
    }
  }
  NodePtr node = make_node(x.shape(), std::move(out), {&x, &gain, &bias}, "layer_norm");
  if (node->requires_grad) {
    node->backward = [rows, n, xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& self) {
      double* gx = grad_of(self, 0);
      double* gg = grad_of(self, 1);
      double* gb = grad_of(self, 2);
      const auto& g = self.parents[1]->value;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dy = self.grad.data() + r * n;
        const double* xh = xhat.data() + r * n;
        double mean_d = 0.0;
        double mean_dx = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          const double d = dy[j] * g[j];
          mean_d += d;
          mean_dx += d * xh[j];
          if (gg) gg[j] += dy[j] * xh[j];
          if (gb) gb[j] += dy[j];
        }
        if (!gx) continue;
        mean_d /= static_cast<double>(n);
        mean_dx /= static_cast<double>(n);
        for (std::size_t j = 0; j < n; ++j) {
          gx[r * n + j] += inv_std[r] * (dy[j] * g[j] - mean_d - xh[j] * mean_dx);
        }
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor linear(const DiffTensor& x, const DiffTensor& w, const DiffTensor& b) {
  if (x.rank() < 1 || w.rank() != 2 || b.rank() != 1 || x.shape().back() != w.dim(0) ||
      b.dim(0) != w.dim(1)) {
    throw ContractError("linear: incompatible shapes " + shape_str(x.shape()) + ", " + shape_str(w.shape()) +
                        ", " + shape_str(b.shape()));
  }
  const std::size_t k = w.dim(0);
  const std::size_t n = w.dim(1);
  const std::size_t rows = x.size() / k;
  using RowVec = Eigen::Map<const Eigen::RowVectorXd>;
  Shape out_shape = x.shape();
  out_shape.back() = n;
  Buffer out(rows * n);
  MutMap o(out.data(), rows, n);
  o.noalias() = ConstMap(x.values().data(), rows, k) * ConstMap(w.values().data(), k, n);
  o.rowwise() += RowVec(b.values().data(), n);
  NodePtr node = make_node(std::move(out_shape), std::move(out), {&x, &w, &b}, "linear");
  if (node->requires_grad) {
    node->backward = [rows, k, n](Node& self) {
      ConstMap dc(self.grad.data(), rows, n);
      if (double* gx = grad_of(self, 0)) {
        MutMap(gx, rows, k).noalias() += dc * ConstMap(self.parents[1]->value.data(), k, n).transpose();
      }
      if (double* gw = grad_of(self, 1)) {
        MutMap(gw, k, n).noalias() += ConstMap(self.parents[0]->value.data(), rows, k).transpose() * dc;
      }
      if (double* gb = grad_of(self, 2)) {
        Eigen::Map<Eigen::RowVectorXd>(gb, n) += dc.colwise().sum();
      }
    };
  }
  return DiffTensor(std::move(node));
}

DiffTensor multi_head_attention(const DiffTensor& x, const AttentionWeights& w, int n_head) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ContractError("multi_head_attention: input must be [S, E] or [B, S, E], got " +
                        shape_str(x.shape()));
  }
  const std::size_t e = x.shape().back();
  if (n_head <= 0 || e % static_cast<std::size_t>(n_head) != 0) {
    throw ConfigError("multi_head_attention: embedding width " + std::to_string(e) +
                      " not divisible by " + std::to_string(n_head) + " heads");
  }
  const std::size_t h = static_cast<std::size_t>(n_head);
  const std::size_t d = e / h;
  const std::size_t s = x.dim(x.rank() - 2);
  const std::size_t b = x.rank() == 3 ? x.dim(0) : 1;

  auto heads = [&](const DiffTensor& t) {
    return permute(reshape(t, {b, s, h, d}), {0, 2, 1, 3});
  };
  const DiffTensor q = heads(linear(x, w.wq, w.bq));
  const DiffTensor k = heads(linear(x, w.wk, w.bk));
  const DiffTensor v = heads(linear(x, w.wv, w.bv));
  const DiffTensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d)));
  const DiffTensor ctx = matmul(softmax(scores), v);  // [b, h, s, d]
  const DiffTensor merged = reshape(permute(ctx, {0, 2, 1, 3}), x.shape());
  return linear(merged, w.wo, w.bo);
}

DiffTensor make_unary(const DiffTensor& x, Shape shape, Buffer values,
                      std::function<void(Node&)> backward_rule, const char* op_name) {
  NodePtr node = make_node(std::move(shape), std::move(values), {&x}, op_name);
  if (node->requires_grad) node->backward = std::move(backward_rule);
  return DiffTensor(std::move(node));
}

AdamState AdamState::for_params(std::span<const DiffTensor> params) {
  AdamState s;
  for (const auto& p : params) {
    s.first_moment.emplace_back(p.size(), 0.0);
    s.second_moment.emplace_back(p.size(), 0.0);
  }
  return s;
}

void adam_step(std::span<DiffTensor> params, AdamState& state, double lr) {
  if (!(lr > 0.0)) throw ContractError("adam_step: learning rate must be > 0");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    throw ContractError("adam_step: optimizer state does not match parameter list");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.first_moment[i].size() != params[i].size() ||
        state.second_moment[i].size() != params[i].size()) {
      throw ContractError("adam_step: accumulator shape mismatch for parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    DiffTensor& p = params[i];
    if (!p.has_grad()) continue;
    auto values = p.mutable_values();
    const auto grad = p.grad();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      values[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
    check_finite(p.node()->value, "adam_step");
  }
}

GradCheckResult grad_check(const ScalarFn& fn, const std::vector<DiffTensor>& point, double step,
                           double floor) {
  return grad_check(fn, fn, point, step, floor);
}

GradCheckResult grad_check(const ScalarFn& fn, const ScalarFn& oracle_fn,
                           const std::vector<DiffTensor>& point, double step, double floor) {
  std::vector<DiffTensor> inputs;
  for (const auto& p : point) {
    inputs.push_back(DiffTensor::parameter(p.shape(), p.values()));
  }
  backward(fn(inputs));

  GradCheckResult result;
  result.per_input.assign(inputs.size(), 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const std::vector<double> analytic(inputs[i].grad().begin(), inputs[i].grad().end());
    for (std::size_t j = 0; j < inputs[i].size(); ++j) {
      auto vals = inputs[i].mutable_values();
      const double orig = vals[j];
      vals[j] = orig + step;
      const double up = oracle_fn(inputs).item();
      vals[j] = orig - step;
      const double down = oracle_fn(inputs).item();
      vals[j] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic.empty() ? 0.0 : analytic[j];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      result.per_input[i] = std::max(result.per_input[i], std::abs(a - numeric) / denom);
    }
    result.max_rel_error = std::max(result.max_rel_error, result.per_input[i]);
  }
  return result;
}

}  // namespace evcsi::ndiff
