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

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

// Minimal reverse-mode differentiation over dense double tensors. A
// DiffTensor is a shared handle to a graph node; ops record their parents
// only when some input requires a gradient, so inference builds no graph.
namespace evcsi::ndiff {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Cache-line aligned storage. Eigen's vectorized reductions peel leading
// elements according to the address, so unaligned buffers would make sums
// depend on where the allocator placed them.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

struct Node {
  Shape shape;
  Buffer value;
  Buffer grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
};

class DiffTensor {
 public:
  DiffTensor() = default;
  explicit DiffTensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static DiffTensor constant(Shape shape, std::span<const double> values);
  static DiffTensor constant(Shape shape, const std::vector<double>& values) {
    return constant(std::move(shape), std::span<const double>(values));
  }
  static DiffTensor constant(Shape shape, double fill = 0.0);
  // Leaf that accumulates gradients across backward passes.
  static DiffTensor parameter(Shape shape, std::span<const double> values);
  static DiffTensor parameter(Shape shape, const std::vector<double>& values) {
    return parameter(std::move(shape), std::span<const double>(values));
  }

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t size() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }

  std::span<const double> values() const { return node_->value; }
  // Direct access for optimizers and weight surgery on leaves.
  std::span<double> mutable_values() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad();

  double item() const;
  double operator[](std::size_t i) const { return node_->value[i]; }

  // Fresh constant holding a copy of the values.
  DiffTensor detach() const;
  // Deep copy preserving the requires_grad flag (leaf only, no history).
  DiffTensor clone() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// While alive, ops on this thread record no graph even for parameter inputs.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Runs reverse accumulation from a scalar. Interior gradients are recomputed
// from scratch on every call; leaf gradients accumulate.
void backward(const DiffTensor& loss);

// --- primitives ----------------------------------------------------------

// a[..., k] x b[k, n] -> [..., n] when b has rank 2; otherwise a batched
// product over identical leading dimensions: [..., m, k] x [..., k, n].
DiffTensor matmul(const DiffTensor& a, const DiffTensor& b);

// Elementwise binary ops. The second operand may equal the first's shape,
// match a suffix of it (e.g. a bias row), or equal it with a last axis of 1.
DiffTensor add(const DiffTensor& a, const DiffTensor& b);
DiffTensor sub(const DiffTensor& a, const DiffTensor& b);
DiffTensor mul(const DiffTensor& a, const DiffTensor& b);
DiffTensor div(const DiffTensor& a, const DiffTensor& b);

DiffTensor scale(const DiffTensor& x, double c);
DiffTensor add_scalar(const DiffTensor& x, double c);
DiffTensor square(const DiffTensor& x);
// Gradient at exactly zero is taken as zero.
DiffTensor sqrt(const DiffTensor& x);

DiffTensor reshape(const DiffTensor& x, Shape shape);
// Collapses every axis from `start_axis` on into one.
DiffTensor flatten(const DiffTensor& x, std::size_t start_axis = 1);
DiffTensor permute(const DiffTensor& x, const std::vector<std::size_t>& axes);
// Swaps the last two axes.
DiffTensor transpose(const DiffTensor& x);
DiffTensor concat(const std::vector<DiffTensor>& parts, std::size_t axis);
DiffTensor slice(const DiffTensor& x, std::size_t axis, std::size_t start, std::size_t length);

DiffTensor softmax(const DiffTensor& x);  // over the last axis

DiffTensor sum(const DiffTensor& x);   // -> scalar
DiffTensor mean(const DiffTensor& x);  // -> scalar
DiffTensor sum_last(const DiffTensor& x);  // keeps a trailing axis of 1

// tanh approximation 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
DiffTensor gelu(const DiffTensor& x);
DiffTensor sigmoid(const DiffTensor& x);

inline constexpr double kLayerNormEpsilon = 1e-5;
// Normalizes over the last axis, then applies gain and bias.
DiffTensor layer_norm(const DiffTensor& x, const DiffTensor& gain, const DiffTensor& bias,
                      double epsilon = kLayerNormEpsilon);

// x w + b with w [in, out] and b [out].
DiffTensor linear(const DiffTensor& x, const DiffTensor& w, const DiffTensor& b);

struct AttentionWeights {
  DiffTensor wq, bq, wk, bk, wv, bv, wo, bo;
};

// Standard multi-head self-attention over x [..., S, E] (rank 2 or 3):
// softmax(Q K^T / sqrt(E / n_head)) V per head, heads concatenated, then the
// output projection.
DiffTensor multi_head_attention(const DiffTensor& x, const AttentionWeights& w, int n_head);

// Builds a node with a caller-supplied backward rule; used by ops that live
// outside this module (the straight-through quantizer).
DiffTensor make_unary(const DiffTensor& x, Shape shape, Buffer values,
                      std::function<void(Node&)> backward_rule, const char* op_name);

// --- optimizer -----------------------------------------------------------

struct AdamState {
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  static AdamState for_params(std::span<const DiffTensor> params);
};

// One bias-corrected Adam update using each parameter's accumulated grad.
void adam_step(std::span<DiffTensor> params, AdamState& state, double lr);

// --- verification --------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::vector<double> per_input;  // worst error per input
};

using ScalarFn = std::function<DiffTensor(const std::vector<DiffTensor>&)>;

// Entries with |grad| below the floor on both sides are compared absolutely.
inline constexpr double kGradCheckFloor = 1e-7;

// Compares reverse-mode gradients of fn at `point` with central differences.
GradCheckResult grad_check(const ScalarFn& fn, const std::vector<DiffTensor>& point,
                           double step = 1e-4, double floor = kGradCheckFloor);

// Same, but the finite differences are taken on `oracle_fn`, a substitute
// that must agree with `fn` in value and differentiable structure (used to
// check straight-through gradients against a smooth replacement).
GradCheckResult grad_check(const ScalarFn& fn, const ScalarFn& oracle_fn,
                           const std::vector<DiffTensor>& point, double step = 1e-4,
                           double floor = kGradCheckFloor);

}  // namespace evcsi::ndiff
