/*
 *  Copyright 2026 The placelab Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace placelab {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

template <typename T>
class Tensor;

namespace detail {

template <typename T>
struct Node;

/// Backward rule of a recorded operation: reads the gradient of the output
/// and accumulates into the gradients of its inputs. Inputs that do not
/// require a gradient receive an empty span.
template <typename T>
using BackwardFn =
    std::function<void(std::span<const T> grad_out, std::span<const std::span<T>> grad_in)>;

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn<T> backward;
};

}  // namespace detail

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled();

/// Dense row-major tensor with reverse-mode automatic differentiation.
///
/// A Tensor is a shared handle: copies refer to the same storage and graph
/// node. Gradients accumulate into leaves across backward() calls until
/// zero_grad() is called.
template <typename T>
class Tensor {
 public:
  Tensor();

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  /// Records an operation result. The backward rule is kept only when graph
  /// recording is enabled and at least one input requires a gradient.
  static Tensor from_op(std::string op, Shape shape, std::vector<T> values,
                        std::initializer_list<Tensor> inputs, detail::BackwardFn<T> backward);

  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value);

  bool has_grad() const { return !node_->grad.empty(); }
  /// Gradient buffer; empty until a backward pass reaches this tensor.
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad();
  void zero_grad();

  const std::string& op() const { return node_->op; }
  bool is_leaf() const { return !node_->backward; }

  /// Populates gradients of every reachable tensor that requires one.
  /// Throws ContractError unless this tensor holds exactly one element.
  void backward() const;

  /// Same storage values, new leaf without graph history.
  Tensor detach() const;

  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node<T>> node) : node_(std::move(node)) {}

  std::shared_ptr<detail::Node<T>> node_;
};

// ---------------------------------------------------------------------------
// Differentiable primitives.

/// Elementwise product. `b` either matches `a` exactly or, for rank-4 `a`
/// of shape N x C x H x W, has shape N x C (one factor per sample and
/// channel, broadcast over H x W).
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> sum(const Tensor<T>& a);

/// Matrix product of rank-2 tensors: (M x K) * (K x N) -> (M x N).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// Adds bias[c] along axis 1 of a rank-2 (N x C) or rank-4 (N x C x H x W)
/// tensor.
template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

}  // namespace placelab
