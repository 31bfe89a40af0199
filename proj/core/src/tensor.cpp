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

#include "placelab/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "placelab/errors.hpp"

namespace placelab {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_mode_enabled() { return g_grad_enabled; }

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor() : node_(std::make_shared<detail::Node<T>>()) {}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T{0}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("Tensor: zero extent in shape " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("Tensor: " + std::to_string(values.size()) +
                     " values do not fill shape " + shape_str(shape));
  }
  auto node = std::make_shared<detail::Node<T>>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_op(std::string op, Shape shape, std::vector<T> values,
                             std::initializer_list<Tensor> inputs,
                             detail::BackwardFn<T> backward) {
  Tensor out = from(std::move(shape), std::move(values), false);
  out.node_->op = std::move(op);
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Tensor& t) { return t.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->backward = std::move(backward);
  out.node_->parents.reserve(inputs.size());
  for (const Tensor& t : inputs) out.node_->parents.push_back(t.node_);
  return out;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  if (axis >= rank()) {
    throw ShapeError("Tensor::dim: axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape()));
  }
  return node_->shape[axis];
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("Tensor::item: tensor is not a scalar");
  return node_->data[0];
}

template <typename T>
void Tensor<T>::set_requires_grad(bool value) {
  if (!is_leaf()) throw ContractError("set_requires_grad: only leaves may be toggled");
  node_->requires_grad = value;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (node_->grad.empty()) node_->grad.assign(node_->data.size(), T{0});
  return node_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(node_->grad.begin(), node_->grad.end(), T{0});
}

template <typename T>
void Tensor<T>::backward() const {
  if (numel() != 1) {
    throw ContractError("backward: loss must be a scalar, got shape " + shape_str(shape()));
  }
  if (!std::isfinite(static_cast<double>(node_->data[0]))) {
    throw NumericalError("backward: non-finite loss value");
  }
  if (!node_->requires_grad) return;

  using NodeT = detail::Node<T>;
  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<NodeT*> order;
  std::unordered_set<const NodeT*> visited;
  std::vector<std::pair<NodeT*, std::size_t>> stack;
  stack.emplace_back(node_.get(), 0);
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      NodeT* parent = node->parents[next++].get();
      if (parent->requires_grad && !visited.contains(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  for (NodeT* node : order) {
    if (node->grad.size() != node->data.size()) node->grad.assign(node->data.size(), T{0});
    // Interior gradients are rebuilt from scratch on every pass; leaves keep
    // accumulating.
    if (node->backward) std::fill(node->grad.begin(), node->grad.end(), T{0});
  }
  node_->grad[0] += T{1};

  std::vector<std::span<T>> grad_in;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeT* node = *it;
    if (!node->backward) continue;
    grad_in.clear();
    for (const auto& parent : node->parents) {
      grad_in.push_back(parent->requires_grad ? std::span<T>(parent->grad) : std::span<T>());
    }
    node->backward(node->grad, grad_in);
  }
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  return from(node_->shape, node_->data, false);
}

// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto av = a.data();
  const auto bv = b.data();
  if (a.shape() == b.shape()) {
    std::vector<T> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    return Tensor<T>::from_op(
        "mul", a.shape(), std::move(out), {a, b},
        [a, b](std::span<const T> g, std::span<const std::span<T>> gi) {
          const auto a_vals = a.data();
          const auto b_vals = b.data();
          if (!gi[0].empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * b_vals[i];
          }
          if (!gi[1].empty()) {
            for (std::size_t i = 0; i < g.size(); ++i) gi[1][i] += g[i] * a_vals[i];
          }
        });
  }
  if (a.rank() == 4 && b.rank() == 2 && b.dim(0) == a.dim(0) && b.dim(1) == a.dim(1)) {
    const std::size_t planes = a.dim(0) * a.dim(1);
    const std::size_t hw = a.dim(2) * a.dim(3);
    std::vector<T> out(av.size());
    for (std::size_t p = 0; p < planes; ++p) {
      const T f = bv[p];
      for (std::size_t k = 0; k < hw; ++k) out[p * hw + k] = av[p * hw + k] * f;
    }
    return Tensor<T>::from_op(
        "mul_channel", a.shape(), std::move(out), {a, b},
        [a, b, planes, hw](std::span<const T> g, std::span<const std::span<T>> gi) {
          const auto a_vals = a.data();
          const auto b_vals = b.data();
          for (std::size_t p = 0; p < planes; ++p) {
            if (!gi[0].empty()) {
              for (std::size_t k = 0; k < hw; ++k) gi[0][p * hw + k] += g[p * hw + k] * b_vals[p];
            }
            if (!gi[1].empty()) {
              T acc = 0;
              for (std::size_t k = 0; k < hw; ++k) acc += g[p * hw + k] * a_vals[p * hw + k];
              gi[1][p] += acc;
            }
          }
        });
  }
  throw ShapeError("mul: cannot combine " + shape_str(a.shape()) + " with " +
                   shape_str(b.shape()));
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor<T>::from_op("add", a.shape(), std::move(out), {a, b},
                            [](std::span<const T> g, std::span<const std::span<T>> gi) {
                              for (const auto& dst : gi) {
                                if (dst.empty()) continue;
                                for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
                              }
                            });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
  return Tensor<T>::from_op("scale", a.shape(), std::move(out), {a},
                            [factor](std::span<const T> g, std::span<const std::span<T>> gi) {
                              for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i] * factor;
                            });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  // Fixed left-to-right order keeps the result independent of threading.
  double acc = 0.0;
  for (T v : a.data()) acc += static_cast<double>(v);
  return Tensor<T>::from_op("sum", {1}, {static_cast<T>(acc)}, {a},
                            [](std::span<const T> g, std::span<const std::span<T>> gi) {
                              for (T& v : gi[0]) v += g[0];
                            });
}

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMatrix<T>> as_matrix(std::span<const T> v, std::size_t rows,
                                         std::size_t cols) {
  return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <typename T>
Eigen::Map<RowMatrix<T>> as_matrix(std::span<T> v, std::size_t rows, std::size_t cols) {
  return {v.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: incompatible operands " + shape_str(a.shape()) + " and " +
                     shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  as_matrix<T>(std::span<T>(out), m, n).noalias() =
      as_matrix<T>(a.data(), m, k) * as_matrix<T>(b.data(), k, n);
  return Tensor<T>::from_op(
      "matmul", {m, n}, std::move(out), {a, b},
      [a, b, m, k, n](std::span<const T> g, std::span<const std::span<T>> gi) {
        const auto gm = as_matrix<T>(g, m, n);
        if (!gi[0].empty()) {
          as_matrix<T>(gi[0], m, k).noalias() +=
              gm * as_matrix<T>(b.data(), k, n).transpose();
        }
        if (!gi[1].empty()) {
          as_matrix<T>(gi[1], k, n).noalias() +=
              as_matrix<T>(a.data(), m, k).transpose() * gm;
        }
      });
}

template <typename T>
Tensor<T> add_channel_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if ((x.rank() != 2 && x.rank() != 4) || bias.numel() != x.dim(1)) {
    throw ShapeError("add_channel_bias: bias " + shape_str(bias.shape()) +
                     " does not match channels of " + shape_str(x.shape()));
  }
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t inner = x.numel() / (n * c);
  std::vector<T> out(x.values());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* row = out.data() + (s * c + ch) * inner;
      for (std::size_t k = 0; k < inner; ++k) row[k] += bias.data()[ch];
    }
  }
  return Tensor<T>::from_op(
      "add_channel_bias", x.shape(), std::move(out), {x, bias},
      [n, c, inner](std::span<const T> g, std::span<const std::span<T>> gi) {
        if (!gi[0].empty()) {
          for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
        }
        if (!gi[1].empty()) {
          for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t ch = 0; ch < c; ++ch) {
              T acc = 0;
              const T* row = g.data() + (s * c + ch) * inner;
              for (std::size_t k = 0; k < inner; ++k) acc += row[k];
              gi[1][ch] += acc;
            }
          }
        }
      });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  return Tensor<T>::from_op("reshape", std::move(shape), a.values(), {a},
                            [](std::span<const T> g, std::span<const std::span<T>> gi) {
                              for (std::size_t i = 0; i < g.size(); ++i) gi[0][i] += g[i];
                            });
}

#define PLACELAB_INSTANTIATE(T)                                              \
  template class Tensor<T>;                                                  \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> scale(const Tensor<T>&, T);                             \
  template Tensor<T> sum(const Tensor<T>&);                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> add_channel_bias(const Tensor<T>&, const Tensor<T>&);   \
  template Tensor<T> reshape(const Tensor<T>&, Shape);

PLACELAB_INSTANTIATE(float)
PLACELAB_INSTANTIATE(double)

#undef PLACELAB_INSTANTIATE

}  // namespace placelab
