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
#include <span>
#include <vector>

#include "placelab/tensor.hpp"

namespace placelab {

/// 2-D cross-correlation, stride 1, symmetric zero padding.
/// input N x Cin x H x W, kernel Cout x Cin x k x k, bias Cout.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t padding = 1);

template <typename T>
struct BatchNormStats {
  std::vector<T> running_mean;
  std::vector<T> running_var;
};

/// Per-channel standardization over (N, H, W) for rank-4 input, over N for
/// rank-2 input. In training mode batch statistics are used and the running
/// statistics are blended with `momentum`; in evaluation mode the running
/// statistics are used and left untouched.
template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& scale, const Tensor<T>& shift,
                     BatchNormStats<T>& stats, bool training, T eps, T momentum);

/// max(x, 0); the derivative at 0 is 0.
template <typename T>
Tensor<T> relu(const Tensor<T>& input);

/// 2x2 max pooling with stride 2 over an N x C x H x W tensor (H, W even).
/// Ties go to the first element in row-major window order.
template <typename T>
Tensor<T> max_pool_2x2(const Tensor<T>& input);

/// N x C x H x W -> N x C.
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

/// x (N x D) * weight (D x K) + bias (K).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Mean negative log-likelihood of `labels` under softmax(logits).
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);

}  // namespace placelab
