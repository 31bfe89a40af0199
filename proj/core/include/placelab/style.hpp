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
#include <utility>
#include <vector>

#include "placelab/network.hpp"
#include "placelab/rng.hpp"
#include "placelab/tensor.hpp"

namespace placelab {

/// Per-sample, per-channel mean and population standard deviation.
/// Values are stored row-major as samples x channels.
template <typename T>
struct StyleStats {
  std::size_t samples = 0;
  std::size_t channels = 0;
  std::vector<T> mu;
  std::vector<T> sigma;

  T mean(std::size_t sample, std::size_t channel) const { return mu[sample * channels + channel]; }
  T stddev(std::size_t sample, std::size_t channel) const {
    return sigma[sample * channels + channel];
  }
};

inline constexpr double kStyleEps = 1e-6;

/// Statistics over the spatial extent of a C x H x W or N x C x H x W tensor.
template <typename T>
StyleStats<T> channel_stats(const Tensor<T>& features);

/// sigma_t * (F - mu_F) / (sigma_F + eps) + mu_t, per sample and channel.
/// The target statistics are constants; gradients flow into `features`
/// through its own statistics. `target.samples` must equal the batch size
/// (1 for a C x H x W input).
template <typename T>
Tensor<T> adain(const Tensor<T>& features, const StyleStats<T>& target, T eps = T(kStyleEps));

/// Exchanges the statistics of two equally shaped features.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> swap_style(const Tensor<T>& fx, const Tensor<T>& fy,
                                           T eps = T(kStyleEps));

/// Re-styles `fx` with lambda * stats(fx) + (1 - lambda) * stats(fy).
/// Throws ContractError when lambda is outside [0, 1].
template <typename T>
Tensor<T> mix_style(const Tensor<T>& fx, const Tensor<T>& fy, T lambda, T eps = T(kStyleEps));

/// Uniform random permutation of [0, n).
std::vector<std::size_t> random_permutation(std::size_t n, RandomStream& rng);

/// Sample i takes the statistics of sample partner[i].
template <typename T>
Tensor<T> batch_swap_with(const Tensor<T>& features, std::span<const std::size_t> partner,
                          T eps = T(kStyleEps));

/// batch_swap_with over a random permutation; identity when N < 2.
template <typename T>
Tensor<T> batch_swap(const Tensor<T>& features, RandomStream& rng, T eps = T(kStyleEps));

/// Per-sample mixing with the partner's statistics and weights lambda[i].
template <typename T>
Tensor<T> batch_mix_with(const Tensor<T>& features, std::span<const std::size_t> partner,
                         std::span<const T> lambda, T eps = T(kStyleEps));

/// batch_mix_with over a random permutation and lambda ~ U[0, 1).
template <typename T>
Tensor<T> batch_mix(const Tensor<T>& features, RandomStream& rng, T eps = T(kStyleEps));

enum class StyleMode { kOff, kSwap, kMix };

struct StyleConfig {
  StyleMode mode = StyleMode::kSwap;
  std::vector<LayerId> layers = {LayerId::kL1};
  double eps = kStyleEps;
  /// Chance that the augmentation runs in a given iteration.
  double probability = 1.0;

  void validate() const;
};

}  // namespace placelab
