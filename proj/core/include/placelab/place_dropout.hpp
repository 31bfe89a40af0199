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
#include <cstdint>
#include <span>
#include <vector>

#include "placelab/network.hpp"
#include "placelab/rng.hpp"
#include "placelab/tensor.hpp"

namespace placelab {

/// Progressive layer-wise and channel-wise dropout settings.
struct PlaceConfig {
  bool enabled = true;
  /// Upper bound of the dropped-channel ratio, in (0, 1].
  double p_max = 0.33;
  /// Progressive rate: the ratio reaches p_max / 2 at epoch v.
  double v = 4.0;
  std::vector<LayerId> candidate_layers = {LayerId::kL3, LayerId::kL4};

  /// Throws ConfigError on out-of-range values or an empty/duplicated layer set.
  void validate() const;
};

/// Epoch counter local to the dropout-active stage. The first active epoch
/// is 1.
struct ScheduleState {
  std::uint32_t epoch = 0;
};

/// p_max * (2 / pi) * atan(epoch / v).
double schedule_ratio(double epoch, double p_max, double v);

/// floor(channels * ratio).
std::size_t num_dropped(std::size_t channels, double ratio);

/// Channels whose feature maps are zeroed for one sample.
struct ChannelMask {
  std::size_t channels = 0;
  std::vector<std::size_t> zero_set;

  /// One factor per channel: 0 for dropped channels, 1 otherwise.
  template <typename T>
  std::vector<T> factors() const;
};

/// Uniform random subset of `gamma` distinct channels. Requires gamma < channels.
ChannelMask sample_mask(std::size_t channels, std::size_t gamma, RandomStream& rng);

/// Masked feature: F * M with M broadcast over the spatial extent. No
/// rescaling of surviving channels. Accepts a single C x H x W feature.
template <typename T>
Tensor<T> apply_mask(const Tensor<T>& feature, const ChannelMask& mask);

/// Batch form: one mask per sample of an N x C x H x W tensor.
template <typename T>
Tensor<T> apply_masks(const Tensor<T>& features, std::span<const ChannelMask> masks);

/// Uniform draw from a non-empty candidate set.
LayerId select_layer(std::span<const LayerId> candidates, RandomStream& rng);

/// Ratio and channel count for one iteration at the selected layer.
struct PlaceStep {
  LayerId layer = LayerId::kL1;
  double ratio = 0.0;
  std::size_t gamma = 0;
};

PlaceStep plan_place_step(const ScheduleState& state, const PlaceConfig& config,
                          LayerId layer, std::size_t channels);

/// Training-time dropout on the features of the selected layer. Computes
/// the ratio once, then draws an independent mask for every sample from the
/// stream `mask_key` with its `sample` field set to the sample index.
/// Identity when config.enabled is false. Throws ContractError in
/// evaluation mode.
template <typename T>
Tensor<T> place_hook(const Tensor<T>& features, const ScheduleState& state,
                     const PlaceConfig& config, const StreamKey& mask_key, Mode mode,
                     std::vector<ChannelMask>* masks_out = nullptr);

}  // namespace placelab
