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

#include "placelab/place_dropout.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "placelab/errors.hpp"

namespace placelab {

void PlaceConfig::validate() const {
  if (!(p_max > 0.0 && p_max <= 1.0)) {
    throw ConfigError("place.p_max must lie in (0, 1], got " + std::to_string(p_max));
  }
  if (!(v > 0.0)) throw ConfigError("place.v must be positive, got " + std::to_string(v));
  if (candidate_layers.empty()) throw ConfigError("place.layers must not be empty");
  for (std::size_t i = 0; i < candidate_layers.size(); ++i) {
    for (std::size_t j = i + 1; j < candidate_layers.size(); ++j) {
      if (candidate_layers[i] == candidate_layers[j]) {
        throw ConfigError("place.layers lists " + std::string(to_string(candidate_layers[i])) +
                          " twice");
      }
    }
  }
}

double schedule_ratio(double epoch, double p_max, double v) {
  if (epoch < 0.0) throw ContractError("schedule_ratio: negative epoch");
  return p_max * (2.0 / std::numbers::pi) * std::atan(epoch / v);
}

std::size_t num_dropped(std::size_t channels, double ratio) {
  if (!(ratio >= 0.0 && ratio < 1.0)) {
    throw ContractError("num_dropped: ratio must lie in [0, 1)");
  }
  return static_cast<std::size_t>(std::floor(static_cast<double>(channels) * ratio));
}

template <typename T>
std::vector<T> ChannelMask::factors() const {
  std::vector<T> out(channels, T{1});
  for (std::size_t c : zero_set) out[c] = T{0};
  return out;
}

ChannelMask sample_mask(std::size_t channels, std::size_t gamma, RandomStream& rng) {
  if (gamma >= channels) {
    throw ContractError("sample_mask: cannot drop " + std::to_string(gamma) + " of " +
                        std::to_string(channels) + " channels");
  }
  // Partial Fisher-Yates: the first gamma slots form a uniform gamma-subset.
  std::vector<std::size_t> order(channels);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i < gamma; ++i) {
    const std::size_t j = i + rng.below(static_cast<std::uint32_t>(channels - i));
    std::swap(order[i], order[j]);
  }
  order.resize(gamma);
  return {channels, std::move(order)};
}

template <typename T>
Tensor<T> apply_masks(const Tensor<T>& features, std::span<const ChannelMask> masks) {
  if (features.rank() != 4 || masks.size() != features.dim(0)) {
    throw ShapeError("apply_masks: " + std::to_string(masks.size()) + " masks for features " +
                     shape_str(features.shape()));
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  std::vector<T> factors;
  factors.reserve(n * c);
  for (const ChannelMask& mask : masks) {
    if (mask.channels != c) {
      throw ShapeError("apply_masks: mask for " + std::to_string(mask.channels) +
                       " channels applied to " + std::to_string(c) + " channels");
    }
    const auto f = mask.factors<T>();
    factors.insert(factors.end(), f.begin(), f.end());
  }
  return mul(features, Tensor<T>::from({n, c}, std::move(factors)));
}

template <typename T>
Tensor<T> apply_mask(const Tensor<T>& feature, const ChannelMask& mask) {
  if (feature.rank() != 3) {
    throw ShapeError("apply_mask: expected C x H x W, got " + shape_str(feature.shape()));
  }
  const Shape shape = feature.shape();
  const Tensor<T> batched = reshape(feature, {1, shape[0], shape[1], shape[2]});
  return reshape(apply_masks(batched, std::span<const ChannelMask>(&mask, 1)), shape);
}

LayerId select_layer(std::span<const LayerId> candidates, RandomStream& rng) {
  if (candidates.empty()) throw ContractError("select_layer: empty candidate set");
  return candidates[rng.below(static_cast<std::uint32_t>(candidates.size()))];
}

PlaceStep plan_place_step(const ScheduleState& state, const PlaceConfig& config,
                          LayerId layer, std::size_t channels) {
  PlaceStep step;
  step.layer = layer;
  step.ratio = schedule_ratio(state.epoch, config.p_max, config.v);
  step.gamma = num_dropped(channels, step.ratio);
  return step;
}

template <typename T>
Tensor<T> place_hook(const Tensor<T>& features, const ScheduleState& state,
                     const PlaceConfig& config, const StreamKey& mask_key, Mode mode,
                     std::vector<ChannelMask>* masks_out) {
  if (mode != Mode::kTrain) {
    throw ContractError("place_hook: dropout is closed in evaluation mode");
  }
  if (!config.enabled) return features;
  if (features.rank() != 4) {
    throw ShapeError("place_hook: expected N x C x H x W, got " + shape_str(features.shape()));
  }
  const std::size_t n = features.dim(0), c = features.dim(1);
  const double ratio = schedule_ratio(state.epoch, config.p_max, config.v);
  const std::size_t gamma = num_dropped(c, ratio);
  std::vector<ChannelMask> masks;
  masks.reserve(n);
  for (std::size_t s = 0; s < n; ++s) {
    StreamKey key = mask_key;
    key.sample = static_cast<std::uint32_t>(s);
    RandomStream rng(key);
    masks.push_back(sample_mask(c, gamma, rng));
  }
  Tensor<T> out = gamma == 0 ? features : apply_masks(features, std::span<const ChannelMask>(masks));
  if (masks_out != nullptr) *masks_out = std::move(masks);
  return out;
}

template std::vector<float> ChannelMask::factors<float>() const;
template std::vector<double> ChannelMask::factors<double>() const;

#define PLACELAB_INSTANTIATE(T)                                                            \
  template Tensor<T> apply_mask(const Tensor<T>&, const ChannelMask&);                     \
  template Tensor<T> apply_masks(const Tensor<T>&, std::span<const ChannelMask>);          \
  template Tensor<T> place_hook(const Tensor<T>&, const ScheduleState&, const PlaceConfig&, \
                                const StreamKey&, Mode, std::vector<ChannelMask>*);

PLACELAB_INSTANTIATE(float)
PLACELAB_INSTANTIATE(double)

#undef PLACELAB_INSTANTIATE

}  // namespace placelab
