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

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "placelab/layers.hpp"
#include "placelab/rng.hpp"
#include "placelab/tensor.hpp"

namespace placelab {

/// Hook points after each convolutional block.
enum class LayerId { kL1 = 0, kL2 = 1, kL3 = 2, kL4 = 3 };

inline constexpr std::array<LayerId, 4> kAllLayers = {LayerId::kL1, LayerId::kL2,
                                                      LayerId::kL3, LayerId::kL4};

std::string_view to_string(LayerId id);
/// Parses "L1".."L4"; throws ConfigError otherwise.
LayerId parse_layer(std::string_view text);
inline std::size_t layer_index(LayerId id) { return static_cast<std::size_t>(id); }

enum class Mode { kTrain, kEval };

enum class HookKind {
  kPlace,  // stochastic channel dropout; at most one per forward
  kStyle,  // feature statistic augmentation
  kOther,  // deterministic transforms (tests, probes)
};

/// Replaces the output of one block with `transform(output)`. Training-only
/// kinds (kPlace, kStyle) are skipped in evaluation mode.
template <typename T>
struct FeatureHook {
  LayerId layer = LayerId::kL1;
  HookKind kind = HookKind::kOther;
  std::function<Tensor<T>(const Tensor<T>&)> transform;
};

struct NetworkConfig {
  std::size_t in_channels = 3;
  std::size_t num_classes = 5;
  std::array<std::size_t, 4> widths = {16, 32, 64, 128};
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
};

template <typename T>
struct NamedTensor {
  std::string name;
  Tensor<T> tensor;
  bool trainable = true;
};

/// Four blocks of conv3x3 -> batch-norm -> ReLU -> max-pool 2x2, then global
/// average pooling and a linear classifier.
template <typename T>
class Network {
 public:
  struct Output {
    Tensor<T> logits;
    /// Pooled block-4 representation, N x widths[3].
    Tensor<T> features;
    /// Block outputs before any hook was applied.
    std::array<Tensor<T>, 4> blocks;
  };

  /// Fan-in scaled normal weights drawn from `init` in declaration order,
  /// zero biases, unit norm scales.
  Network(const NetworkConfig& config, RandomStream& init);

  const NetworkConfig& config() const { return config_; }
  std::size_t channels(LayerId id) const { return config_.widths[layer_index(id)]; }

  /// Throws ContractError when more than one kPlace hook is given or a hook
  /// changes the feature shape.
  Output forward(const Tensor<T>& images, Mode mode,
                 std::span<const FeatureHook<T>> hooks = {});

  /// Trainable parameters in declaration order.
  std::vector<Tensor<T>> parameters() const;
  /// Every named array in declaration order. Running statistics are returned
  /// as detached copies with trainable = false.
  std::vector<NamedTensor<T>> state() const;
  std::size_t parameter_count() const;

  void zero_grad();

  /// Deep copy; the result shares no storage with this network.
  Network clone() const;

  void save(const std::filesystem::path& path) const;
  /// Loads arrays saved by save(); names, shapes and element type must match.
  void load(const std::filesystem::path& path);

 private:
  struct Block {
    Tensor<T> conv_weight, conv_bias, bn_scale, bn_shift;
    BatchNormStats<T> bn_stats;
  };

  NetworkConfig config_;
  std::array<Block, 4> blocks_;
  Tensor<T> head_weight_, head_bias_;
};

// Checkpoint file layout (little-endian):
//   "PLCK" | u32 version | u32 scalar bytes | u64 array count
//   per array: u32 name length | name | u32 rank | u64 dims[rank] | values
inline constexpr std::array<char, 4> kCheckpointMagic = {'P', 'L', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace placelab
