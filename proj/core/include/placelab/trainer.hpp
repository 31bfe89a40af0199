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
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "placelab/augment.hpp"
#include "placelab/network.hpp"
#include "placelab/place_dropout.hpp"
#include "placelab/style.hpp"
#include "placelab/synthetic.hpp"
#include "placelab/tensor.hpp"

namespace placelab {

struct SgdConfig {
  double lr0 = 1e-3;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double decay_factor = 0.1;
  double decay_at_fraction = 0.8;
  bool nesterov = false;
  /// Decay once at the given fraction of all epochs instead of per stage.
  bool global_decay = false;

  void validate() const;
};

struct StagePlan {
  std::size_t stage1_epochs = 15;
  std::size_t stage2_epochs = 15;
  /// Dropout from the first epoch; requires stage1_epochs == 0.
  bool one_stage_mode = false;

  void validate() const;
  std::size_t total_epochs() const { return stage1_epochs + stage2_epochs; }
};

struct AugConfig {
  bool standard_enabled = true;
  bool rand_enabled = true;
  StandardAugmentConfig standard;
  AugPolicy policy;
};

struct TrainConfig {
  NetworkConfig net;
  SgdConfig sgd;
  StagePlan plan;
  PlaceConfig place;
  StyleConfig style;
  AugConfig aug;
  /// Raw samples per iteration; the composed batch holds twice as many.
  std::size_t raw_batch = 32;
  bool evaluate_each_epoch = true;

  void validate() const;
};

/// Momentum SGD with L2 weight decay applied to every parameter:
///   g' = grad + weight_decay * param; v = momentum * v + g';
///   param -= lr * v   (or lr * (g' + momentum * v) with Nesterov).
/// Throws NumericalError on a non-finite gradient.
void sgd_step(std::span<Tensor<float>> params, std::vector<std::vector<float>>& velocity,
              const SgdConfig& config, double lr);

/// lr0 before floor(decay_at_fraction * stage_length), lr0 * decay_factor from
/// that epoch on (inclusive).
double lr_at(std::size_t epoch, std::size_t stage_length, const SgdConfig& config);

struct Batch {
  Tensor<float> images;
  std::vector<int> labels;
};

/// First half: standard augmentation of each sample; second half:
/// randomized augmentation of the same samples (standard augmentation with a
/// separate stream when the randomized branch is disabled). Labels repeat.
/// Sample i of the batch draws from streams keyed by (seed, epoch,
/// iteration, i) only.
Batch compose_batch(std::span<const Sample* const> samples, const AugConfig& config,
                    std::uint64_t seed, std::uint32_t epoch, std::uint32_t iteration);

struct EpochLog {
  int stage = 1;
  /// 1-based within the stage; equals the dropout schedule epoch in stage 2.
  std::size_t epoch = 1;
  double lr = 0.0;
  /// Dropout ratio of the epoch (0 when inactive).
  double ratio = 0.0;
  /// Dropped channels at the layer selected in the epoch's last iteration.
  std::size_t gamma = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainResult {
  Network<float> net;
  std::vector<EpochLog> log;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Training state at the end of stage 1. Stage 1 never depends on the
/// dropout settings, so runs that differ only there can share it.
struct StageSnapshot {
  Network<float> net;
  std::vector<std::vector<float>> velocity;
  std::vector<EpochLog> log;
};

/// Runs both stages on split.train and returns the last-epoch model.
/// Stage 1 never applies dropout; stage 2 applies it when config.place is
/// enabled, with a stage-local epoch counter starting at 1.
///
/// With `resume`, stage 1 is taken from the snapshot instead of being
/// trained; it must come from a run with the same seed, split and stage-1
/// settings. With `capture`, the state after stage 1 is stored there.
TrainResult train(const Split& split, const TrainConfig& config, std::uint64_t seed,
                  const EpochCallback& on_epoch = {}, const StageSnapshot* resume = nullptr,
                  std::optional<StageSnapshot>* capture = nullptr);

}  // namespace placelab
