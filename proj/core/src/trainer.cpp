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

#include "placelab/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "placelab/errors.hpp"
#include "placelab/metrics.hpp"

namespace placelab {

void SgdConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("train.lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be non-negative");
  if (!(decay_factor > 0.0)) throw ConfigError("train.decay_factor must be positive");
  if (!(decay_at_fraction > 0.0 && decay_at_fraction < 1.0)) {
    throw ConfigError("train.decay_at must lie in (0, 1)");
  }
}

void StagePlan::validate() const {
  if (one_stage_mode && stage1_epochs != 0) {
    throw ConfigError("one-stage mode requires train.stage1_epochs = 0");
  }
}

void TrainConfig::validate() const {
  sgd.validate();
  plan.validate();
  place.validate();
  style.validate();
  aug.policy.validate();
  if (raw_batch == 0) throw ConfigError("train.batch must be positive");
}

void sgd_step(std::span<Tensor<float>> params, std::vector<std::vector<float>>& velocity,
              const SgdConfig& config, double lr) {
  if (velocity.size() != params.size()) {
    velocity.resize(params.size());
  }
  const auto wd = static_cast<float>(config.weight_decay);
  const auto mom = static_cast<float>(config.momentum);
  const auto step = static_cast<float>(lr);
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<float>& param = params[p];
    auto values = param.data();
    auto grad = param.grad();
    auto& v = velocity[p];
    if (v.size() != values.size()) v.assign(values.size(), 0.0f);
    for (std::size_t i = 0; i < values.size(); ++i) {
      const float g = grad.empty() ? 0.0f : grad[i];
      if (!std::isfinite(g)) {
        throw NumericalError("sgd_step: non-finite gradient in parameter " + std::to_string(p) +
                             " element " + std::to_string(i));
      }
      const float g_decayed = g + wd * values[i];
      v[i] = mom * v[i] + g_decayed;
      values[i] -= step * (config.nesterov ? g_decayed + mom * v[i] : v[i]);
    }
  }
}

double lr_at(std::size_t epoch, std::size_t stage_length, const SgdConfig& config) {
  if (epoch >= stage_length) throw ContractError("lr_at: epoch beyond stage length");
  const auto boundary = static_cast<std::size_t>(
      std::floor(config.decay_at_fraction * static_cast<double>(stage_length)));
  return epoch >= boundary ? config.lr0 * config.decay_factor : config.lr0;
}

Batch compose_batch(std::span<const Sample* const> samples, const AugConfig& config,
                    std::uint64_t seed, std::uint32_t epoch, std::uint32_t iteration) {
  const std::size_t n = samples.size();
  std::vector<Image> images;
  images.reserve(2 * n);
  Batch batch;
  batch.labels.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    const Image& raw = samples[i]->image;
    if (config.standard_enabled) {
      RandomStream rng({seed, Purpose::kStandardAug, epoch, iteration, static_cast<std::uint32_t>(i)});
      images.push_back(standard_augment(raw, config.standard, rng));
    } else {
      images.push_back(raw);
    }
    batch.labels.push_back(samples[i]->label);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Image& raw = samples[i]->image;
    if (config.rand_enabled) {
      RandomStream rng({seed, Purpose::kRandAug, epoch, iteration, static_cast<std::uint32_t>(i)});
      images.push_back(rand_augment(raw, config.policy, rng));
    } else if (config.standard_enabled) {
      RandomStream rng({seed, Purpose::kStandardAug, epoch, iteration, static_cast<std::uint32_t>(n + i)});
      images.push_back(standard_augment(raw, config.standard, rng));
    } else {
      images.push_back(raw);
    }
    batch.labels.push_back(samples[i]->label);
  }
  std::vector<const Image*> ptrs;
  ptrs.reserve(images.size());
  for (const Image& img : images) ptrs.push_back(&img);
  batch.images = stack_images(ptrs);
  return batch;
}

namespace {

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed, std::uint32_t epoch) {
  RandomStream rng({seed, Purpose::kShuffle, epoch, 0, 0});
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(static_cast<std::uint32_t>(i))]);
  }
  return order;
}

}  // namespace

TrainResult train(const Split& split, const TrainConfig& config, std::uint64_t seed,
                  const EpochCallback& on_epoch, const StageSnapshot* resume,
                  std::optional<StageSnapshot>* capture) {
  config.validate();
  RandomStream init_rng({seed, Purpose::kInit, 0, 0, 0});
  TrainResult result{Network<float>(config.net, init_rng), {}};
  Network<float>& net = result.net;
#if defined(__GLIBC__)
  // Training allocates and frees many same-sized activation buffers per
  // iteration; keep them on the heap instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, std::numeric_limits<int>::max());
#endif
  if (config.plan.total_epochs() == 0) return result;
  if (split.train.size() < config.raw_batch) {
    throw ConfigError("training split holds fewer samples than one batch");
  }

  auto params = net.parameters();
  std::vector<std::vector<float>> velocity;
  const std::size_t iterations = split.train.size() / config.raw_batch;  // partial batch dropped
  const std::size_t total = config.plan.total_epochs();

  std::uint32_t global_epoch = 0;
  int first_stage = 1;
  if (resume != nullptr) {
    if (resume->log.size() != config.plan.stage1_epochs ||
        resume->velocity.size() > params.size()) {
      throw ContractError("train: snapshot does not match the stage-1 plan");
    }
    net = resume->net.clone();
    params = net.parameters();
    velocity = resume->velocity;
    result.log = resume->log;
    if (on_epoch) {
      for (const auto& entry : result.log) on_epoch(entry);
    }
    global_epoch = static_cast<std::uint32_t>(config.plan.stage1_epochs);
    first_stage = 2;
  }
  for (int stage = first_stage; stage <= 2; ++stage) {
    if (stage == 2 && capture != nullptr) {
      capture->emplace(StageSnapshot{net.clone(), velocity, result.log});
    }
    const std::size_t stage_length = stage == 1 ? config.plan.stage1_epochs : config.plan.stage2_epochs;
    const bool place_active = stage == 2 && config.place.enabled;
    for (std::size_t local = 0; local < stage_length; ++local, ++global_epoch) {
      const double lr = config.sgd.global_decay ? lr_at(global_epoch, total, config.sgd)
                                                : lr_at(local, stage_length, config.sgd);
      const ScheduleState schedule{place_active ? static_cast<std::uint32_t>(local + 1) : 0u};
      EpochLog entry;
      entry.stage = stage;
      entry.epoch = local + 1;
      entry.lr = lr;
      entry.ratio = place_active ? schedule_ratio(schedule.epoch, config.place.p_max, config.place.v) : 0.0;

      const auto order = shuffled_indices(split.train.size(), seed, global_epoch);
      double loss_sum = 0.0;
      std::vector<const Sample*> chunk(config.raw_batch);
      for (std::size_t it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < config.raw_batch; ++i) {
          chunk[i] = &split.train[order[it * config.raw_batch + i]];
        }
        const auto iter32 = static_cast<std::uint32_t>(it);
        Batch batch = compose_batch(chunk, config.aug, seed, global_epoch, iter32);

        std::vector<FeatureHook<float>> hooks;
        if (config.style.mode != StyleMode::kOff) {
          RandomStream style_rng({seed, Purpose::kStyle, global_epoch, iter32, 0});
          if (style_rng.bernoulli(config.style.probability)) {
            const LayerId layer = config.style.layers.size() == 1
                                      ? config.style.layers.front()
                                      : select_layer(config.style.layers, style_rng);
            const auto eps = static_cast<float>(config.style.eps);
            const StyleMode mode = config.style.mode;
            hooks.push_back({layer, HookKind::kStyle,
                             [style_rng, eps, mode](const Tensor<float>& f) mutable {
                               return mode == StyleMode::kSwap ? batch_swap(f, style_rng, eps)
                                                               : batch_mix(f, style_rng, eps);
                             }});
          }
        }
        if (place_active) {
          RandomStream layer_rng({seed, Purpose::kPlaceLayer, global_epoch, iter32, 0});
          const LayerId layer = select_layer(config.place.candidate_layers, layer_rng);
          entry.gamma = plan_place_step(schedule, config.place, layer, net.channels(layer)).gamma;
          const StreamKey mask_key{seed, Purpose::kPlaceMask, global_epoch, iter32, 0};
          const PlaceConfig& place = config.place;
          hooks.push_back({layer, HookKind::kPlace, [&place, schedule, mask_key](const Tensor<float>& f) {
                             return place_hook(f, schedule, place, mask_key, Mode::kTrain);
                           }});
        }

        auto out = net.forward(batch.images, Mode::kTrain, hooks);
        const Tensor<float> loss = softmax_cross_entropy(out.logits, batch.labels);
        const double value = loss.item();
        if (!std::isfinite(value)) {
          std::ostringstream msg;
          msg << "non-finite loss at stage " << stage << " epoch " << (local + 1) << " iteration " << it;
          throw NumericalError(msg.str());
        }
        loss_sum += value;
        net.zero_grad();
        loss.backward();
        sgd_step(params, velocity, config.sgd, lr);
      }
      entry.train_loss = loss_sum / static_cast<double>(iterations);
      if (config.evaluate_each_epoch || global_epoch + 1 == total) {
        if (!split.val.empty()) entry.val_acc = evaluate(net, split.val).accuracy;
        if (!split.test.empty()) entry.test_acc = evaluate(net, split.test).accuracy;
      }
      result.log.push_back(entry);
      if (on_epoch) on_epoch(entry);
    }
  }
  return result;
}

}  // namespace placelab
