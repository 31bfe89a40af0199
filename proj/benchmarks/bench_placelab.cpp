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


#include <benchmark/benchmark.h>

#include <vector>

#include "placelab/augment.hpp"
#include "placelab/layers.hpp"
#include "placelab/network.hpp"
#include "placelab/place_dropout.hpp"
#include "placelab/synthetic.hpp"
#include "placelab/trainer.hpp"

namespace {

using namespace placelab;

Tensor<float> random_tensor(Shape shape, std::uint64_t seed, bool requires_grad = false) {
  RandomStream rng({seed, Purpose::kGeneric, 0, 0, 0});
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<float> v(n);
  for (float& x : v) x = static_cast<float>(rng.normal());
  return Tensor<float>::from(std::move(shape), std::move(v), requires_grad);
}

// Args: batch, input channels, output channels, spatial size.
void BM_Conv2dForward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), cin = static_cast<std::size_t>(state.range(1)),
             cout = static_cast<std::size_t>(state.range(2)), hw = static_cast<std::size_t>(state.range(3));
  const auto x = random_tensor({n, cin, hw, hw}, 1);
  const auto w = random_tensor({cout, cin, 3, 3}, 2);
  const auto b = random_tensor({cout}, 3);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, b));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Conv2dForward)->Args({64, 3, 16, 32})->Args({64, 16, 32, 16})->Args({64, 64, 128, 4});

void BM_Conv2dBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0)), cin = static_cast<std::size_t>(state.range(1)),
             cout = static_cast<std::size_t>(state.range(2)), hw = static_cast<std::size_t>(state.range(3));
  auto x = random_tensor({n, cin, hw, hw}, 1, true);
  auto w = random_tensor({cout, cin, 3, 3}, 2, true);
  auto b = random_tensor({cout}, 3, true);
  for (auto _ : state) {
    const auto loss = sum(conv2d(x, w, b));
    loss.backward();
    x.zero_grad();
    w.zero_grad();
    b.zero_grad();
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_Conv2dBackward)->Args({64, 3, 16, 32})->Args({64, 16, 32, 16})->Args({64, 64, 128, 4});

void BM_NetworkForward(benchmark::State& state) {
  RandomStream init({1, Purpose::kInit, 0, 0, 0});
  Network<float> net(NetworkConfig{}, init);
  const auto x = random_tensor({64, 3, 32, 32}, 4);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, Mode::kEval));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 64));
}
BENCHMARK(BM_NetworkForward)->Unit(benchmark::kMillisecond);

// One optimizer step on a composed batch of 64 with dropout at L3.
void BM_TrainingIteration(benchmark::State& state) {
  RandomStream init({1, Purpose::kInit, 0, 0, 0});
  Network<float> net(NetworkConfig{}, init);
  const auto data = generate_dataset(0, 8);
  std::vector<const Sample*> raw;
  for (std::size_t i = 0; i < 32; ++i) raw.push_back(&data[i % 3].samples[i]);
  const AugConfig aug;
  const SgdConfig sgd;
  auto params = net.parameters();
  std::vector<std::vector<float>> velocity;
  std::uint32_t iteration = 0;
  for (auto _ : state) {
    const Batch batch = compose_batch(raw, aug, 1, 0, iteration);
    const ScheduleState schedule{5};
    const PlaceConfig place;
    const StreamKey key{1, Purpose::kPlaceMask, 5, iteration, 0};
    const FeatureHook<float> hooks[] = {{LayerId::kL3, HookKind::kPlace, [&](const Tensor<float>& f) {
                                           return place_hook(f, schedule, place, key, Mode::kTrain);
                                         }}};
    net.zero_grad();
    const auto out = net.forward(batch.images, Mode::kTrain, hooks);
    softmax_cross_entropy(out.logits, batch.labels).backward();
    sgd_step(params, velocity, sgd, sgd.lr0);
    ++iteration;
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 64));
}
BENCHMARK(BM_TrainingIteration)->Unit(benchmark::kMillisecond);

void BM_RandAugment(benchmark::State& state) {
  const auto data = generate_dataset(0, 1);
  const AugPolicy policy;
  std::uint32_t i = 0;
  for (auto _ : state) {
    RandomStream rng({1, Purpose::kRandAug, 0, 0, i++});
    benchmark::DoNotOptimize(rand_augment(data[0].samples[0].image, policy, rng));
  }
}
BENCHMARK(BM_RandAugment);

void BM_PhiloxStream(benchmark::State& state) {
  RandomStream rng({7, Purpose::kGeneric, 0, 0, 0});
  for (auto _ : state) benchmark::DoNotOptimize(rng.next_u32());
}
BENCHMARK(BM_PhiloxStream);

}  // namespace

BENCHMARK_MAIN();
