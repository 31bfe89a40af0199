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


#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <vector>

#include "placelab/errors.hpp"
#include "placelab/network.hpp"

using namespace placelab;
namespace fs = std::filesystem;

namespace {

NetworkConfig small_config() {
  NetworkConfig cfg;
  cfg.widths = {4, 6, 6, 8};
  cfg.num_classes = 3;
  return cfg;
}

Network<float> make_net(std::uint64_t seed, const NetworkConfig& cfg = small_config()) {
  RandomStream init({seed, Purpose::kInit, 0, 0, 0});
  return Network<float>(cfg, init);
}

Tensor<float> make_input(std::size_t n, std::size_t size = 16) {
  RandomStream rng({7, Purpose::kGeneric, 0, 0, 0});
  std::vector<float> v(n * 3 * size * size);
  for (float& x : v) x = static_cast<float>(rng.uniform());
  return Tensor<float>::from({n, 3, size, size}, std::move(v));
}

FeatureHook<float> scale_hook(LayerId layer, float factor, HookKind kind = HookKind::kOther) {
  return {layer, kind, [factor](const Tensor<float>& x) { return scale(x, factor); }};
}

}  // namespace

TEST_CASE("output shapes") {
  auto net = make_net(1);
  const auto out = net.forward(make_input(5), Mode::kTrain);
  CHECK(out.logits.shape() == Shape{5, 3});
  CHECK(out.features.shape() == Shape{5, 8});
  CHECK(out.blocks[0].shape() == Shape{5, 4, 8, 8});
  CHECK(out.blocks[1].shape() == Shape{5, 6, 4, 4});
  CHECK(out.blocks[3].shape() == Shape{5, 8, 1, 1});
  CHECK(net.channels(LayerId::kL3) == 6);
  CHECK(parse_layer("L2") == LayerId::kL2);
  CHECK_THROWS_AS(parse_layer("L5"), ConfigError);
}

TEST_CASE("identity hook is bit-identical") {
  auto net = make_net(1);
  const auto x = make_input(4);
  const auto plain = net.forward(x, Mode::kEval);
  const FeatureHook<float> hooks[] = {scale_hook(LayerId::kL2, 1.0f)};
  const auto hooked = net.forward(x, Mode::kEval, hooks);
  CHECK(plain.logits.values() == hooked.logits.values());
}

TEST_CASE("zeroing the last block leaves only the classifier bias") {
  auto net = make_net(1);
  const auto x = make_input(4);
  const auto plain = net.forward(x, Mode::kEval);
  const FeatureHook<float> hooks[] = {scale_hook(LayerId::kL4, 0.0f)};
  const auto out = net.forward(x, Mode::kEval, hooks);
  for (float v : out.features.values()) CHECK(v == 0.0f);
  for (float v : out.logits.values()) CHECK(v == 0.0f);
  // Blocks upstream of the hook and the hooked block's own output are unchanged.
  for (std::size_t b = 0; b < 4; ++b) CHECK(out.blocks[b].values() == plain.blocks[b].values());
}

TEST_CASE("training-only hooks are skipped in evaluation") {
  auto net = make_net(1);
  int calls = 0;
  const FeatureHook<float> hooks[] = {{LayerId::kL3, HookKind::kPlace, [&calls](const Tensor<float>& x) {
                                         ++calls;
                                         return x;
                                       }},
                                      {LayerId::kL1, HookKind::kStyle, [&calls](const Tensor<float>& x) {
                                         ++calls;
                                         return x;
                                       }}};
  const auto x = make_input(2);
  net.forward(x, Mode::kEval, hooks);
  CHECK(calls == 0);
  net.forward(x, Mode::kTrain, hooks);
  CHECK(calls == 2);
}

TEST_CASE("hook contract violations") {
  auto net = make_net(1);
  const auto x = make_input(2);
  const FeatureHook<float> two_place[] = {scale_hook(LayerId::kL3, 1.0f, HookKind::kPlace),
                                          scale_hook(LayerId::kL4, 1.0f, HookKind::kPlace)};
  CHECK_THROWS_AS(net.forward(x, Mode::kTrain, two_place), ContractError);
  const FeatureHook<float> reshaping[] = {
      {LayerId::kL2, HookKind::kOther, [](const Tensor<float>& t) { return reshape(t, {t.numel()}); }}};
  CHECK_THROWS_AS(net.forward(x, Mode::kTrain, reshaping), ContractError);
}

TEST_CASE("evaluation does not depend on batch composition") {
  auto net = make_net(3);
  const auto x = make_input(4);
  const auto all = net.forward(x, Mode::kEval);
  const auto first = net.forward(Tensor<float>::from({1, 3, 16, 16}, {x.values().begin(), x.values().begin() + 768}),
                                 Mode::kEval);
  for (std::size_t j = 0; j < 3; ++j) CHECK(all.logits.values()[j] == doctest::Approx(first.logits.values()[j]));
}

TEST_CASE("checkpoint round trip") {
  const fs::path dir = fs::temp_directory_path() / "placelab_test_ckpt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto net = make_net(1);
  // Train-mode forward moves the running statistics away from their defaults.
  net.forward(make_input(4), Mode::kTrain);
  net.save(dir / "a.ckpt");

  auto other = make_net(2);
  const auto x = make_input(3);
  CHECK(other.forward(x, Mode::kEval).logits.values() != net.forward(x, Mode::kEval).logits.values());
  other.load(dir / "a.ckpt");
  CHECK(other.forward(x, Mode::kEval).logits.values() == net.forward(x, Mode::kEval).logits.values());
  const auto a = net.state(), b = other.state();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].tensor.values() == b[i].tensor.values());
  }

  NetworkConfig wider = small_config();
  wider.widths[2] = 7;
  auto mismatched = make_net(1, wider);
  CHECK_THROWS(mismatched.load(dir / "a.ckpt"));
  CHECK_THROWS(other.load(dir / "missing.ckpt"));

  {
    std::fstream f(dir / "a.ckpt", std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  CHECK_THROWS(other.load(dir / "a.ckpt"));
  {
    std::ofstream f(dir / "short.ckpt", std::ios::binary);
    f.write("PLCK", 4);
  }
  CHECK_THROWS(other.load(dir / "short.ckpt"));
}

TEST_CASE("clone shares no storage") {
  auto net = make_net(1);
  auto copy = net.clone();
  const auto x = make_input(2);
  CHECK(copy.forward(x, Mode::kEval).logits.values() == net.forward(x, Mode::kEval).logits.values());
  for (auto& p : copy.parameters())
    for (float& v : p.data()) v += 1.0f;
  copy.forward(x, Mode::kTrain);
  const auto fresh = make_net(1);
  const auto a = net.state(), b = fresh.state();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].tensor.values() == b[i].tensor.values());
}

TEST_CASE("parameter bookkeeping") {
  auto net = make_net(1);
  std::size_t total = 0;
  for (const auto& p : net.parameters()) {
    CHECK(p.requires_grad());
    total += p.numel();
  }
  CHECK(total == net.parameter_count());
  // conv (w + b) + bn (scale + shift) per block, then the head
  const std::size_t expected = (4 * 3 * 9 + 4 + 8) + (6 * 4 * 9 + 6 + 12) + (6 * 6 * 9 + 6 + 12) +
                               (8 * 6 * 9 + 8 + 16) + (3 * 8 + 3);
  CHECK(total == expected);
}
