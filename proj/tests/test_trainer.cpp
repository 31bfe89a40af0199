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

#include <algorithm>
#include <cmath>
#include <vector>

#include "placelab/errors.hpp"
#include "placelab/trainer.hpp"

using namespace placelab;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.net.widths = {4, 6, 6, 8};
  cfg.raw_batch = 8;
  cfg.plan = {2, 3, false};
  cfg.sgd.lr0 = 0.01;
  return cfg;
}

const Split& tiny_split() {
  static const Split split = [] {
    const auto data = generate_dataset(1, 10, 16);
    return leave_one_out(data, 1, 0.1, 1);
  }();
  return split;
}

std::vector<std::vector<float>> flatten_state(const Network<float>& net) {
  std::vector<std::vector<float>> out;
  for (const auto& t : net.state()) out.push_back(t.tensor.values());
  return out;
}

// Two linearly separable classes: dark blobs vs bright blobs.
Split toy_split() {
  Split split;
  RandomStream rng({3, Purpose::kGeneric, 0, 0, 0});
  for (int i = 0; i < 48; ++i) {
    Sample s;
    s.label = i % 2;
    s.image = Image(3, 16, 16);
    for (float& v : s.image.pixels)
      v = static_cast<float>((s.label == 0 ? 0.2 : 0.7) + 0.1 * rng.uniform());
    (i < 40 ? split.train : split.val).push_back(s);
  }
  split.test = split.val;
  return split;
}

}  // namespace

TEST_CASE("sgd step reductions") {
  SgdConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 0.0;
  auto p = Tensor<float>::from({3}, {1.0f, -2.0f, 0.5f}, true);
  std::vector<Tensor<float>> params{p};
  std::copy_n(std::vector<float>{0.5f, 1.0f, -4.0f}.begin(), 3, p.mutable_grad().begin());
  std::vector<std::vector<float>> velocity;
  sgd_step(params, velocity, cfg, 0.1);
  CHECK(p.values()[0] == doctest::Approx(0.95));
  CHECK(p.values()[1] == doctest::Approx(-2.1));
  CHECK(p.values()[2] == doctest::Approx(0.9));
}

TEST_CASE("momentum accumulates over two steps") {
  SgdConfig cfg;
  cfg.momentum = 0.9;
  cfg.weight_decay = 0.0;
  auto q = Tensor<float>::from({1}, {0.0f}, true);
  std::vector<Tensor<float>> params{q};
  std::vector<std::vector<float>> velocity;
  const double lr = 0.01, g = 2.0;
  for (int step = 0; step < 2; ++step) {
    q.mutable_grad()[0] = static_cast<float>(g);
    sgd_step(params, velocity, cfg, lr);
  }
  CHECK(q.values()[0] == doctest::Approx(-lr * g * (1.0 + 1.9)).epsilon(1e-6));
}

TEST_CASE("weight decay shrinks parameters") {
  SgdConfig cfg;
  cfg.momentum = 0.0;
  cfg.weight_decay = 5e-4;
  auto q = Tensor<float>::from({1}, {1.0f}, true);
  std::vector<Tensor<float>> params{q};
  std::vector<std::vector<float>> velocity;
  q.mutable_grad()[0] = 0.0f;
  sgd_step(params, velocity, cfg, 1e-3);
  // 5e-7 is a few float ulps below 1
  CHECK(q.values()[0] < 1.0f);
  CHECK(1.0 - q.values()[0] == doctest::Approx(5e-7).epsilon(0.1));

  cfg.weight_decay = 0.1;
  auto r = Tensor<float>::from({2}, {2.0f, -4.0f}, true);
  std::vector<Tensor<float>> more{r};
  velocity.clear();
  r.mutable_grad()[0] = 0.0f;
  sgd_step(more, velocity, cfg, 0.5);
  CHECK(r.values()[0] == doctest::Approx(2.0 * 0.95));
  CHECK(r.values()[1] == doctest::Approx(-4.0 * 0.95));
}

TEST_CASE("sgd rejects non-finite gradients") {
  SgdConfig cfg;
  auto q = Tensor<float>::from({2}, {1.0f, 1.0f}, true);
  std::vector<Tensor<float>> params{q};
  std::vector<std::vector<float>> velocity;
  q.mutable_grad()[1] = std::nanf("");
  CHECK_THROWS_AS(sgd_step(params, velocity, cfg, 0.1), NumericalError);
}

TEST_CASE("learning rate schedule") {
  SgdConfig cfg;
  CHECK(lr_at(0, 30, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at(23, 30, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at(24, 30, cfg) == doctest::Approx(1e-4));
  CHECK(lr_at(29, 30, cfg) == doctest::Approx(1e-4));
  CHECK(lr_at(11, 15, cfg) == doctest::Approx(1e-3));
  CHECK(lr_at(12, 15, cfg) == doctest::Approx(1e-4));
  CHECK_THROWS_AS(lr_at(30, 30, cfg), ContractError);
}

TEST_CASE("batch composition") {
  const Split& split = tiny_split();
  std::vector<const Sample*> raw;
  for (std::size_t i = 0; i < 8; ++i) raw.push_back(&split.train[i * 7]);
  AugConfig aug;
  const Batch b = compose_batch(raw, aug, 5, 1, 2);
  REQUIRE(b.images.shape() == Shape{16, 3, 16, 16});
  REQUIRE(b.labels.size() == 16);
  for (std::size_t i = 0; i < 8; ++i) {
    CHECK(b.labels[i] == raw[i]->label);
    CHECK(b.labels[i + 8] == raw[i]->label);
  }
  const Batch again = compose_batch(raw, aug, 5, 1, 2);
  CHECK(again.images.values() == b.images.values());
  const Batch other = compose_batch(raw, aug, 5, 1, 3);
  CHECK(other.images.values() != b.images.values());

  // Sample i depends only on its own position, not on its neighbours.
  std::vector<const Sample*> swapped = raw;
  std::swap(swapped[3], swapped[5]);
  const Batch c = compose_batch(swapped, aug, 5, 1, 2);
  const std::size_t plane = 3 * 16 * 16;
  for (std::size_t j = 0; j < plane; ++j) CHECK(c.images.values()[j] == b.images.values()[j]);

  aug.standard_enabled = false;
  aug.rand_enabled = false;
  const Batch plain = compose_batch(raw, aug, 5, 1, 2);
  const auto v = plain.images.values();
  CHECK(std::equal(v.begin(), v.begin() + 8 * plane, v.begin() + 8 * plane));
  CHECK(std::equal(v.begin(), v.begin() + plane, raw[0]->image.pixels.begin()));
}

TEST_CASE("zero epochs return the initial network") {
  TrainConfig cfg = tiny_config();
  cfg.plan = {0, 0, false};
  const auto result = train(tiny_split(), cfg, 4);
  CHECK(result.log.empty());
  RandomStream init({4, Purpose::kInit, 0, 0, 0});
  const Network<float> fresh(cfg.net, init);
  CHECK(flatten_state(result.net) == flatten_state(fresh));
}

TEST_CASE("loss decreases on a separable toy problem") {
  TrainConfig cfg = tiny_config();
  cfg.net.num_classes = 2;
  cfg.plan = {5, 0, false};
  cfg.place.enabled = false;
  cfg.style.mode = StyleMode::kOff;
  cfg.aug.standard_enabled = false;
  cfg.aug.rand_enabled = false;
  cfg.sgd.decay_factor = 1.0;
  const auto result = train(toy_split(), cfg, 2);
  REQUIRE(result.log.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(result.log[e].train_loss < result.log[e - 1].train_loss);
  CHECK(result.log.back().val_acc == 1.0);
}

TEST_CASE("training log and determinism") {
  const TrainConfig cfg = tiny_config();
  std::vector<EpochLog> streamed;
  const auto a = train(tiny_split(), cfg, 9, [&](const EpochLog& l) { streamed.push_back(l); });
  const auto b = train(tiny_split(), cfg, 9);
  CHECK(flatten_state(a.net) == flatten_state(b.net));
  REQUIRE(a.log.size() == 5);
  CHECK(streamed.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    const EpochLog& l = a.log[i];
    CHECK(l.train_loss == b.log[i].train_loss);
    CHECK(std::isfinite(l.train_loss));
    CHECK(l.stage == (i < 2 ? 1 : 2));
    CHECK(l.epoch == (i < 2 ? i + 1 : i - 1));
    if (l.stage == 1) {
      CHECK(l.ratio == 0.0);
      CHECK(l.gamma == 0);
    } else {
      CHECK(l.ratio == schedule_ratio(static_cast<double>(l.epoch), 0.33, 4.0));
      const bool matches_layer = l.gamma == num_dropped(6, l.ratio) || l.gamma == num_dropped(8, l.ratio);
      CHECK(matches_layer);
    }
  }
  const auto c = train(tiny_split(), cfg, 10);
  CHECK(flatten_state(a.net) != flatten_state(c.net));
}

TEST_CASE("stage one does not depend on dropout settings") {
  TrainConfig with = tiny_config();
  TrainConfig without = tiny_config();
  without.place.enabled = false;
  const auto a = train(tiny_split(), with, 6);
  const auto b = train(tiny_split(), without, 6);
  for (std::size_t i = 0; i < 2; ++i) CHECK(a.log[i].train_loss == b.log[i].train_loss);
  CHECK(a.log[4].train_loss != b.log[4].train_loss);
  for (std::size_t i = 2; i < 5; ++i) CHECK(b.log[i].ratio == 0.0);

  // With dropout off, its other settings are irrelevant.
  TrainConfig tweaked = without;
  tweaked.place.p_max = 0.5;
  tweaked.place.candidate_layers = {LayerId::kL2};
  const auto c = train(tiny_split(), tweaked, 6);
  CHECK(flatten_state(b.net) == flatten_state(c.net));
}

TEST_CASE("resuming from a stage-one snapshot equals a full run") {
  const TrainConfig cfg = tiny_config();
  std::optional<StageSnapshot> snapshot;
  const auto full = train(tiny_split(), cfg, 12, {}, nullptr, &snapshot);
  REQUIRE(snapshot.has_value());
  CHECK(snapshot->log.size() == 2);
  std::size_t replayed = 0;
  const auto resumed = train(tiny_split(), cfg, 12, [&](const EpochLog&) { ++replayed; }, &*snapshot);
  CHECK(replayed == 5);
  CHECK(flatten_state(full.net) == flatten_state(resumed.net));
  for (std::size_t i = 0; i < 5; ++i) CHECK(full.log[i].train_loss == resumed.log[i].train_loss);

  TrainConfig longer = cfg;
  longer.plan.stage1_epochs = 3;
  CHECK_THROWS_AS(train(tiny_split(), longer, 12, {}, &*snapshot), ContractError);
}

TEST_CASE("one-stage mode drops from the first epoch") {
  TrainConfig cfg = tiny_config();
  cfg.plan = {0, 2, true};
  const auto result = train(tiny_split(), cfg, 3);
  REQUIRE(result.log.size() == 2);
  CHECK(result.log[0].ratio == schedule_ratio(1.0, 0.33, 4.0));

  cfg.plan = {1, 2, true};
  CHECK_THROWS_AS(cfg.plan.validate(), ConfigError);
}
