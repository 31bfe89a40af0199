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

#include <cmath>
#include <set>
#include <vector>

#include "placelab/errors.hpp"
#include "placelab/rng.hpp"

using namespace placelab;

TEST_CASE("philox4x32-10 known answers") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are pure functions of their key") {
  const StreamKey key{42, Purpose::kRandAug, 3, 17, 5};
  RandomStream a(key), b(key);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u32() == b.next_u32());

  std::set<std::uint32_t> firsts;
  for (std::uint32_t s = 0; s < 8; ++s) {
    firsts.insert(RandomStream({42, Purpose::kRandAug, 3, 17, s}).next_u32());
    firsts.insert(RandomStream({42, Purpose::kStandardAug, 3, 17, s}).next_u32());
  }
  firsts.insert(RandomStream({43, Purpose::kRandAug, 3, 17, 0}).next_u32());
  firsts.insert(RandomStream({42, Purpose::kRandAug, 4, 17, 0}).next_u32());
  firsts.insert(RandomStream({42, Purpose::kRandAug, 3, 18, 0}).next_u32());
  CHECK(firsts.size() == 19);
}

TEST_CASE("epoch field overflow is rejected") {
  CHECK_THROWS_AS(RandomStream({0, Purpose::kGeneric, 1u << 20, 0, 0}), ContractError);
  CHECK_NOTHROW(RandomStream({0, Purpose::kGeneric, (1u << 20) - 1, 0, 0}));
}

TEST_CASE("uniform moments") {
  RandomStream rng({7, Purpose::kGeneric, 0, 0, 0});
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  // Mean 1/2 with standard error sqrt(1/12/n).
  CHECK(std::abs(sum / n - 0.5) < 4 * std::sqrt(1.0 / 12 / n));
  CHECK(std::abs(sq / n - sum / n * (sum / n) - 1.0 / 12) < 2e-3);
}

TEST_CASE("bounded integers are uniform") {
  RandomStream rng({9, Purpose::kGeneric, 0, 0, 0});
  const std::uint32_t k = 7;
  const int n = 70000;
  std::vector<int> counts(k, 0);
  for (int i = 0; i < n; ++i) {
    const auto v = rng.below(k);
    REQUIRE(v < k);
    ++counts[v];
  }
  const double expected = static_cast<double>(n) / k;
  const double sd = std::sqrt(n * (1.0 / k) * (1.0 - 1.0 / k));
  for (int c : counts) CHECK(std::abs(c - expected) < 4 * sd);
  CHECK(rng.below(1) == 0u);
}

TEST_CASE("normal moments") {
  RandomStream rng({11, Purpose::kGeneric, 0, 0, 0});
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 0.02);
}

TEST_CASE("bernoulli endpoints") {
  RandomStream rng({1, Purpose::kGeneric, 0, 0, 0});
  for (int i = 0; i < 1000; ++i) {
    CHECK_FALSE(rng.bernoulli(0.0));
    CHECK(rng.bernoulli(1.0));
  }
}
