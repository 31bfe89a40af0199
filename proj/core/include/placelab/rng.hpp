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
#include <cstdint>

namespace placelab {

/// What a random stream is used for. Distinct purposes never share counters.
enum class Purpose : std::uint32_t {
  kGeneric = 0,
  kDataGen = 1,
  kSplit = 2,
  kInit = 3,
  kShuffle = 4,
  kStandardAug = 5,
  kRandAug = 6,
  kStyle = 7,
  kPlaceLayer = 8,
  kPlaceMask = 9,
  kMixLambda = 10,
};

/// Coordinates of a stream. Every random draw in a run is addressed by
/// (seed, purpose, epoch, iteration, sample), so outputs never depend on the
/// order in which samples or runs are processed.
struct StreamKey {
  std::uint64_t seed = 0;
  Purpose purpose = Purpose::kGeneric;
  std::uint32_t epoch = 0;
  std::uint32_t iteration = 0;
  std::uint32_t sample = 0;
};

/// Philox4x32-10 block function.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

/// Counter-based random stream. The key is the run seed; the counter packs
/// the remaining StreamKey fields plus a block index that advances per draw.
///
/// All distributions are implemented here rather than through <random> so
/// that generated values are identical across standard libraries.
class RandomStream {
 public:
  explicit RandomStream(const StreamKey& key);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n); n must be positive.
  std::uint32_t below(std::uint32_t n);

  bool bernoulli(double p);

  /// Standard normal (Box-Muller).
  double normal();

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> counter_{};
  std::array<std::uint32_t, 4> block_{};
  int cursor_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace placelab
