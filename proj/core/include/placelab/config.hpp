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
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "placelab/trainer.hpp"

namespace placelab {

enum class Method {
  kDeepAll,
  kDeepAllSwap,
  kDeepAllRand,
  kStrongBaseline,
  kStrongBaselinePlace,
  kOneStagePlace,
  kMixStyleBaseline,
};

inline constexpr std::array<Method, 7> kAllMethods = {
    Method::kDeepAll,         Method::kDeepAllSwap,          Method::kDeepAllRand,
    Method::kStrongBaseline,  Method::kStrongBaselinePlace,  Method::kOneStagePlace,
    Method::kMixStyleBaseline};

std::string_view to_string(Method method);
/// Throws ConfigError for unknown names.
Method parse_method(std::string_view text);

struct DataConfig {
  std::uint64_t seed = 0;
  std::size_t per_class = 300;
  std::size_t size = 32;
  double val_fraction = 0.1;

  void validate() const;
};

struct RunConfig {
  std::vector<Method> methods = {Method::kStrongBaselinePlace};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<int> targets = {0, 1, 2, 3};
  /// Worker threads; each (seed, target) pair runs on one of them.
  std::size_t jobs = 1;
  std::filesystem::path out = "runs";

  void validate() const;
};

struct ExperimentConfig {
  DataConfig data;
  /// Shared settings; per-method switches are applied by method_config().
  /// Networks train from scratch here, so the default rate is 1e-2 rather
  /// than the fine-tuning rate SgdConfig starts from.
  TrainConfig train = [] {
    TrainConfig t;
    t.sgd.lr0 = 1e-2;
    return t;
  }();
  RunConfig run;

  /// Validates every section; messages name the offending key.
  void validate() const;
};

/// Sets one dotted key. Throws ConfigError naming the key on unknown keys or
/// malformed values.
void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value);

/// Reads "key = value" lines; '#' starts a comment. Errors carry
/// "<source>:<line>:" prefixes.
ExperimentConfig parse_config(std::istream& in, std::string_view source = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text of every key, readable by parse_config. With
/// include_run = false the run.* section is omitted.
std::string dump_config(const ExperimentConfig& config, bool include_run = true);

/// Training configuration of `method` built from the shared settings.
///
///   method                 second half   style  dropout
///   deepall                standard      off    off
///   deepall+swap           standard      swap   off
///   deepall+rand           randomized    off    off
///   strong_baseline        randomized    swap   off
///   strong_baseline+place  randomized    swap   stage 2
///   one_stage_place        randomized    swap   every epoch (single stage)
///   mixstyle_baseline      randomized    mix    off
///
/// Dropout is applied only when base.place.enabled is set.
TrainConfig method_config(const TrainConfig& base, Method method);

/// Comma separated lists, whitespace ignored.
std::vector<std::string> split_list(std::string_view text);
std::vector<std::uint64_t> parse_seeds(std::string_view text);
/// "all" or a list of domain names or indices.
std::vector<int> parse_targets(std::string_view text);
std::vector<Method> parse_methods(std::string_view text);
std::vector<LayerId> parse_layers(std::string_view text);

}  // namespace placelab
