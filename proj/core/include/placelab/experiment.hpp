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
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "placelab/config.hpp"

namespace placelab {

/// One trained (seed, target, method) run.
struct ReportRow {
  std::string run_id;
  std::uint64_t seed = 0;
  Method method = Method::kDeepAll;
  int target = 0;
  double test_acc = 0.0;
  /// Discrepancies of the final model on source-domain features.
  double inter_domain = 0.0;
  double intra_class = 0.0;
  /// Sweep label ("" for plain runs); also the run_id prefix.
  std::string tag;
};

/// A full configuration run under a label.
struct Variant {
  std::string tag;
  ExperimentConfig config;
};

struct ExperimentOptions {
  /// Skip runs whose result file exists and matches the configuration.
  bool resume = true;
  /// Progress lines; nullptr for silence.
  std::ostream* progress = nullptr;
};

/// "<tag>-<method>-s<seed>-<target>", without the tag part when it is empty.
std::string make_run_id(const std::string& tag, Method method, std::uint64_t seed, int target);

/// Trains every (seed x target x method) of each variant and writes, under
/// the first variant's run.out:
///   metrics.csv            one row per run, sorted
///   logs/<id>.csv          per-epoch log
///   checkpoints/<id>.ckpt  final model
///   runs/<id>.row          per-run result used for resuming
/// All variants must share the data settings. Returns the rows in
/// metrics.csv order.
std::vector<ReportRow> run_variants(std::span<const Variant> variants,
                                    const ExperimentOptions& options = {});

std::vector<ReportRow> run_experiment(const ExperimentConfig& config,
                                      const ExperimentOptions& options = {});

/// One run per value with only place.p_max changed; tags "pmax_<value>".
std::vector<ReportRow> sweep_pmax(const ExperimentConfig& config, std::span<const double> values,
                                  const ExperimentOptions& options = {});

/// One run per candidate set, taken in layer order; tags "layers_L3+L4". An
/// empty set is the reference group without dropout (tag "layers_none",
/// dropout methods replaced by strong_baseline). Duplicate sets are a
/// ConfigError.
std::vector<ReportRow> sweep_layers(const ExperimentConfig& config,
                                    std::span<const std::vector<LayerId>> sets,
                                    const ExperimentOptions& options = {});

/// The ten candidate sets of the layer ablation plus the empty reference set.
std::vector<std::vector<LayerId>> default_layer_sets();

void write_metrics_csv(std::span<const ReportRow> rows, const std::filesystem::path& path);
std::vector<ReportRow> read_metrics_csv(const std::filesystem::path& path);

struct MethodMean {
  std::string tag;
  Method method = Method::kDeepAll;
  std::size_t runs = 0;
  double test_acc = 0.0;
  double inter_domain = 0.0;
  double intra_class = 0.0;
};

/// Means over targets and seeds per (tag, method), in row order.
std::vector<MethodMean> method_means(std::span<const ReportRow> rows);
void print_means(std::ostream& out, std::span<const MethodMean> means);

}  // namespace placelab
