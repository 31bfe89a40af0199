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


// placelab command line: data generation, training runs, sweeps, checks.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "placelab/config.hpp"
#include "placelab/errors.hpp"
#include "placelab/experiment.hpp"
#include "placelab/gradcheck.hpp"
#include "placelab/metrics.hpp"
#include "placelab/synthetic.hpp"

namespace fs = std::filesystem;
using namespace placelab;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kNumericalAbort = 2, kTestFailure = 3 };

struct CommonOptions {
  std::string config;
  std::string out;
  std::string seeds;
  std::string methods;
  std::string targets;
  std::vector<std::string> settings;
  bool fresh = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool run_flags) {
  cmd->add_option("--config", o.config, "Config file (key = value lines)");
  cmd->add_option("--out", o.out, "Output directory (overrides run.out)");
  cmd->add_option("--set", o.settings, "Extra key=value setting, applied after the file");
  if (!run_flags) return;
  cmd->add_option("--seeds", o.seeds, "Comma separated seeds (overrides run.seeds)");
  cmd->add_option("--method", o.methods, "Comma separated methods (overrides run.methods)");
  cmd->add_option("--target", o.targets, "Target domain name, index, list or 'all'");
  cmd->add_flag("--fresh", o.fresh, "Retrain runs even when results exist");
  cmd->add_flag("--quiet", o.quiet, "No per-run progress lines");
}

// gen-data only needs the data section to be valid.
ExperimentConfig build_config(const CommonOptions& o, bool data_only = false) {
  ExperimentConfig config = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  for (const std::string& s : o.settings) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    apply_setting(config, s.substr(0, eq), s.substr(eq + 1));
  }
  if (!o.out.empty()) config.run.out = o.out;
  if (!o.seeds.empty()) config.run.seeds = parse_seeds(o.seeds);
  if (!o.methods.empty()) config.run.methods = parse_methods(o.methods);
  if (!o.targets.empty()) config.run.targets = parse_targets(o.targets);
  if (data_only) {
    config.data.validate();
  } else {
    config.validate();
  }
  return config;
}

ExperimentOptions run_options(const CommonOptions& o) {
  return {!o.fresh, o.quiet ? nullptr : &std::cerr};
}

void finish(const std::vector<ReportRow>& rows, const ExperimentConfig& config) {
  print_means(std::cout, method_means(rows));
  std::cout << "metrics: " << (config.run.out / "metrics.csv").string() << '\n';
}

std::vector<std::vector<LayerId>> parse_sets(const std::string& text) {
  std::vector<std::vector<LayerId>> sets;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ';')) {
    std::vector<LayerId> set;
    std::string part;
    std::stringstream parts(item);
    while (std::getline(parts, part, '+')) {
      part.erase(0, part.find_first_not_of(' '));
      part.erase(part.find_last_not_of(' ') + 1);
      if (part == "none") continue;
      set.push_back(parse_layer(part));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Progressive channel dropout experiments on synthetic domains"};
  app.require_subcommand(1);

  CommonOptions common;

  auto* gen = app.add_subcommand("gen-data", "Render the synthetic domains as PPM files");
  add_common(gen, common, false);

  auto* train_cmd = app.add_subcommand("train", "Train every (seed, target, method) run");
  add_common(train_cmd, common, true);

  std::string checkpoint;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a held-out domain");
  add_common(eval, common, false);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--target", common.targets, "Held-out domain")->required();

  std::vector<double> pmax_values = {0.1, 0.2, 0.33, 0.5};
  auto* sweep_p = app.add_subcommand("sweep-pmax", "One experiment per maximum dropout ratio");
  add_common(sweep_p, common, true);
  sweep_p->add_option("--values", pmax_values, "Ratios in (0, 1)")->delimiter(',');

  std::string sets_text;
  auto* sweep_l = app.add_subcommand("sweep-layers", "One experiment per candidate layer set");
  add_common(sweep_l, common, true);
  sweep_l->add_option("--sets", sets_text, "Sets like 'L3;L4;L3+L4;none' (default: the 11 ablation sets)");

  bool inject_fault = false;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference checks of every backward rule");
  grad->add_flag("--inject-fault", inject_fault, "Add a deliberately wrong backward rule");

  std::string metrics_path;
  auto* report = app.add_subcommand("report", "Per-method means of a metrics file");
  report->add_option("metrics", metrics_path, "metrics.csv or a run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  try {
    if (*gen) {
      const ExperimentConfig config = build_config(common, true);
      const fs::path dir = config.run.out / "data";
      export_ppm(generate_dataset(config.data.seed, config.data.per_class, config.data.size), dir);
      std::cout << "wrote " << kNumDomains * kNumClasses * config.data.per_class << " images to "
                << dir.string() << '\n';
    } else if (*train_cmd) {
      const ExperimentConfig config = build_config(common);
      finish(run_experiment(config, run_options(common)), config);
    } else if (*eval) {
      ExperimentConfig config = build_config(common);
      const std::vector<int> targets = parse_targets(common.targets);
      if (targets.size() != 1) throw ConfigError("--target: eval takes exactly one domain");
      const auto datasets = generate_dataset(config.data.seed, config.data.per_class, config.data.size);
      const Split split = leave_one_out(datasets, targets[0], config.data.val_fraction, config.data.seed);
      RandomStream init({0, Purpose::kInit, 0, 0, 0});
      Network<float> net(config.train.net, init);
      net.load(checkpoint);
      std::vector<Sample> source = split.train;
      source.insert(source.end(), split.val.begin(), split.val.end());
      std::vector<int> domains, labels;
      for (const Sample& s : source) {
        domains.push_back(s.domain);
        labels.push_back(s.label);
      }
      const auto summary = summarize_features(extract_features(net, source), domains, labels, kNumClasses);
      std::cout << "target " << domain_name(targets[0]) << " accuracy " << evaluate(net, split.test).accuracy
                << "\ninter_domain " << inter_domain_distance(summary) << "\nintra_class "
                << intra_class_distance(summary) << '\n';
    } else if (*sweep_p) {
      const ExperimentConfig config = build_config(common);
      finish(sweep_pmax(config, pmax_values, run_options(common)), config);
    } else if (*sweep_l) {
      const ExperimentConfig config = build_config(common);
      const auto sets = sets_text.empty() ? default_layer_sets() : parse_sets(sets_text);
      finish(sweep_layers(config, sets, run_options(common)), config);
    } else if (*grad) {
      auto cases = default_gradcheck_cases();
      if (inject_fault) cases.push_back(faulty_gradcheck_case());
      const auto results = run_gradcheck(cases);
      if (!print_gradcheck(std::cout, results)) {
        for (const auto& r : results) {
          if (!r.passed) {
            std::cerr << "gradcheck failed: " << r.op << " (max relative error " << r.max_rel_error << ")\n";
            break;
          }
        }
        return kTestFailure;
      }
    } else if (*report) {
      fs::path path = metrics_path;
      if (fs::is_directory(path)) path /= "metrics.csv";
      print_means(std::cout, method_means(read_metrics_csv(path)));
    }
  } catch (const NumericalError& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kNumericalAbort;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return kOk;
}
