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


#include "placelab/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <istream>
#include <sstream>
#include <system_error>

#include "placelab/errors.hpp"

namespace placelab {

namespace {

constexpr std::array<std::string_view, 7> kMethodNames = {
    "deepall",         "deepall+swap",          "deepall+rand",     "strong_baseline",
    "strong_baseline+place", "one_stage_place", "mixstyle_baseline"};

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError(std::string(key) + ": invalid value '" + std::string(value) + "' (expected " +
                    std::string(expected) + ")");
}

double to_double(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) bad_value(key, value, "a number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "on") return true;
  if (value == "false" || value == "0" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::string fmt(double v) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string fmt(std::uint64_t v) { return std::to_string(v); }
std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename T, typename F>
std::string join(const std::vector<T>& items, F&& format) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ',';
    out += format(items[i]);
  }
  return out;
}

struct Key {
  std::string_view name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<Key>& keys() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    const auto num = [](std::string_view name, auto member) {
      return Key{name,
                 [name, member](ExperimentConfig& c, std::string_view v) { member(c) = to_double(name, v); },
                 [member](const ExperimentConfig& c) { return fmt(member(c)); }};
    };
    const auto count = [](std::string_view name, auto member) {
      return Key{name,
                 [name, member](ExperimentConfig& c, std::string_view v) {
                   member(c) = static_cast<std::remove_cvref_t<decltype(member(c))>>(to_u64(name, v));
                 },
                 [member](const ExperimentConfig& c) {
                   return fmt(static_cast<std::uint64_t>(member(c)));
                 }};
    };
    const auto flag = [](std::string_view name, auto member) {
      return Key{name,
                 [name, member](ExperimentConfig& c, std::string_view v) { member(c) = to_bool(name, v); },
                 [member](const ExperimentConfig& c) { return fmt(member(c)); }};
    };

    k.push_back(count("data.seed", [](auto& c) -> auto& { return c.data.seed; }));
    k.push_back(count("data.per_class", [](auto& c) -> auto& { return c.data.per_class; }));
    k.push_back(count("data.size", [](auto& c) -> auto& { return c.data.size; }));
    k.push_back(num("data.val_fraction", [](auto& c) -> auto& { return c.data.val_fraction; }));

    k.push_back(flag("place.enabled", [](auto& c) -> auto& { return c.train.place.enabled; }));
    k.push_back(num("place.p_max", [](auto& c) -> auto& { return c.train.place.p_max; }));
    k.push_back(num("place.v", [](auto& c) -> auto& { return c.train.place.v; }));
    k.push_back({"place.layers",
                 [](ExperimentConfig& c, std::string_view v) { c.train.place.candidate_layers = parse_layers(v); },
                 [](const ExperimentConfig& c) {
                   return join(c.train.place.candidate_layers, [](LayerId id) { return std::string(to_string(id)); });
                 }});

    k.push_back({"style.layers",
                 [](ExperimentConfig& c, std::string_view v) { c.train.style.layers = parse_layers(v); },
                 [](const ExperimentConfig& c) {
                   return join(c.train.style.layers, [](LayerId id) { return std::string(to_string(id)); });
                 }});
    k.push_back(num("style.eps", [](auto& c) -> auto& { return c.train.style.eps; }));
    k.push_back(num("style.probability", [](auto& c) -> auto& { return c.train.style.probability; }));

    k.push_back(count("aug.alpha", [](auto& c) -> auto& { return c.train.aug.policy.alpha; }));
    k.push_back(count("aug.beta", [](auto& c) -> auto& { return c.train.aug.policy.beta; }));
    k.push_back({"aug.pool",
                 [](ExperimentConfig& c, std::string_view v) {
                   std::vector<TransformSpec> pool;
                   for (const auto& name : split_list(v)) pool.push_back(transform_by_name(name));
                   if (pool.empty()) throw ConfigError("aug.pool must not be empty");
                   c.train.aug.policy.pool = std::move(pool);
                 },
                 [](const ExperimentConfig& c) {
                   return join(c.train.aug.policy.pool, [](const TransformSpec& s) { return std::string(s.name); });
                 }});
    k.push_back(flag("aug.standard.enabled", [](auto& c) -> auto& { return c.train.aug.standard_enabled; }));
    k.push_back(num("aug.standard.min_area", [](auto& c) -> auto& { return c.train.aug.standard.min_area; }));
    k.push_back(num("aug.standard.flip", [](auto& c) -> auto& { return c.train.aug.standard.flip_probability; }));
    k.push_back(num("aug.standard.jitter", [](auto& c) -> auto& { return c.train.aug.standard.jitter; }));
    k.push_back(num("aug.standard.grayscale",
                    [](auto& c) -> auto& { return c.train.aug.standard.grayscale_probability; }));
    k.push_back(flag("aug.rand.enabled", [](auto& c) -> auto& { return c.train.aug.rand_enabled; }));

    k.push_back(count("train.stage1_epochs", [](auto& c) -> auto& { return c.train.plan.stage1_epochs; }));
    k.push_back(count("train.stage2_epochs", [](auto& c) -> auto& { return c.train.plan.stage2_epochs; }));
    k.push_back(count("train.batch", [](auto& c) -> auto& { return c.train.raw_batch; }));
    k.push_back(num("train.lr", [](auto& c) -> auto& { return c.train.sgd.lr0; }));
    k.push_back(num("train.momentum", [](auto& c) -> auto& { return c.train.sgd.momentum; }));
    k.push_back(num("train.weight_decay", [](auto& c) -> auto& { return c.train.sgd.weight_decay; }));
    k.push_back(num("train.decay_factor", [](auto& c) -> auto& { return c.train.sgd.decay_factor; }));
    k.push_back(num("train.decay_at", [](auto& c) -> auto& { return c.train.sgd.decay_at_fraction; }));
    k.push_back(flag("train.nesterov", [](auto& c) -> auto& { return c.train.sgd.nesterov; }));
    k.push_back(flag("train.global_decay", [](auto& c) -> auto& { return c.train.sgd.global_decay; }));
    k.push_back(flag("train.eval_each_epoch", [](auto& c) -> auto& { return c.train.evaluate_each_epoch; }));

    k.push_back({"run.methods", [](ExperimentConfig& c, std::string_view v) { c.run.methods = parse_methods(v); },
                 [](const ExperimentConfig& c) {
                   return join(c.run.methods, [](Method m) { return std::string(to_string(m)); });
                 }});
    k.push_back({"run.seeds", [](ExperimentConfig& c, std::string_view v) { c.run.seeds = parse_seeds(v); },
                 [](const ExperimentConfig& c) { return join(c.run.seeds, [](std::uint64_t s) { return fmt(s); }); }});
    k.push_back({"run.targets", [](ExperimentConfig& c, std::string_view v) { c.run.targets = parse_targets(v); },
                 [](const ExperimentConfig& c) {
                   return join(c.run.targets, [](int d) { return std::string(domain_name(d)); });
                 }});
    k.push_back(count("run.jobs", [](auto& c) -> auto& { return c.run.jobs; }));
    k.push_back({"run.out", [](ExperimentConfig& c, std::string_view v) { c.run.out = std::string(v); },
                 [](const ExperimentConfig& c) { return c.run.out.string(); }});
    return k;
  }();
  return table;
}

}  // namespace

std::string_view to_string(Method method) { return kMethodNames[static_cast<std::size_t>(method)]; }

Method parse_method(std::string_view text) {
  for (Method m : kAllMethods) {
    if (text == to_string(m)) return m;
  }
  std::string known;
  for (auto name : kMethodNames) known += (known.empty() ? "" : ", ") + std::string(name);
  throw ConfigError("unknown method '" + std::string(text) + "' (known: " + known + ")");
}

void DataConfig::validate() const {
  if (per_class == 0) throw ConfigError("data.per_class must be positive");
  if (size < 16 || size % 16 != 0) throw ConfigError("data.size must be a positive multiple of 16");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("data.val_fraction must lie in [0, 1)");
}

void RunConfig::validate() const {
  if (methods.empty()) throw ConfigError("run.methods must not be empty");
  if (seeds.empty()) throw ConfigError("run.seeds must not be empty");
  if (targets.empty()) throw ConfigError("run.targets must not be empty");
  if (jobs == 0) throw ConfigError("run.jobs must be positive");
  if (out.empty()) throw ConfigError("run.out must not be empty");
  for (int t : targets) {
    if (t < 0 || t >= static_cast<int>(kNumDomains)) {
      throw ConfigError("run.targets: no domain " + std::to_string(t));
    }
  }
  const auto has_duplicates = [](auto items) {
    std::sort(items.begin(), items.end());
    return std::adjacent_find(items.begin(), items.end()) != items.end();
  };
  if (has_duplicates(methods)) throw ConfigError("run.methods lists a method twice");
  if (has_duplicates(seeds)) throw ConfigError("run.seeds lists a seed twice");
  if (has_duplicates(targets)) throw ConfigError("run.targets lists a domain twice");
}

void ExperimentConfig::validate() const {
  data.validate();
  run.validate();
  for (Method m : run.methods) method_config(train, m).validate();
  const std::size_t sources = data.per_class * (kNumDomains - 1) * kNumClasses;
  const auto val_per_cell = static_cast<std::size_t>(data.val_fraction * data.per_class + 0.5);
  if ((data.per_class - val_per_cell) * (kNumDomains - 1) * kNumClasses < train.raw_batch || sources == 0) {
    throw ConfigError("train.batch exceeds the number of training samples");
  }
}

void apply_setting(ExperimentConfig& config, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const Key& k : keys()) {
    if (k.name == key) {
      k.set(config, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::istream& in, std::string_view source) {
  ExperimentConfig config;
  std::vector<std::string> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view text = line;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const std::string where = std::string(source) + ":" + std::to_string(number) + ": ";
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key(trim(text.substr(0, eq)));
    if (std::find(seen.begin(), seen.end(), key) != seen.end()) {
      throw ConfigError(where + "key '" + key + "' set twice");
    }
    seen.push_back(key);
    try {
      apply_setting(config, key, text.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.string());
}

std::string dump_config(const ExperimentConfig& config, bool include_run) {
  std::ostringstream out;
  for (const Key& k : keys()) {
    if (!include_run && k.name.starts_with("run.")) continue;
    out << k.name << " = " << k.get(config) << '\n';
  }
  return out.str();
}

TrainConfig method_config(const TrainConfig& base, Method method) {
  TrainConfig c = base;
  c.place.enabled = false;
  c.plan.one_stage_mode = false;
  switch (method) {
    case Method::kDeepAll:
      c.style.mode = StyleMode::kOff;
      c.aug.rand_enabled = false;
      break;
    case Method::kDeepAllSwap:
      c.style.mode = StyleMode::kSwap;
      c.aug.rand_enabled = false;
      break;
    case Method::kDeepAllRand:
      c.style.mode = StyleMode::kOff;
      break;
    case Method::kStrongBaseline:
      c.style.mode = StyleMode::kSwap;
      break;
    case Method::kStrongBaselinePlace:
      c.style.mode = StyleMode::kSwap;
      c.place.enabled = base.place.enabled;
      break;
    case Method::kOneStagePlace:
      c.style.mode = StyleMode::kSwap;
      c.place.enabled = base.place.enabled;
      c.plan.stage2_epochs = base.plan.total_epochs();
      c.plan.stage1_epochs = 0;
      c.plan.one_stage_mode = true;
      break;
    case Method::kMixStyleBaseline:
      c.style.mode = StyleMode::kMix;
      break;
  }
  return c;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = text.find(',');
    const auto item = trim(text.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    text = text.substr(comma + 1);
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(std::string_view text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) out.push_back(to_u64("run.seeds", item));
  return out;
}

std::vector<int> parse_targets(std::string_view text) {
  if (trim(text) == "all") return {0, 1, 2, 3};
  std::vector<int> out;
  for (const auto& item : split_list(text)) {
    if (item.size() == 1 && item[0] >= '0' && item[0] < static_cast<char>('0' + kNumDomains)) {
      out.push_back(item[0] - '0');
    } else {
      out.push_back(parse_domain(item));
    }
  }
  return out;
}

std::vector<Method> parse_methods(std::string_view text) {
  std::vector<Method> out;
  for (const auto& item : split_list(text)) out.push_back(parse_method(item));
  return out;
}

std::vector<LayerId> parse_layers(std::string_view text) {
  std::vector<LayerId> out;
  for (const auto& item : split_list(text)) out.push_back(parse_layer(item));
  return out;
}

}  // namespace placelab
