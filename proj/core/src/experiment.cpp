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


#include "placelab/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

#include "placelab/errors.hpp"
#include "placelab/metrics.hpp"

namespace placelab {

namespace fs = std::filesystem;

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

std::string fixed(double v, int digits) {
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", digits, v);
  return buf.data();
}

std::string_view style_name(StyleMode mode) {
  return mode == StyleMode::kOff ? "off" : mode == StyleMode::kSwap ? "swap" : "mix";
}

// Everything that influences a run's outcome.
std::string run_fingerprint(const ExperimentConfig& config, const TrainConfig& train, Method method,
                            std::uint64_t seed, int target) {
  ExperimentConfig c = config;
  c.train = train;
  std::ostringstream text;
  text << dump_config(c, false) << "method = " << to_string(method) << "\nseed = " << seed
       << "\ntarget = " << target << '\n';
  return hex(fnv1a(text.str()));
}

// Everything stage 1 depends on. Dropout settings only act in stage 2, and
// the stage-2 length matters only through a global decay boundary.
std::string stage1_key(const ExperimentConfig& config, const TrainConfig& train) {
  ExperimentConfig c = config;
  c.train = train;
  c.train.place = PlaceConfig{};
  if (!train.sgd.global_decay) c.train.plan.stage2_epochs = 0;
  std::ostringstream text;
  text << dump_config(c, false) << "style = " << style_name(train.style.mode)
       << "\nstandard = " << train.aug.standard_enabled << "\nrand = " << train.aug.rand_enabled << '\n';
  return text.str();
}

std::string row_line(const ReportRow& r) {
  std::ostringstream out;
  out << r.run_id << ',' << r.seed << ',' << to_string(r.method) << ',' << domain_name(r.target) << ','
      << fixed(r.test_acc, 6) << ',' << fixed(r.inter_domain, 6) << ',' << fixed(r.intra_class, 6);
  return out.str();
}

constexpr std::string_view kMetricsHeader = "run_id,seed,method,target_domain,test_acc,inter_domain,intra_class";
constexpr std::string_view kLogHeader = "run_id,seed,stage,epoch,lr,P,gamma,train_loss,val_acc,test_acc";

// Writes through a temporary file so readers never see a partial file.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, path);
}

ReportRow parse_row(const std::string& line, const std::string& where) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) f.push_back(cell);
  if (f.size() != 7) throw ConfigError(where + ": expected 7 columns");
  ReportRow r;
  r.run_id = f[0];
  try {
    r.seed = std::stoull(f[1]);
    r.method = parse_method(f[2]);
    r.target = parse_domain(f[3]);
    r.test_acc = std::stod(f[4]);
    r.inter_domain = std::stod(f[5]);
    r.intra_class = std::stod(f[6]);
  } catch (const std::logic_error&) {
    throw ConfigError(where + ": malformed row");
  }
  const std::string suffix = make_run_id("", r.method, r.seed, r.target);
  if (r.run_id.size() > suffix.size() + 1 && r.run_id.ends_with("-" + suffix)) {
    r.tag = r.run_id.substr(0, r.run_id.size() - suffix.size() - 1);
  }
  return r;
}

std::string log_csv(const std::string& id, std::uint64_t seed, const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << kLogHeader << '\n';
  for (const EpochLog& e : log) {
    std::array<char, 32> lr{};
    std::snprintf(lr.data(), lr.size(), "%.9g", e.lr);
    out << id << ',' << seed << ',' << e.stage << ',' << e.epoch << ',' << lr.data() << ','
        << fixed(e.ratio, 9) << ',' << e.gamma << ',' << fixed(e.train_loss, 6) << ','
        << fixed(e.val_acc, 6) << ',' << fixed(e.test_acc, 6) << '\n';
  }
  return out.str();
}

struct Job {
  const Variant* variant;
  Method method;
  TrainConfig train;
  std::string id;
  std::string fingerprint;
  std::string stage1;
};

struct SourceView {
  std::vector<Sample> samples;
  std::vector<int> domains;
  std::vector<int> labels;
};

SourceView source_view(const Split& split) {
  SourceView v;
  v.samples = split.train;
  v.samples.insert(v.samples.end(), split.val.begin(), split.val.end());
  for (const Sample& s : v.samples) {
    v.domains.push_back(s.domain);
    v.labels.push_back(s.label);
  }
  return v;
}

bool read_done(const fs::path& path, const std::string& fingerprint, ReportRow& row) {
  std::ifstream in(path);
  std::string header, line;
  if (!in || !std::getline(in, header) || !std::getline(in, line)) return false;
  if (header != "# " + fingerprint) return false;
  row = parse_row(line, path.string());
  return true;
}

}  // namespace

std::string make_run_id(const std::string& tag, Method method, std::uint64_t seed, int target) {
  std::string id = tag.empty() ? "" : tag + "-";
  id += std::string(to_string(method)) + "-s" + std::to_string(seed) + "-" + std::string(domain_name(target));
  return id;
}

std::vector<ReportRow> run_variants(std::span<const Variant> variants, const ExperimentOptions& options) {
  if (variants.empty()) throw ConfigError("no experiment variants given");
  for (const Variant& v : variants) {
    try {
      v.config.validate();
    } catch (const ConfigError& e) {
      throw ConfigError((v.tag.empty() ? "" : "[" + v.tag + "] ") + e.what());
    }
    if (v.config.data.seed != variants[0].config.data.seed ||
        v.config.data.per_class != variants[0].config.data.per_class ||
        v.config.data.size != variants[0].config.data.size ||
        v.config.data.val_fraction != variants[0].config.data.val_fraction) {
      throw ConfigError("sweep variants must share the data.* settings");
    }
  }
  const RunConfig& run = variants[0].config.run;
  const DataConfig& data = variants[0].config.data;
  const fs::path out = run.out;
  fs::create_directories(out / "runs");
  fs::create_directories(out / "logs");
  fs::create_directories(out / "checkpoints");

  // Runs grouped by (seed, target); a group runs sequentially so stage-1
  // snapshots can be shared among its methods.
  std::map<std::pair<std::uint64_t, int>, std::vector<Job>> groups;
  std::vector<std::string> order;
  for (const Variant& v : variants) {
    for (std::uint64_t seed : v.config.run.seeds) {
      for (int target : v.config.run.targets) {
        for (Method m : v.config.run.methods) {
          Job job{&v, m, method_config(v.config.train, m), make_run_id(v.tag, m, seed, target), {}, {}};
          job.fingerprint = run_fingerprint(v.config, job.train, m, seed, target);
          job.stage1 = stage1_key(v.config, job.train);
          if (std::find(order.begin(), order.end(), job.id) != order.end()) {
            throw ConfigError("run " + job.id + " appears twice");
          }
          order.push_back(job.id);
          groups[{seed, target}].push_back(std::move(job));
        }
      }
    }
  }

  const auto datasets = generate_dataset(data.seed, data.per_class, data.size);
  std::vector<std::pair<std::pair<std::uint64_t, int>, std::vector<Job>*>> work;
  for (auto& [key, jobs] : groups) work.emplace_back(key, &jobs);

  std::mutex mutex;
  std::map<std::string, ReportRow> results;
  std::exception_ptr failure;
  std::atomic<std::size_t> next{0};

  const auto progress = [&](const std::string& line) {
    if (options.progress == nullptr) return;
    std::lock_guard lock(mutex);
    *options.progress << line << std::endl;
  };

  const auto worker = [&] {
    while (true) {
      const std::size_t index = next.fetch_add(1);
      if (index >= work.size()) return;
      {
        std::lock_guard lock(mutex);
        if (failure) return;
      }
      const auto [seed, target] = work[index].first;
      try {
        const Split split = leave_one_out(datasets, target, data.val_fraction, data.seed);
        const SourceView source = source_view(split);
        std::map<std::string, StageSnapshot> snapshots;
        for (const Job& job : *work[index].second) {
          const fs::path done = out / "runs" / (job.id + ".row");
          ReportRow row;
          if (options.resume && read_done(done, job.fingerprint, row) &&
              fs::exists(out / "logs" / (job.id + ".csv")) &&
              fs::exists(out / "checkpoints" / (job.id + ".ckpt"))) {
            row.tag = job.variant->tag;
            progress(job.id + " reused");
            std::lock_guard lock(mutex);
            results[job.id] = row;
            continue;
          }
          const bool shareable = job.train.plan.stage1_epochs > 0;
          const auto cached = shareable ? snapshots.find(job.stage1) : snapshots.end();
          std::optional<StageSnapshot> captured;
          const bool capture = shareable && cached == snapshots.end();
          TrainResult result = [&] {
            try {
              return train(split, job.train, seed, {}, cached != snapshots.end() ? &cached->second : nullptr,
                           capture ? &captured : nullptr);
            } catch (const NumericalError& e) {
              throw NumericalError("run " + job.id + ": " + e.what());
            }
          }();
          if (captured) snapshots.emplace(job.stage1, std::move(*captured));

          row.run_id = job.id;
          row.seed = seed;
          row.method = job.method;
          row.target = target;
          row.tag = job.variant->tag;
          row.test_acc = result.log.empty() ? evaluate(result.net, split.test).accuracy
                                            : result.log.back().test_acc;
          const FeatureMatrix features = extract_features(result.net, source.samples);
          const auto summary = summarize_features(features, source.domains, source.labels, kNumClasses);
          row.inter_domain = inter_domain_distance(summary);
          row.intra_class = intra_class_distance(summary);

          write_atomic(out / "logs" / (job.id + ".csv"), log_csv(job.id, seed, result.log));
          const fs::path ckpt = out / "checkpoints" / (job.id + ".ckpt");
          result.net.save(ckpt.string() + ".tmp");
          fs::rename(ckpt.string() + ".tmp", ckpt);
          write_atomic(done, "# " + job.fingerprint + "\n" + row_line(row) + "\n");
          progress(job.id + " test_acc=" + fixed(row.test_acc, 4) + " inter=" + fixed(row.inter_domain, 4) +
                   " intra=" + fixed(row.intra_class, 4));
          std::lock_guard lock(mutex);
          results[job.id] = row;
        }
      } catch (...) {
        std::lock_guard lock(mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t threads = std::min(run.jobs, work.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<ReportRow> rows;
  rows.reserve(order.size());
  for (const std::string& id : order) rows.push_back(results.at(id));
  // Variant order, then method, seed, target.
  std::stable_sort(rows.begin(), rows.end(), [&](const ReportRow& a, const ReportRow& b) {
    const auto tag_rank = [&](const std::string& tag) {
      for (std::size_t i = 0; i < variants.size(); ++i) {
        if (variants[i].tag == tag) return i;
      }
      return variants.size();
    };
    return std::tuple(tag_rank(a.tag), a.method, a.seed, a.target) <
           std::tuple(tag_rank(b.tag), b.method, b.seed, b.target);
  });
  write_metrics_csv(rows, out / "metrics.csv");
  return rows;
}

std::vector<ReportRow> run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  const Variant variant{"", config};
  return run_variants(std::span(&variant, 1), options);
}

std::vector<ReportRow> sweep_pmax(const ExperimentConfig& config, std::span<const double> values,
                                  const ExperimentOptions& options) {
  if (values.empty()) throw ConfigError("sweep-pmax: no values given");
  std::vector<Variant> variants;
  for (double p : values) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("sweep-pmax: value " + std::to_string(p) + " outside (0, 1)");
    Variant v{"", config};
    v.config.train.place.p_max = p;
    std::array<char, 32> buf{};
    std::snprintf(buf.data(), buf.size(), "pmax_%g", p);
    v.tag = buf.data();
    for (const Variant& other : variants) {
      if (other.tag == v.tag) throw ConfigError("sweep-pmax: value " + v.tag.substr(5) + " listed twice");
    }
    variants.push_back(std::move(v));
  }
  return run_variants(variants, options);
}

std::vector<ReportRow> sweep_layers(const ExperimentConfig& config, std::span<const std::vector<LayerId>> sets,
                                    const ExperimentOptions& options) {
  if (sets.empty()) throw ConfigError("sweep-layers: no layer sets given");
  std::vector<Variant> variants;
  std::vector<std::vector<LayerId>> seen;
  for (const auto& set : sets) {
    auto sorted = set;
    std::sort(sorted.begin(), sorted.end());
    if (std::find(seen.begin(), seen.end(), sorted) != seen.end()) {
      throw ConfigError("sweep-layers: layer set listed twice");
    }
    seen.push_back(sorted);
    Variant v{"layers_", config};
    if (set.empty()) {
      // Reference group without dropout.
      v.tag += "none";
      std::vector<Method> methods;
      for (Method m : config.run.methods) {
        const Method plain =
            m == Method::kStrongBaselinePlace || m == Method::kOneStagePlace ? Method::kStrongBaseline : m;
        if (std::find(methods.begin(), methods.end(), plain) == methods.end()) methods.push_back(plain);
      }
      v.config.run.methods = methods;
    } else {
      v.config.train.place.candidate_layers = sorted;
      for (std::size_t i = 0; i < sorted.size(); ++i) v.tag += (i ? "+" : "") + std::string(to_string(sorted[i]));
    }
    variants.push_back(std::move(v));
  }
  return run_variants(variants, options);
}

std::vector<std::vector<LayerId>> default_layer_sets() {
  using L = LayerId;
  return {{},
          {L::kL1},
          {L::kL2},
          {L::kL3},
          {L::kL4},
          {L::kL1, L::kL2},
          {L::kL2, L::kL3},
          {L::kL3, L::kL4},
          {L::kL1, L::kL2, L::kL3},
          {L::kL2, L::kL3, L::kL4},
          {L::kL1, L::kL2, L::kL3, L::kL4}};
}

void write_metrics_csv(std::span<const ReportRow> rows, const fs::path& path) {
  std::string text(kMetricsHeader);
  text += '\n';
  for (const ReportRow& r : rows) text += row_line(r) + '\n';
  write_atomic(path, text);
}

std::vector<ReportRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open metrics file " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ConfigError(path.string() + ": missing metrics header");
  }
  std::vector<ReportRow> rows;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    rows.push_back(parse_row(line, path.string() + ":" + std::to_string(number)));
  }
  return rows;
}

std::vector<MethodMean> method_means(std::span<const ReportRow> rows) {
  std::vector<MethodMean> means;
  for (const ReportRow& r : rows) {
    auto it = std::find_if(means.begin(), means.end(),
                           [&](const MethodMean& m) { return m.tag == r.tag && m.method == r.method; });
    if (it == means.end()) {
      means.push_back({r.tag, r.method});
      it = means.end() - 1;
    }
    it->runs += 1;
    it->test_acc += r.test_acc;
    it->inter_domain += r.inter_domain;
    it->intra_class += r.intra_class;
  }
  for (MethodMean& m : means) {
    const auto n = static_cast<double>(m.runs);
    m.test_acc /= n;
    m.inter_domain /= n;
    m.intra_class /= n;
  }
  return means;
}

void print_means(std::ostream& out, std::span<const MethodMean> means) {
  out << std::left << std::setw(34) << "method" << std::right << std::setw(6) << "runs" << std::setw(11)
      << "test_acc%" << std::setw(14) << "inter_domain" << std::setw(13) << "intra_class" << '\n';
  for (const MethodMean& m : means) {
    const std::string name = (m.tag.empty() ? "" : m.tag + " ") + std::string(to_string(m.method));
    out << std::left << std::setw(34) << name << std::right << std::setw(6) << m.runs << std::setw(11)
        << fixed(100.0 * m.test_acc, 2) << std::setw(14) << fixed(m.inter_domain, 4) << std::setw(13)
        << fixed(m.intra_class, 4) << '\n';
  }
}

}  // namespace placelab
