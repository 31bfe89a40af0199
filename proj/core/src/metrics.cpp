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

#include "placelab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "placelab/errors.hpp"

namespace placelab {

Tensor<float> stack_images(std::span<const Image* const> images) {
  if (images.empty()) throw ContractError("stack_images: no images");
  const Image& first = *images.front();
  std::vector<float> values;
  values.reserve(images.size() * first.pixels.size());
  for (const Image* img : images) {
    if (img->channels != first.channels || img->height != first.height || img->width != first.width) {
      throw ShapeError("stack_images: images differ in size");
    }
    values.insert(values.end(), img->pixels.begin(), img->pixels.end());
  }
  return Tensor<float>::from({images.size(), first.channels, first.height, first.width},
                             std::move(values));
}

template <typename T>
double top1_accuracy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("top1_accuracy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t s = 0; s < n; ++s) {
    const T* row = logits.data().data() + s * k;
    // max_element returns the first maximum, i.e. the lowest index on ties.
    const auto best = static_cast<int>(std::max_element(row, row + k) - row);
    correct += best == labels[s] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

template double top1_accuracy(const Tensor<float>&, std::span<const int>);
template double top1_accuracy(const Tensor<double>&, std::span<const int>);

Evaluation evaluate(Network<float>& net, std::span<const Sample> samples, std::size_t batch) {
  if (samples.empty()) throw ContractError("evaluate: no samples");
  NoGradGuard no_grad;
  Evaluation result;
  const std::size_t dim = net.config().widths[3];
  result.features.rows = samples.size();
  result.features.cols = dim;
  result.features.values.reserve(samples.size() * dim);
  std::size_t correct = 0;
  std::vector<const Image*> images;
  std::vector<int> labels;
  for (std::size_t start = 0; start < samples.size(); start += batch) {
    const std::size_t end = std::min(samples.size(), start + batch);
    images.clear();
    labels.clear();
    for (std::size_t i = start; i < end; ++i) {
      images.push_back(&samples[i].image);
      labels.push_back(samples[i].label);
    }
    const auto out = net.forward(stack_images(images), Mode::kEval);
    correct += static_cast<std::size_t>(
        std::lround(top1_accuracy(out.logits, labels) * static_cast<double>(labels.size())));
    for (float v : out.features.data()) result.features.values.push_back(v);
  }
  result.accuracy = static_cast<double>(correct) / static_cast<double>(samples.size());
  return result;
}

FeatureMatrix extract_features(Network<float>& net, std::span<const Sample> samples,
                               std::size_t batch) {
  return evaluate(net, samples, batch).features;
}

DomainFeatureSummary summarize_features(const FeatureMatrix& features,
                                        std::span<const int> domains,
                                        std::span<const int> labels, std::size_t num_classes) {
  if (domains.size() != features.rows || labels.size() != features.rows) {
    throw ShapeError("summarize_features: label/domain counts do not match feature rows");
  }
  DomainFeatureSummary summary;
  summary.dim = features.cols;
  summary.num_classes = num_classes;
  std::vector<int> ids(domains.begin(), domains.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (int id : ids) {
    DomainFeatureSummary::Domain d;
    d.id = id;
    d.mean.assign(features.cols, 0.0);
    d.class_means.assign(num_classes, std::vector<double>(features.cols, 0.0));
    d.class_counts.assign(num_classes, 0);
    std::size_t count = 0;
    for (std::size_t r = 0; r < features.rows; ++r) {
      if (domains[r] != id) continue;
      const int label = labels[r];
      if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
        throw ContractError("summarize_features: label " + std::to_string(label) + " out of range");
      }
      const auto row = features.row(r);
      auto& cm = d.class_means[static_cast<std::size_t>(label)];
      for (std::size_t j = 0; j < features.cols; ++j) {
        d.mean[j] += row[j];
        cm[j] += row[j];
      }
      ++d.class_counts[static_cast<std::size_t>(label)];
      ++count;
    }
    for (double& v : d.mean) v /= static_cast<double>(count);
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (d.class_counts[c] == 0) {
        d.class_means[c].clear();
        continue;
      }
      for (double& v : d.class_means[c]) v /= static_cast<double>(d.class_counts[c]);
    }
    summary.domains.push_back(std::move(d));
  }
  return summary;
}

namespace {

double euclidean(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(acc);
}

}  // namespace

double inter_domain_distance(const DomainFeatureSummary& summary) {
  const std::size_t k = summary.domains.size();
  if (k < 2) throw ContractError("inter_domain_distance: needs at least two domains");
  double total = 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    for (std::size_t n = m + 1; n < k; ++n) {
      total += euclidean(summary.domains[m].mean, summary.domains[n].mean);
    }
  }
  return 2.0 * total / static_cast<double>(k * (k - 1));
}

double intra_class_distance(const DomainFeatureSummary& summary) {
  if (summary.domains.empty() || summary.num_classes == 0) {
    throw ContractError("intra_class_distance: empty summary");
  }
  double total = 0.0;
  for (const auto& d : summary.domains) {
    for (std::size_t c = 0; c < summary.num_classes; ++c) {
      if (d.class_counts[c] == 0) {
        throw ContractError("intra_class_distance: empty cell (domain " + std::to_string(d.id) +
                            ", class " + std::to_string(c) + ")");
      }
      total += euclidean(d.class_means[c], d.mean);
    }
  }
  return total / static_cast<double>(summary.num_classes * summary.domains.size());
}

}  // namespace placelab
