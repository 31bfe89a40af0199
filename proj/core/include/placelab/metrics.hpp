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
#include <span>
#include <vector>

#include "placelab/image.hpp"
#include "placelab/network.hpp"
#include "placelab/synthetic.hpp"
#include "placelab/tensor.hpp"

namespace placelab {

/// Packs equally sized images into an N x C x H x W tensor.
Tensor<float> stack_images(std::span<const Image* const> images);

/// Fraction of rows whose argmax equals the label; ties go to the lowest
/// class index.
template <typename T>
double top1_accuracy(const Tensor<T>& logits, std::span<const int> labels);

/// Row-major samples x dim matrix of penultimate features.
struct FeatureMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  std::span<const double> row(std::size_t r) const { return {values.data() + r * cols, cols}; }
};

struct Evaluation {
  double accuracy = 0.0;
  FeatureMatrix features;
};

/// Evaluation-mode forward over `samples` in chunks of `batch` samples: top-1
/// accuracy and pooled block-4 features. Never records a graph and never
/// draws random numbers.
Evaluation evaluate(Network<float>& net, std::span<const Sample> samples, std::size_t batch = 250);

FeatureMatrix extract_features(Network<float>& net, std::span<const Sample> samples,
                               std::size_t batch = 250);

/// Per-domain and per-(domain, class) feature means of the domains present.
struct DomainFeatureSummary {
  struct Domain {
    int id = 0;
    std::vector<double> mean;
    /// class_means[c] is empty when class_counts[c] == 0.
    std::vector<std::vector<double>> class_means;
    std::vector<std::size_t> class_counts;
  };
  std::size_t dim = 0;
  std::size_t num_classes = 0;
  std::vector<Domain> domains;
};

DomainFeatureSummary summarize_features(const FeatureMatrix& features,
                                        std::span<const int> domains,
                                        std::span<const int> labels, std::size_t num_classes);

/// Mean Euclidean distance between domain means over unordered pairs:
/// 2 / (K (K - 1)) * sum_{m < n} ||mean_m - mean_n||. Requires K >= 2.
double inter_domain_distance(const DomainFeatureSummary& summary);

/// 1 / (C K) * sum_k sum_c ||mean_{k,c} - mean_k||. Every cell must be
/// non-empty.
double intra_class_distance(const DomainFeatureSummary& summary);

}  // namespace placelab
