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
#include <vector>

#include "placelab/errors.hpp"
#include "placelab/metrics.hpp"

using namespace placelab;

namespace {

DomainFeatureSummary::Domain domain_with(int id, std::vector<double> mean,
                                         std::vector<std::vector<double>> class_means = {}) {
  DomainFeatureSummary::Domain d;
  d.id = id;
  d.mean = std::move(mean);
  d.class_counts.assign(class_means.size(), 1);
  d.class_means = std::move(class_means);
  return d;
}

DomainFeatureSummary summary_of(std::vector<DomainFeatureSummary::Domain> domains) {
  DomainFeatureSummary s;
  s.dim = domains.front().mean.size();
  s.num_classes = domains.front().class_means.size();
  s.domains = std::move(domains);
  return s;
}

// Four domains, three classes, a handful of 3-d points per cell.
struct Cloud {
  FeatureMatrix features;
  std::vector<int> domains, labels;
};

Cloud make_cloud() {
  Cloud c;
  c.features.cols = 3;
  RandomStream rng({11, Purpose::kGeneric, 0, 0, 0});
  for (int d = 0; d < 4; ++d)
    for (int k = 0; k < 3; ++k)
      for (int i = 0; i < 4; ++i) {
        c.features.values.push_back(d + 0.3 * k + rng.normal());
        c.features.values.push_back(-d + rng.normal());
        c.features.values.push_back(0.5 * k * d + rng.normal());
        c.domains.push_back(d);
        c.labels.push_back(k);
        ++c.features.rows;
      }
  return c;
}

}  // namespace

TEST_CASE("inter-domain distance hand examples") {
  CHECK(inter_domain_distance(summary_of({domain_with(0, {1, 2}), domain_with(1, {1, 2})})) == 0.0);
  CHECK(inter_domain_distance(summary_of({domain_with(0, {0, 0}), domain_with(1, {3, 4})})) ==
        doctest::Approx(5.0).epsilon(1e-12));
  const double three = inter_domain_distance(
      summary_of({domain_with(0, {0, 0}), domain_with(1, {1, 0}), domain_with(2, {0, 1})}));
  CHECK(std::abs(three - (2.0 + std::sqrt(2.0)) / 3.0) < 1e-12);
  CHECK_THROWS_AS(inter_domain_distance(summary_of({domain_with(0, {0, 0})})), ContractError);
}

TEST_CASE("intra-class distance hand examples") {
  CHECK(intra_class_distance(summary_of({domain_with(0, {1, 1}, {{1, 1}, {1, 1}})})) == 0.0);
  CHECK(intra_class_distance(summary_of({domain_with(0, {0, 0}, {{1, 0}, {-1, 0}})})) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(intra_class_distance(summary_of({domain_with(0, {0, 0}, {{1, 0}, {-1, 0}}),
                                         domain_with(1, {5, 5}, {{5, 6}, {5, 4}})})) ==
        doctest::Approx(1.0).epsilon(1e-12));

  auto s = summary_of({domain_with(0, {0, 0}, {{1, 0}, {-1, 0}}), domain_with(3, {0, 0}, {{1, 0}, {}})});
  s.domains[1].class_counts[1] = 0;
  try {
    intra_class_distance(s);
    FAIL("expected a contract error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()).find("domain 3") != std::string::npos);
  }
}

TEST_CASE("summaries match direct means") {
  const Cloud c = make_cloud();
  const auto s = summarize_features(c.features, c.domains, c.labels, 3);
  REQUIRE(s.domains.size() == 4);
  CHECK(s.dim == 3);
  for (const auto& d : s.domains) {
    std::vector<double> mean(3, 0.0);
    int n = 0;
    for (std::size_t r = 0; r < c.features.rows; ++r)
      if (c.domains[r] == d.id) {
        for (std::size_t j = 0; j < 3; ++j) mean[j] += c.features.row(r)[j];
        ++n;
      }
    for (std::size_t j = 0; j < 3; ++j) CHECK(d.mean[j] == doctest::Approx(mean[j] / n).epsilon(1e-12));
    for (std::size_t k = 0; k < 3; ++k) CHECK(d.class_counts[k] == 4);
  }
  CHECK_THROWS_AS(summarize_features(c.features, std::vector<int>{0}, c.labels, 3), ShapeError);
  std::vector<int> bad = c.labels;
  bad[0] = 3;
  CHECK_THROWS_AS(summarize_features(c.features, c.domains, bad, 3), ContractError);
}

TEST_CASE("distances are invariant to rotation and scale linearly") {
  const Cloud c = make_cloud();
  const auto base = summarize_features(c.features, c.domains, c.labels, 3);
  const double inter = inter_domain_distance(base);
  const double intra = intra_class_distance(base);

  // Rotation about z followed by a reflection of x.
  const double a = 0.7;
  const double q[3][3] = {{-std::cos(a), std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}};
  FeatureMatrix rotated = c.features, scaled = c.features;
  for (std::size_t r = 0; r < c.features.rows; ++r) {
    const auto x = c.features.row(r);
    for (std::size_t i = 0; i < 3; ++i) {
      rotated.values[r * 3 + i] = q[i][0] * x[0] + q[i][1] * x[1] + q[i][2] * x[2];
      scaled.values[r * 3 + i] = 2.5 * x[i];
    }
  }
  const auto rs = summarize_features(rotated, c.domains, c.labels, 3);
  CHECK(inter_domain_distance(rs) == doctest::Approx(inter).epsilon(1e-12));
  CHECK(intra_class_distance(rs) == doctest::Approx(intra).epsilon(1e-12));
  const auto ss = summarize_features(scaled, c.domains, c.labels, 3);
  CHECK(inter_domain_distance(ss) == doctest::Approx(2.5 * inter).epsilon(1e-12));
  CHECK(intra_class_distance(ss) == doctest::Approx(2.5 * intra).epsilon(1e-12));
}

TEST_CASE("top-1 accuracy") {
  const auto logits = Tensor<float>::from({3, 3}, {1, 5, 2, 4, 4, 0, 0, 0, 0});
  CHECK(top1_accuracy(logits, std::vector<int>{1, 0, 0}) == doctest::Approx(1.0));
  CHECK(top1_accuracy(logits, std::vector<int>{1, 1, 2}) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(top1_accuracy(logits, std::vector<int>{1, 1}), ShapeError);
}

TEST_CASE("evaluation is chunk independent and matches a forward pass") {
  NetworkConfig cfg;
  cfg.widths = {4, 4, 6, 8};
  RandomStream init({2, Purpose::kInit, 0, 0, 0});
  Network<float> net(cfg, init);
  const auto data = generate_dataset(3, 3, 16);
  std::vector<Sample> samples;
  for (const auto& d : data) samples.insert(samples.end(), d.samples.begin(), d.samples.end());

  const Evaluation whole = evaluate(net, samples, 250);
  const Evaluation chunked = evaluate(net, samples, 7);
  CHECK(whole.accuracy == chunked.accuracy);
  REQUIRE(whole.features.rows == samples.size());
  CHECK(whole.features.cols == 8);
  for (std::size_t i = 0; i < whole.features.values.size(); ++i)
    CHECK(whole.features.values[i] == doctest::Approx(chunked.features.values[i]).epsilon(1e-6));

  std::vector<const Image*> images;
  std::vector<int> labels;
  for (const Sample& s : samples) {
    images.push_back(&s.image);
    labels.push_back(s.label);
  }
  const auto out = net.forward(stack_images(images), Mode::kEval);
  CHECK(whole.accuracy == top1_accuracy(out.logits, labels));

  const FeatureMatrix f = extract_features(net, samples, 250);
  CHECK(f.values == whole.features.values);
  CHECK_THROWS_AS(evaluate(net, std::span<const Sample>{}, 4), ContractError);
}

TEST_CASE("stack_images validates sizes") {
  Image a(3, 2, 2, 0.5f), b(3, 4, 4);
  const Image* same[] = {&a, &a};
  CHECK(stack_images(same).shape() == Shape{2, 3, 2, 2});
  const Image* mixed[] = {&a, &b};
  CHECK_THROWS_AS(stack_images(mixed), ShapeError);
  CHECK_THROWS_AS(stack_images(std::span<const Image* const>{}), ContractError);
}
