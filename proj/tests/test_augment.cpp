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

#include "placelab/augment.hpp"
#include "placelab/errors.hpp"

using namespace placelab;

namespace {

Image gradient_image(std::size_t h = 16, std::size_t w = 16) {
  Image img(3, h, w);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        img.at(c, y, x) = static_cast<float>((x + 2 * y + 5 * c) % 17) / 16.0f;
  return img;
}

bool in_unit_range(const Image& img) {
  return std::all_of(img.pixels.begin(), img.pixels.end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

}  // namespace

TEST_CASE("identity draw is an exact identity") {
  const Image img = gradient_image();
  CHECK(apply_standard(img, StandardAugmentDraw::identity(16, 16)) == img);
}

TEST_CASE("flip mirrors columns") {
  const Image img = gradient_image();
  auto d = StandardAugmentDraw::identity(16, 16);
  d.flip = true;
  const Image out = apply_standard(img, d);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x) CHECK(out.at(c, y, x) == doctest::Approx(img.at(c, y, 15 - x)));
}

TEST_CASE("grayscale makes channels equal") {
  auto d = StandardAugmentDraw::identity(16, 16);
  d.grayscale = true;
  const Image out = apply_standard(gradient_image(), d);
  for (std::size_t i = 0; i < out.plane(); ++i) {
    CHECK(out.pixels[i] == out.pixels[out.plane() + i]);
    CHECK(out.pixels[i] == out.pixels[2 * out.plane() + i]);
  }
}

TEST_CASE("standard draws respect the configured ranges") {
  const StandardAugmentConfig config;
  RandomStream rng({1, Purpose::kStandardAug, 0, 0, 0});
  int flips = 0, grays = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto d = draw_standard(config, 32, 32, rng);
    const double area = d.crop_width * d.crop_height / (32.0 * 32.0);
    REQUIRE(area >= 0.8 - 1e-9);
    REQUIRE(area <= 1.0 + 1e-9);
    const double aspect = d.crop_width / d.crop_height;
    REQUIRE(aspect >= 0.75 - 1e-9);
    REQUIRE(aspect <= 4.0 / 3.0 + 1e-9);
    REQUIRE(d.crop_x >= 0.0);
    REQUIRE(d.crop_x + d.crop_width <= 32.0 + 1e-9);
    REQUIRE(d.brightness >= 0.6);
    REQUIRE(d.brightness <= 1.4);
    REQUIRE(std::abs(d.hue) <= 0.4);
    std::set<int> order(d.jitter_order.begin(), d.jitter_order.end());
    REQUIRE(order.size() == 4);
    flips += d.flip;
    grays += d.grayscale;
  }
  const auto within = [n](int count, double p) { return std::abs(count - n * p) < 4 * std::sqrt(n * p * (1 - p)); };
  CHECK(within(flips, 0.5));
  CHECK(within(grays, 0.1));
}

TEST_CASE("standard augmentation is reproducible and bounded") {
  const Image img = gradient_image(32, 32);
  RandomStream a({5, Purpose::kStandardAug, 1, 2, 3}), b({5, Purpose::kStandardAug, 1, 2, 3});
  const Image x = standard_augment(img, StandardAugmentConfig{}, a);
  CHECK(x == standard_augment(img, StandardAugmentConfig{}, b));
  CHECK(in_unit_range(x));
}

TEST_CASE("transform pool") {
  const auto& pool = default_pool();
  CHECK(pool.size() == 10);
  std::set<std::string_view> names;
  for (const auto& t : pool) names.insert(t.name);
  CHECK(names.size() == 10);
  CHECK(transform_by_name("rotate").max_parameter == 30.0);
  CHECK(transform_by_name("rotate").parameter(4) == doctest::Approx(12.0));
  CHECK(transform_by_name("rotate").parameter(0) == 0.0);
  CHECK_THROWS_AS(transform_by_name("blur"), ConfigError);
}

TEST_CASE("individual transforms") {
  const Image img = gradient_image();
  for (const auto& t : default_pool()) {
    const Image out = apply_transform(img, t.kind, t.parameter(kMaxLevel));
    CHECK(in_unit_range(out));
    CHECK(out.height == img.height);
  }
  const Image inv = apply_transform(img, TransformKind::kInvert, 0.0);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(inv.pixels[i] == doctest::Approx(1.0f - img.pixels[i]));
  // rotation by 0 and translation by 0 are identities
  CHECK(apply_transform(img, TransformKind::kRotate, 0.0) == img);
  CHECK(apply_transform(img, TransformKind::kTranslateX, 0.0) == img);
  // translating by a whole pixel shifts columns and fills with zero
  const Image moved = apply_transform(img, TransformKind::kTranslateX, 1.0 / 16.0);
  for (std::size_t y = 0; y < 16; ++y) {
    CHECK(moved.at(0, y, 0) == 0.0f);
    CHECK(moved.at(0, y, 5) == doctest::Approx(img.at(0, y, 4)));
  }
  // solarize with threshold 0.5 inverts only bright pixels
  const Image sol = apply_transform(img, TransformKind::kSolarize, 0.5);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const float v = img.pixels[i];
    CHECK(sol.pixels[i] == doctest::Approx(v > 0.5f ? 1.0f - v : v));
  }
  // posterize removing 4 bits leaves multiples of 16/255
  const Image post = apply_transform(img, TransformKind::kPosterize, 4.0);
  for (float v : post.pixels) CHECK(static_cast<int>(std::lround(v * 255.0f)) % 16 == 0);
}

TEST_CASE("rand augment policy") {
  AugPolicy policy;
  CHECK(policy.alpha == 8);
  CHECK(policy.beta == 4);
  CHECK_NOTHROW(policy.validate());
  const Image img = gradient_image(32, 32);
  RandomStream a({2, Purpose::kRandAug, 0, 0, 0}), b({2, Purpose::kRandAug, 0, 0, 0});
  const Image x = rand_augment(img, policy, a);
  CHECK(x == rand_augment(img, policy, b));
  CHECK(in_unit_range(x));
  CHECK_FALSE(x == img);

  // alpha = 0 leaves the image unchanged
  policy.alpha = 0;
  CHECK(rand_augment(img, policy, a) == img);
  policy.alpha = 11;
  CHECK_THROWS_AS(policy.validate(), ConfigError);
  policy = {};
  policy.beta = 11;
  CHECK_THROWS_AS(policy.validate(), ConfigError);
  policy = {};
  policy.pool.push_back(policy.pool.front());
  CHECK_THROWS_AS(policy.validate(), ConfigError);
}

TEST_CASE("every transform is drawn equally often") {
  // With alpha = 1 the draw picks one pool entry uniformly; compare against
  // applying each transform directly with either sign.
  AugPolicy policy;
  policy.alpha = 1;
  const Image img = gradient_image();
  std::vector<int> hits(policy.pool.size(), 0);
  const int n = 3000;
  for (int i = 0; i < n; ++i) {
    RandomStream rng({3, Purpose::kRandAug, 0, 0, static_cast<std::uint32_t>(i)});
    const Image out = rand_augment(img, policy, rng);
    for (std::size_t k = 0; k < policy.pool.size(); ++k) {
      const auto& t = policy.pool[k];
      const double p = t.parameter(policy.beta);
      if (out == apply_transform(img, t.kind, p) || (t.signed_parameter && out == apply_transform(img, t.kind, -p))) {
        ++hits[k];
        break;
      }
    }
  }
  const double expect = n / 10.0;
  for (int h : hits) CHECK(std::abs(h - expect) < 4 * std::sqrt(n * 0.1 * 0.9));
}
