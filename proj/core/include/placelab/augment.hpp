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
#include <string>
#include <string_view>
#include <vector>

#include "placelab/image.hpp"
#include "placelab/rng.hpp"

namespace placelab {

// ---------------------------------------------------------------------------
// Standard recipe: random resized crop, horizontal flip, color jitter,
// random grayscale.

struct StandardAugmentConfig {
  double min_area = 0.8;
  double max_area = 1.0;
  double min_aspect = 3.0 / 4.0;
  double max_aspect = 4.0 / 3.0;
  double flip_probability = 0.5;
  double jitter = 0.4;
  double grayscale_probability = 0.1;
};

/// Every random decision of one standard augmentation, so that the pipeline
/// can be replayed or forced in tests.
struct StandardAugmentDraw {
  double crop_x = 0.0, crop_y = 0.0;
  double crop_width = 0.0, crop_height = 0.0;
  bool flip = false;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;
  /// Application order of brightness, contrast, saturation, hue (0..3).
  std::array<int, 4> jitter_order = {0, 1, 2, 3};
  bool grayscale = false;

  /// Full-area crop, no flip, no jitter, no grayscale.
  static StandardAugmentDraw identity(std::size_t height, std::size_t width);
};

StandardAugmentDraw draw_standard(const StandardAugmentConfig& config, std::size_t height,
                                  std::size_t width, RandomStream& rng);
Image apply_standard(const Image& image, const StandardAugmentDraw& draw);
Image standard_augment(const Image& image, const StandardAugmentConfig& config,
                       RandomStream& rng);

// ---------------------------------------------------------------------------
// Randomized augmentation: alpha transforms at a shared magnitude level.

enum class TransformKind {
  kRotate,
  kTranslateX,
  kTranslateY,
  kShearX,
  kShearY,
  kBrightness,
  kContrast,
  kInvert,
  kPosterize,
  kSolarize,
};

inline constexpr int kMaxLevel = 10;

struct TransformSpec {
  TransformKind kind;
  std::string_view name;
  /// Parameter reached at level kMaxLevel; level 0 maps to the identity.
  double max_parameter;
  /// Whether the parameter's sign is drawn at random.
  bool signed_parameter;

  double parameter(int level) const;
};

/// rotate (30 deg), translate-x/y (30% of size), shear-x/y (0.3),
/// brightness/contrast (factor 1 +- 0.9), invert, posterize (down to 4 bits),
/// solarize (threshold down to 0).
const std::vector<TransformSpec>& default_pool();
/// Throws ConfigError for unknown names.
const TransformSpec& transform_by_name(std::string_view name);

struct AugPolicy {
  std::size_t alpha = 8;
  int beta = 4;
  std::vector<TransformSpec> pool = default_pool();

  void validate() const;
};

/// Applies one transform with an explicit parameter (degrees for rotate,
/// fraction of the extent for translate, factor offset for brightness/contrast, bits removed
/// for posterize, threshold decrease for solarize).
Image apply_transform(const Image& image, TransformKind kind, double parameter);

/// Draws alpha distinct transforms uniformly from the pool and applies them
/// in draw order at magnitude beta. Output is clamped to [0, 1].
Image rand_augment(const Image& image, const AugPolicy& policy, RandomStream& rng);

}  // namespace placelab
