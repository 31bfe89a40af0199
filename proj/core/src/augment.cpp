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

#include "placelab/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "placelab/errors.hpp"

namespace placelab {

namespace {

void clamp_unit(Image& image) {
  for (float& v : image.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

float luminance(const Image& img, std::size_t y, std::size_t x) {
  if (img.channels < 3) return img.at(0, y, x);
  return 0.299f * img.at(0, y, x) + 0.587f * img.at(1, y, x) + 0.114f * img.at(2, y, x);
}

// Bilinear sample with zero outside the image.
float sample_bilinear(const Image& img, std::size_t c, double sy, double sx) {
  const double fy = std::floor(sy), fx = std::floor(sx);
  const double wy = sy - fy, wx = sx - fx;
  const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
  auto px = [&](std::ptrdiff_t y, std::ptrdiff_t x) -> double {
    if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(img.height) ||
        x >= static_cast<std::ptrdiff_t>(img.width)) {
      return 0.0;
    }
    return img.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x));
  };
  const double top = px(y0, x0) * (1.0 - wx) + (wx > 0.0 ? px(y0, x0 + 1) * wx : 0.0);
  if (wy == 0.0) return static_cast<float>(top);
  const double bottom = px(y0 + 1, x0) * (1.0 - wx) + (wx > 0.0 ? px(y0 + 1, x0 + 1) * wx : 0.0);
  return static_cast<float>(top * (1.0 - wy) + bottom * wy);
}

// Maps each output pixel through `inverse` (output -> source coordinates).
template <typename F>
Image warp(const Image& img, F inverse) {
  Image out(img.channels, img.height, img.width);
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const auto [sy, sx] = inverse(static_cast<double>(y), static_cast<double>(x));
      for (std::size_t c = 0; c < img.channels; ++c) out.at(c, y, x) = sample_bilinear(img, c, sy, sx);
    }
  }
  return out;
}

Image blend_with_constant(const Image& img, double factor, double constant) {
  Image out = img;
  for (float& v : out.pixels) {
    v = static_cast<float>(std::clamp(factor * v + (1.0 - factor) * constant, 0.0, 1.0));
  }
  return out;
}

double mean_luminance(const Image& img) {
  double acc = 0.0;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) acc += luminance(img, y, x);
  }
  return acc / static_cast<double>(img.plane());
}

Image adjust_brightness(const Image& img, double factor) {
  if (factor == 1.0) return img;
  return blend_with_constant(img, factor, 0.0);
}

Image adjust_contrast(const Image& img, double factor) {
  if (factor == 1.0) return img;
  return blend_with_constant(img, factor, mean_luminance(img));
}

Image adjust_saturation(const Image& img, double factor) {
  if (factor == 1.0 || img.channels < 3) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double gray = luminance(img, y, x);
      for (std::size_t c = 0; c < 3; ++c) {
        out.at(c, y, x) = static_cast<float>(
            std::clamp(factor * img.at(c, y, x) + (1.0 - factor) * gray, 0.0, 1.0));
      }
    }
  }
  return out;
}

// Rotates the hue by `shift` turns in HSV space.
Image adjust_hue(const Image& img, double shift) {
  if (shift == 0.0 || img.channels < 3) return img;
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const double r = img.at(0, y, x), g = img.at(1, y, x), b = img.at(2, y, x);
      const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
      const double delta = mx - mn;
      double h = 0.0;
      if (delta > 0.0) {
        if (mx == r) {
          h = std::fmod((g - b) / delta, 6.0);
        } else if (mx == g) {
          h = (b - r) / delta + 2.0;
        } else {
          h = (r - g) / delta + 4.0;
        }
        h /= 6.0;
      }
      const double s = mx > 0.0 ? delta / mx : 0.0;
      const double v = mx;
      h = h + shift;
      h -= std::floor(h);
      const double hh = h * 6.0;
      const int sector = static_cast<int>(std::floor(hh)) % 6;
      const double f = hh - std::floor(hh);
      const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
      double rgb[3];
      switch (sector) {
        case 0: rgb[0] = v; rgb[1] = t; rgb[2] = p; break;
        case 1: rgb[0] = q; rgb[1] = v; rgb[2] = p; break;
        case 2: rgb[0] = p; rgb[1] = v; rgb[2] = t; break;
        case 3: rgb[0] = p; rgb[1] = q; rgb[2] = v; break;
        case 4: rgb[0] = t; rgb[1] = p; rgb[2] = v; break;
        default: rgb[0] = v; rgb[1] = p; rgb[2] = q; break;
      }
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = static_cast<float>(std::clamp(rgb[c], 0.0, 1.0));
    }
  }
  return out;
}

Image to_grayscale(const Image& img) {
  Image out = img;
  for (std::size_t y = 0; y < img.height; ++y) {
    for (std::size_t x = 0; x < img.width; ++x) {
      const float gray = luminance(img, y, x);
      for (std::size_t c = 0; c < img.channels; ++c) out.at(c, y, x) = gray;
    }
  }
  return out;
}

}  // namespace

StandardAugmentDraw StandardAugmentDraw::identity(std::size_t height, std::size_t width) {
  StandardAugmentDraw d;
  d.crop_width = static_cast<double>(width);
  d.crop_height = static_cast<double>(height);
  return d;
}

StandardAugmentDraw draw_standard(const StandardAugmentConfig& config, std::size_t height,
                                  std::size_t width, RandomStream& rng) {
  StandardAugmentDraw d = StandardAugmentDraw::identity(height, width);
  const double area = static_cast<double>(height * width);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double target = area * rng.uniform(config.min_area, config.max_area);
    const double aspect = std::exp(
        rng.uniform(std::log(config.min_aspect), std::log(config.max_aspect)));
    const double w = std::sqrt(target * aspect);
    const double h = std::sqrt(target / aspect);
    if (w <= static_cast<double>(width) && h <= static_cast<double>(height)) {
      d.crop_width = w;
      d.crop_height = h;
      d.crop_x = rng.uniform() * (static_cast<double>(width) - w);
      d.crop_y = rng.uniform() * (static_cast<double>(height) - h);
      break;
    }
  }
  d.flip = rng.bernoulli(config.flip_probability);
  const double j = config.jitter;
  d.brightness = rng.uniform(std::max(0.0, 1.0 - j), 1.0 + j);
  d.contrast = rng.uniform(std::max(0.0, 1.0 - j), 1.0 + j);
  d.saturation = rng.uniform(std::max(0.0, 1.0 - j), 1.0 + j);
  d.hue = rng.uniform(-std::min(j, 0.5), std::min(j, 0.5));
  std::iota(d.jitter_order.begin(), d.jitter_order.end(), 0);
  for (std::size_t i = d.jitter_order.size(); i > 1; --i) {
    std::swap(d.jitter_order[i - 1], d.jitter_order[rng.below(static_cast<std::uint32_t>(i))]);
  }
  d.grayscale = rng.bernoulli(config.grayscale_probability);
  return d;
}

Image apply_standard(const Image& image, const StandardAugmentDraw& d) {
  const double sy = d.crop_height / static_cast<double>(image.height);
  const double sx = d.crop_width / static_cast<double>(image.width);
  const double last_x = static_cast<double>(image.width) - 1.0;
  const bool full_frame = d.crop_x == 0.0 && d.crop_y == 0.0 && sy == 1.0 && sx == 1.0;
  Image out = full_frame && !d.flip
                  ? image
                  : warp(image, [&](double y, double x) {
                      const double xx = d.flip ? last_x - x : x;
                      return std::pair{d.crop_y + (y + 0.5) * sy - 0.5,
                                       d.crop_x + (xx + 0.5) * sx - 0.5};
                    });
  for (int op : d.jitter_order) {
    switch (op) {
      case 0: out = adjust_brightness(out, d.brightness); break;
      case 1: out = adjust_contrast(out, d.contrast); break;
      case 2: out = adjust_saturation(out, d.saturation); break;
      default: out = adjust_hue(out, d.hue); break;
    }
  }
  if (d.grayscale) out = to_grayscale(out);
  clamp_unit(out);
  return out;
}

Image standard_augment(const Image& image, const StandardAugmentConfig& config,
                       RandomStream& rng) {
  return apply_standard(image, draw_standard(config, image.height, image.width, rng));
}

// ---------------------------------------------------------------------------

double TransformSpec::parameter(int level) const {
  return max_parameter * static_cast<double>(level) / static_cast<double>(kMaxLevel);
}

const std::vector<TransformSpec>& default_pool() {
  static const std::vector<TransformSpec> kPool = {
      {TransformKind::kRotate, "rotate", 30.0, true},
      {TransformKind::kTranslateX, "translate-x", 0.3, true},
      {TransformKind::kTranslateY, "translate-y", 0.3, true},
      {TransformKind::kShearX, "shear-x", 0.3, true},
      {TransformKind::kShearY, "shear-y", 0.3, true},
      {TransformKind::kBrightness, "brightness", 0.9, true},
      {TransformKind::kContrast, "contrast", 0.9, true},
      {TransformKind::kInvert, "invert", 0.0, false},
      {TransformKind::kPosterize, "posterize", 4.0, false},
      {TransformKind::kSolarize, "solarize", 1.0, false},
  };
  return kPool;
}

const TransformSpec& transform_by_name(std::string_view name) {
  for (const auto& spec : default_pool()) {
    if (spec.name == name) return spec;
  }
  throw ConfigError("unknown augmentation transform '" + std::string(name) + "'");
}

void AugPolicy::validate() const {
  if (alpha > pool.size()) {
    throw ConfigError("aug.alpha = " + std::to_string(alpha) + " exceeds pool size " +
                      std::to_string(pool.size()));
  }
  if (beta < 0 || beta > kMaxLevel) throw ConfigError("aug.beta must lie in [0, 10]");
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (std::size_t j = i + 1; j < pool.size(); ++j) {
      if (pool[i].kind == pool[j].kind) {
        throw ConfigError("aug.pool lists '" + std::string(pool[i].name) + "' twice");
      }
    }
  }
}

Image apply_transform(const Image& image, TransformKind kind, double parameter) {
  const double cy = (static_cast<double>(image.height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(image.width) - 1.0) / 2.0;
  Image out;
  switch (kind) {
    case TransformKind::kRotate: {
      if (parameter == 0.0) return image;
      const double theta = parameter * std::numbers::pi / 180.0;
      const double c = std::cos(theta), s = std::sin(theta);
      out = warp(image, [&](double y, double x) {
        const double dy = y - cy, dx = x - cx;
        return std::pair{cy - s * dx + c * dy, cx + c * dx + s * dy};
      });
      break;
    }
    case TransformKind::kTranslateX: {
      if (parameter == 0.0) return image;
      const double shift = parameter * static_cast<double>(image.width);
      out = warp(image, [&](double y, double x) { return std::pair{y, x - shift}; });
      break;
    }
    case TransformKind::kTranslateY: {
      if (parameter == 0.0) return image;
      const double shift = parameter * static_cast<double>(image.height);
      out = warp(image, [&](double y, double x) { return std::pair{y - shift, x}; });
      break;
    }
    case TransformKind::kShearX:
      if (parameter == 0.0) return image;
      out = warp(image, [&](double y, double x) { return std::pair{y, x - parameter * (y - cy)}; });
      break;
    case TransformKind::kShearY:
      if (parameter == 0.0) return image;
      out = warp(image, [&](double y, double x) { return std::pair{y - parameter * (x - cx), x}; });
      break;
    case TransformKind::kBrightness:
      out = adjust_brightness(image, 1.0 + parameter);
      break;
    case TransformKind::kContrast:
      out = adjust_contrast(image, 1.0 + parameter);
      break;
    case TransformKind::kInvert:
      out = image;
      for (float& v : out.pixels) v = 1.0f - v;
      break;
    case TransformKind::kPosterize: {
      const int removed = static_cast<int>(std::lround(parameter));
      if (removed <= 0) return image;
      const int mask = ~((1 << removed) - 1) & 0xFF;
      out = image;
      for (float& v : out.pixels) {
        const int q = static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)) & mask;
        v = static_cast<float>(q) / 255.0f;
      }
      break;
    }
    case TransformKind::kSolarize: {
      const float threshold = static_cast<float>(1.0 - parameter);
      out = image;
      for (float& v : out.pixels) {
        if (v > threshold) v = 1.0f - v;
      }
      break;
    }
  }
  clamp_unit(out);
  return out;
}

Image rand_augment(const Image& image, const AugPolicy& policy, RandomStream& rng) {
  policy.validate();
  std::vector<std::size_t> order(policy.pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Image out = image;
  for (std::size_t i = 0; i < policy.alpha; ++i) {
    const std::size_t j = i + rng.below(static_cast<std::uint32_t>(order.size() - i));
    std::swap(order[i], order[j]);
    const TransformSpec& spec = policy.pool[order[i]];
    double parameter = spec.parameter(policy.beta);
    if (spec.signed_parameter && rng.bernoulli(0.5)) parameter = -parameter;
    out = apply_transform(out, spec.kind, parameter);
  }
  clamp_unit(out);
  return out;
}

}  // namespace placelab
