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

#include "placelab/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <string>

#include "placelab/errors.hpp"

namespace placelab {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassNames = {"disk", "square", "triangle",
                                                                   "plus", "ring"};

struct Vec2 {
  double x, y;
};

double box_sdf(Vec2 p, double hx, double hy) {
  const double qx = std::abs(p.x) - hx, qy = std::abs(p.y) - hy;
  const double ox = std::max(qx, 0.0), oy = std::max(qy, 0.0);
  return std::hypot(ox, oy) + std::min(std::max(qx, qy), 0.0);
}

// Signed distance (negative inside) of a shape that fits within `radius`.
double shape_sdf(ShapeClass shape, Vec2 p, double radius, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec2 q{c * p.x + s * p.y, -s * p.x + c * p.y};
  switch (shape) {
    case ShapeClass::kDisk:
      return std::hypot(p.x, p.y) - 0.85 * radius;
    case ShapeClass::kSquare: {
      const double half = radius / std::numbers::sqrt2;
      return box_sdf(q, half, half);
    }
    case ShapeClass::kTriangle: {
      // Intersection of three half-planes; inradius is half the circumradius.
      double d = -1e9;
      for (int i = 0; i < 3; ++i) {
        const double a = std::numbers::pi / 2.0 + i * 2.0 * std::numbers::pi / 3.0;
        d = std::max(d, -(std::cos(a) * q.x + std::sin(a) * q.y) - radius / 2.0);
      }
      return d;
    }
    case ShapeClass::kPlus: {
      const double arm = 0.95 * radius, half_width = 0.28 * radius;
      return std::min(box_sdf(q, arm, half_width), box_sdf(q, half_width, arm));
    }
    case ShapeClass::kRing: {
      const double outer = radius, inner = 0.5 * radius;
      return std::abs(std::hypot(p.x, p.y) - 0.5 * (outer + inner)) - 0.5 * (outer - inner);
    }
  }
  return 1e9;
}

struct Rgb {
  double r, g, b;
  double operator[](std::size_t i) const { return i == 0 ? r : (i == 1 ? g : b); }
};

Rgb hsv(double h, double s, double v) {
  h -= std::floor(h);
  const double hh = h * 6.0;
  const int sector = static_cast<int>(hh) % 6;
  const double f = hh - std::floor(hh);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (sector) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

}  // namespace

std::string_view class_name(int label) {
  if (label < 0 || label >= static_cast<int>(kNumClasses)) {
    throw ContractError("class_name: invalid label " + std::to_string(label));
  }
  return kClassNames[static_cast<std::size_t>(label)];
}

const std::array<DomainSpec, kNumDomains>& domain_specs() {
  static const std::array<DomainSpec, kNumDomains> kSpecs = {{
      {DomainStyle::kFlatFill, "flat", 0.02},
      {DomainStyle::kOutlineSketch, "sketch", 0.02},
      {DomainStyle::kNoisyTexture, "texture", 0.08},
      {DomainStyle::kInvertedPalette, "inverted", 0.02},
  }};
  return kSpecs;
}

std::string_view domain_name(int domain) {
  if (domain < 0 || domain >= static_cast<int>(kNumDomains)) {
    throw ContractError("domain_name: invalid domain " + std::to_string(domain));
  }
  return domain_specs()[static_cast<std::size_t>(domain)].name;
}

int parse_domain(std::string_view text) {
  for (std::size_t d = 0; d < kNumDomains; ++d) {
    if (domain_specs()[d].name == text || text == std::to_string(d)) return static_cast<int>(d);
  }
  throw ConfigError("unknown domain '" + std::string(text) +
                    "' (expected flat, sketch, texture, inverted or 0..3)");
}

Image render_shape(const DomainSpec& spec, ShapeClass shape, std::size_t size, RandomStream& rng) {
  const double s = static_cast<double>(size);
  const double radius = s * rng.uniform(spec.min_radius_fraction, spec.max_radius_fraction);
  const double jitter = s * spec.center_jitter_fraction;
  const Vec2 center{s / 2.0 + rng.uniform(-jitter, jitter), s / 2.0 + rng.uniform(-jitter, jitter)};
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);

  Rgb background{}, foreground{};
  double stroke = 0.0;
  // Texture parameters (noisy-texture domain only).
  double freq_x = 0.0, freq_y = 0.0, phase = 0.0;
  switch (spec.style) {
    case DomainStyle::kFlatFill:
      background = hsv(rng.uniform(), rng.uniform(0.15, 0.35), rng.uniform(0.8, 0.95));
      foreground = hsv(rng.uniform(), rng.uniform(0.7, 1.0), rng.uniform(0.35, 0.6));
      break;
    case DomainStyle::kOutlineSketch: {
      const double sheet = rng.uniform(0.88, 1.0);
      background = {sheet, sheet, sheet * rng.uniform(0.95, 1.0)};
      const double ink = rng.uniform(0.0, 0.25);
      foreground = {ink, ink, ink};
      stroke = rng.uniform(1.2, 2.2);
      break;
    }
    case DomainStyle::kNoisyTexture: {
      background = hsv(rng.uniform(), rng.uniform(0.4, 0.8), rng.uniform(0.4, 0.7));
      foreground = hsv(rng.uniform(), rng.uniform(0.4, 0.8), rng.uniform(0.4, 0.7));
      const double theta = rng.uniform(0.0, std::numbers::pi);
      const double period = rng.uniform(3.0, 6.0);
      freq_x = std::cos(theta) * 2.0 * std::numbers::pi / period;
      freq_y = std::sin(theta) * 2.0 * std::numbers::pi / period;
      phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      break;
    }
    case DomainStyle::kInvertedPalette:
      background = hsv(rng.uniform(), rng.uniform(0.5, 0.9), rng.uniform(0.05, 0.2));
      foreground = hsv(rng.uniform(), rng.uniform(0.1, 0.3), rng.uniform(0.8, 1.0));
      break;
  }

  Image img(3, size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const Vec2 p{static_cast<double>(x) + 0.5 - center.x, static_cast<double>(y) + 0.5 - center.y};
      const double d = shape_sdf(shape, p, radius, angle);
      const double coverage = spec.style == DomainStyle::kOutlineSketch
                                  ? std::clamp(0.5 - (std::abs(d) - stroke / 2.0), 0.0, 1.0)
                                  : std::clamp(0.5 - d, 0.0, 1.0);
      double bg_mod = 0.0, fg_mod = 0.0;
      if (spec.style == DomainStyle::kNoisyTexture) {
        bg_mod = 0.25 * std::sin(freq_x * static_cast<double>(x) + freq_y * static_cast<double>(y) + phase);
        fg_mod = ((x / 2 + y / 2) % 2 == 0) ? 0.15 : -0.15;
      }
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = (background[c] + bg_mod) * (1.0 - coverage) + (foreground[c] + fg_mod) * coverage +
                         spec.noise_level * rng.normal();
        img.at(c, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<DomainDataset> generate_dataset(std::uint64_t seed, std::size_t per_class,
                                            std::size_t size) {
  if (per_class == 0) throw ConfigError("data.per_class must be at least 1");
  if (size < 16 || size % 16 != 0) throw ConfigError("data.size must be a positive multiple of 16");
  std::vector<DomainDataset> out(kNumDomains);
  for (std::size_t d = 0; d < kNumDomains; ++d) {
    out[d].domain = static_cast<int>(d);
    out[d].samples.reserve(kNumClasses * per_class);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      for (std::size_t i = 0; i < per_class; ++i) {
        RandomStream rng({seed, Purpose::kDataGen, static_cast<std::uint32_t>(d),
                          static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(i)});
        out[d].samples.push_back({render_shape(domain_specs()[d], static_cast<ShapeClass>(c), size, rng),
                                  static_cast<int>(c), static_cast<int>(d)});
      }
    }
  }
  return out;
}

Split leave_one_out(const std::vector<DomainDataset>& datasets, int target, double val_fraction,
                    std::uint64_t seed) {
  if (target < 0 || target >= static_cast<int>(datasets.size())) {
    throw ConfigError("target domain " + std::to_string(target) + " out of range");
  }
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw ConfigError("data.val_fraction must lie in (0, 1)");
  }
  Split split;
  split.target = target;
  for (const DomainDataset& ds : datasets) {
    if (ds.domain == target) {
      split.test.insert(split.test.end(), ds.samples.begin(), ds.samples.end());
      continue;
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      std::vector<std::size_t> cell;
      for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        if (ds.samples[i].label == static_cast<int>(c)) cell.push_back(i);
      }
      RandomStream rng({seed, Purpose::kSplit, static_cast<std::uint32_t>(ds.domain),
                        static_cast<std::uint32_t>(c), 0});
      for (std::size_t i = cell.size(); i > 1; --i) {
        std::swap(cell[i - 1], cell[rng.below(static_cast<std::uint32_t>(i))]);
      }
      const auto n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(cell.size())));
      for (std::size_t k = 0; k < cell.size(); ++k) {
        (k < n_val ? split.val : split.train).push_back(ds.samples[cell[k]]);
      }
    }
  }
  return split;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  if (image.channels != 3) throw ContractError("write_ppm: expected a 3-channel image");
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  os << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<unsigned char> payload(image.plane() * 3);
  for (std::size_t y = 0; y < image.height; ++y) {
    for (std::size_t x = 0; x < image.width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(image.at(c, y, x)), 0.0, 1.0);
        payload[(y * image.width + x) * 3 + c] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
      }
    }
  }
  os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

namespace {

std::size_t read_header_field(std::istream& is, const std::filesystem::path& path) {
  while (true) {
    is >> std::ws;
    if (is.peek() != '#') break;
    std::string comment;
    std::getline(is, comment);
  }
  std::size_t value = 0;
  if (!(is >> value)) throw std::runtime_error("malformed PPM header: " + path.string());
  return value;
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::string magic;
  is >> magic;
  if (magic != "P6") throw std::runtime_error("not a binary PPM: " + path.string());
  const std::size_t width = read_header_field(is, path);
  const std::size_t height = read_header_field(is, path);
  const std::size_t maxval = read_header_field(is, path);
  if (maxval != 255 || width == 0 || height == 0) {
    throw std::runtime_error("unsupported PPM layout: " + path.string());
  }
  is.get();  // single whitespace before the payload
  std::vector<unsigned char> payload(width * height * 3);
  is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!is) throw std::runtime_error("truncated PPM payload: " + path.string());
  Image img(3, height, width);
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        img.at(c, y, x) = static_cast<float>(payload[(y * width + x) * 3 + c]) / 255.0f;
      }
    }
  }
  return img;
}

void export_ppm(const std::vector<DomainDataset>& datasets, const std::filesystem::path& directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw std::runtime_error("cannot create " + directory.string() + ": " + ec.message());
  for (const DomainDataset& ds : datasets) {
    std::array<std::size_t, kNumClasses> counters{};
    for (const Sample& s : ds.samples) {
      const auto index = counters[static_cast<std::size_t>(s.label)]++;
      const std::string name = std::string(domain_name(ds.domain)) + "_" +
                               std::string(class_name(s.label)) + "_" + std::to_string(index) + ".ppm";
      write_ppm(s.image, directory / name);
    }
  }
}

}  // namespace placelab
