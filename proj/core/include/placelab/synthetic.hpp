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
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include "placelab/image.hpp"
#include "placelab/rng.hpp"

namespace placelab {

inline constexpr std::size_t kNumDomains = 4;
inline constexpr std::size_t kNumClasses = 5;

enum class ShapeClass { kDisk = 0, kSquare = 1, kTriangle = 2, kPlus = 3, kRing = 4 };
enum class DomainStyle { kFlatFill = 0, kOutlineSketch = 1, kNoisyTexture = 2, kInvertedPalette = 3 };

std::string_view class_name(int label);
std::string_view domain_name(int domain);
/// Accepts a domain name or its numeric id; throws ConfigError otherwise.
int parse_domain(std::string_view text);

struct Sample {
  Image image;
  int label = 0;
  int domain = 0;
};

struct DomainDataset {
  int domain = 0;
  std::vector<Sample> samples;
};

/// Rendering parameters of one domain. Jitter ranges keep every shape
/// inside the canvas: the shape fits in a disk of radius max_radius around a
/// center offset by at most center_jitter from the canvas center.
struct DomainSpec {
  DomainStyle style;
  std::string_view name;
  double noise_level;
  double min_radius_fraction = 0.24;
  double max_radius_fraction = 0.36;
  double center_jitter_fraction = 0.09;
};

const std::array<DomainSpec, kNumDomains>& domain_specs();

/// One image of `shape` in the style of `spec`, drawn from `rng`.
Image render_shape(const DomainSpec& spec, ShapeClass shape, std::size_t size, RandomStream& rng);

/// kNumDomains datasets, each holding per_class images of every class in
/// class order. Every image has its own stream keyed by (domain, class, index).
std::vector<DomainDataset> generate_dataset(std::uint64_t seed, std::size_t per_class,
                                            std::size_t size = 32);

struct Split {
  int target = 0;
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

/// Holds out `target` entirely; every (source domain, class) cell is split
/// into round(val_fraction * n) validation samples and the rest for training.
Split leave_one_out(const std::vector<DomainDataset>& datasets, int target, double val_fraction,
                    std::uint64_t seed);

/// Binary PPM (P6, maxval 255); values are scaled by 255 and rounded half up.
void write_ppm(const Image& image, const std::filesystem::path& path);
Image read_ppm(const std::filesystem::path& path);

/// Writes {domain}_{class}_{index}.ppm for every sample into `directory`.
void export_ppm(const std::vector<DomainDataset>& datasets, const std::filesystem::path& directory);

}  // namespace placelab
