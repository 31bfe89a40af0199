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

#include "placelab/style.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "placelab/errors.hpp"

namespace placelab {

namespace {

struct PlaneLayout {
  std::size_t samples, channels, plane;
};

template <typename T>
PlaneLayout layout_of(const Tensor<T>& f, const char* op) {
  if (f.rank() == 3) return {1, f.dim(0), f.dim(1) * f.dim(2)};
  if (f.rank() == 4) return {f.dim(0), f.dim(1), f.dim(2) * f.dim(3)};
  throw ShapeError(std::string(op) + ": expected C x H x W or N x C x H x W, got " +
                   shape_str(f.shape()));
}

}  // namespace

template <typename T>
StyleStats<T> channel_stats(const Tensor<T>& features) {
  const PlaneLayout l = layout_of(features, "channel_stats");
  StyleStats<T> stats{l.samples, l.channels, std::vector<T>(l.samples * l.channels),
                      std::vector<T>(l.samples * l.channels)};
  const auto x = features.data();
  for (std::size_t p = 0; p < l.samples * l.channels; ++p) {
    const T* v = x.data() + p * l.plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < l.plane; ++i) acc += v[i];
    const double mu = acc / static_cast<double>(l.plane);
    double sq = 0.0;
    for (std::size_t i = 0; i < l.plane; ++i) sq += (v[i] - mu) * (v[i] - mu);
    stats.mu[p] = static_cast<T>(mu);
    stats.sigma[p] = static_cast<T>(std::sqrt(sq / static_cast<double>(l.plane)));
  }
  return stats;
}

template <typename T>
Tensor<T> adain(const Tensor<T>& features, const StyleStats<T>& target, T eps) {
  const PlaneLayout l = layout_of(features, "adain");
  if (target.samples != l.samples || target.channels != l.channels) {
    throw ShapeError("adain: target statistics are " + std::to_string(target.samples) + "x" +
                     std::to_string(target.channels) + ", features " +
                     shape_str(features.shape()));
  }
  const StyleStats<T> own = channel_stats(features);
  const auto x = features.data();
  std::vector<T> out(x.size());
  for (std::size_t p = 0; p < l.samples * l.channels; ++p) {
    const T inv = T{1} / (own.sigma[p] + eps);
    const T* v = x.data() + p * l.plane;
    T* o = out.data() + p * l.plane;
    for (std::size_t i = 0; i < l.plane; ++i) {
      o[i] = target.sigma[p] * ((v[i] - own.mu[p]) * inv) + target.mu[p];
    }
  }
  return Tensor<T>::from_op(
      "adain", features.shape(), std::move(out), {features},
      [features, l, own, scale = target.sigma, eps](std::span<const T> g,
                                                    std::span<const std::span<T>> gi) {
        const auto x = features.data();
        const double n = static_cast<double>(l.plane);
        for (std::size_t p = 0; p < l.samples * l.channels; ++p) {
          const T* v = x.data() + p * l.plane;
          const T* gp = g.data() + p * l.plane;
          T* dst = gi[0].data() + p * l.plane;
          const double mu = own.mu[p], sigma = own.sigma[p];
          const double d = sigma + eps;
          double sum_gh = 0.0, sum_gh_centered = 0.0;
          for (std::size_t i = 0; i < l.plane; ++i) {
            const double gh = static_cast<double>(scale[p]) * gp[i];
            sum_gh += gh;
            sum_gh_centered += gh * (v[i] - mu);
          }
          const double mean_gh = sum_gh / n;
          // d sigma / d x_j = (x_j - mu) / (n sigma); taken as 0 for a constant plane.
          const double coupling = sigma > 0.0 ? sum_gh_centered / (n * sigma * d * d) : 0.0;
          for (std::size_t i = 0; i < l.plane; ++i) {
            const double gh = static_cast<double>(scale[p]) * gp[i];
            dst[i] += static_cast<T>((gh - mean_gh) / d - (v[i] - mu) * coupling);
          }
        }
      });
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> swap_style(const Tensor<T>& fx, const Tensor<T>& fy, T eps) {
  if (fx.shape() != fy.shape()) {
    throw ShapeError("swap_style: " + shape_str(fx.shape()) + " vs " + shape_str(fy.shape()));
  }
  const StyleStats<T> sx = channel_stats(fx);
  const StyleStats<T> sy = channel_stats(fy);
  return {adain(fx, sy, eps), adain(fy, sx, eps)};
}

template <typename T>
Tensor<T> mix_style(const Tensor<T>& fx, const Tensor<T>& fy, T lambda, T eps) {
  if (fx.shape() != fy.shape()) {
    throw ShapeError("mix_style: " + shape_str(fx.shape()) + " vs " + shape_str(fy.shape()));
  }
  if (!(lambda >= T{0} && lambda <= T{1})) {
    throw ContractError("mix_style: lambda must lie in [0, 1]");
  }
  const StyleStats<T> sx = channel_stats(fx);
  const StyleStats<T> sy = channel_stats(fy);
  StyleStats<T> mixed = sx;
  for (std::size_t i = 0; i < mixed.mu.size(); ++i) {
    mixed.mu[i] = lambda * sx.mu[i] + (T{1} - lambda) * sy.mu[i];
    mixed.sigma[i] = lambda * sx.sigma[i] + (T{1} - lambda) * sy.sigma[i];
  }
  return adain(fx, mixed, eps);
}

std::vector<std::size_t> random_permutation(std::size_t n, RandomStream& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.below(static_cast<std::uint32_t>(i))]);
  }
  return perm;
}

namespace {

template <typename T>
void check_partner(const Tensor<T>& features, std::span<const std::size_t> partner,
                   const char* op) {
  if (features.rank() != 4 || partner.size() != features.dim(0)) {
    throw ShapeError(std::string(op) + ": " + std::to_string(partner.size()) +
                     " partners for features " + shape_str(features.shape()));
  }
  for (std::size_t p : partner) {
    if (p >= partner.size()) throw ContractError(std::string(op) + ": partner index out of range");
  }
}

}  // namespace

template <typename T>
Tensor<T> batch_swap_with(const Tensor<T>& features, std::span<const std::size_t> partner,
                          T eps) {
  check_partner(features, partner, "batch_swap_with");
  const StyleStats<T> own = channel_stats(features);
  StyleStats<T> target = own;
  const std::size_t c = own.channels;
  for (std::size_t s = 0; s < partner.size(); ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      target.mu[s * c + ch] = own.mu[partner[s] * c + ch];
      target.sigma[s * c + ch] = own.sigma[partner[s] * c + ch];
    }
  }
  return adain(features, target, eps);
}

template <typename T>
Tensor<T> batch_swap(const Tensor<T>& features, RandomStream& rng, T eps) {
  if (features.rank() != 4) {
    throw ShapeError("batch_swap: expected N x C x H x W, got " + shape_str(features.shape()));
  }
  if (features.dim(0) < 2) return features;
  const auto perm = random_permutation(features.dim(0), rng);
  return batch_swap_with(features, std::span<const std::size_t>(perm), eps);
}

template <typename T>
Tensor<T> batch_mix_with(const Tensor<T>& features, std::span<const std::size_t> partner,
                         std::span<const T> lambda, T eps) {
  check_partner(features, partner, "batch_mix_with");
  if (lambda.size() != partner.size()) {
    throw ShapeError("batch_mix_with: one lambda per sample required");
  }
  const StyleStats<T> own = channel_stats(features);
  StyleStats<T> target = own;
  const std::size_t c = own.channels;
  for (std::size_t s = 0; s < partner.size(); ++s) {
    const T w = lambda[s];
    if (!(w >= T{0} && w <= T{1})) throw ContractError("batch_mix_with: lambda outside [0, 1]");
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t i = s * c + ch, j = partner[s] * c + ch;
      target.mu[i] = w * own.mu[i] + (T{1} - w) * own.mu[j];
      target.sigma[i] = w * own.sigma[i] + (T{1} - w) * own.sigma[j];
    }
  }
  return adain(features, target, eps);
}

template <typename T>
Tensor<T> batch_mix(const Tensor<T>& features, RandomStream& rng, T eps) {
  if (features.rank() != 4) {
    throw ShapeError("batch_mix: expected N x C x H x W, got " + shape_str(features.shape()));
  }
  if (features.dim(0) < 2) return features;
  const auto perm = random_permutation(features.dim(0), rng);
  std::vector<T> lambda(perm.size());
  for (T& w : lambda) w = static_cast<T>(rng.uniform());
  return batch_mix_with(features, std::span<const std::size_t>(perm),
                        std::span<const T>(lambda), eps);
}

void StyleConfig::validate() const {
  if (!(eps > 0.0)) throw ConfigError("style.eps must be positive");
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw ConfigError("style.probability must lie in [0, 1]");
  }
  if (mode != StyleMode::kOff && layers.empty()) {
    throw ConfigError("style.layers must not be empty when style.mode is on");
  }
  for (LayerId id : layers) {
    if (id != LayerId::kL1 && id != LayerId::kL2) {
      throw ConfigError("style.layers accepts only L1 and L2");
    }
  }
}

#define PLACELAB_INSTANTIATE(T)                                                              \
  template StyleStats<T> channel_stats(const Tensor<T>&);                                    \
  template Tensor<T> adain(const Tensor<T>&, const StyleStats<T>&, T);                       \
  template std::pair<Tensor<T>, Tensor<T>> swap_style(const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> mix_style(const Tensor<T>&, const Tensor<T>&, T, T);                    \
  template Tensor<T> batch_swap_with(const Tensor<T>&, std::span<const std::size_t>, T);     \
  template Tensor<T> batch_swap(const Tensor<T>&, RandomStream&, T);                         \
  template Tensor<T> batch_mix_with(const Tensor<T>&, std::span<const std::size_t>,          \
                                    std::span<const T>, T);                                  \
  template Tensor<T> batch_mix(const Tensor<T>&, RandomStream&, T);

PLACELAB_INSTANTIATE(float)
PLACELAB_INSTANTIATE(double)

#undef PLACELAB_INSTANTIATE

}  // namespace placelab
