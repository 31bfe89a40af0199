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

#include "placelab/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "placelab/errors.hpp"

namespace placelab {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
Eigen::Map<const RowMatrix<T>> cmat(const T* p, std::size_t rows, std::size_t cols) {
  return {p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

template <typename T>
Eigen::Map<RowMatrix<T>> mmat(T* p, std::size_t rows, std::size_t cols) {
  return {p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols)};
}

struct ConvGeometry {
  std::size_t n, cin, h, w, cout, k, pad, ho, wo;
  std::size_t patch() const { return cin * k * k; }
  std::size_t columns() const { return n * ho * wo; }
};

// cols[(ci*k + ky)*k + kx][(s*ho + y)*wo + x] = input[s][ci][y+ky-pad][x+kx-pad]
template <typename T>
void im2col(const T* input, const ConvGeometry& g, T* cols) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((ci * g.k + ky) * g.k + kx) * g.columns();
        for (std::size_t s = 0; s < g.n; ++s) {
          const T* src = input + (s * g.cin + ci) * g.h * g.w;
          T* dst = row + s * plane;
          for (std::size_t y = 0; y < g.ho; ++y) {
            const auto iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.pad);
            T* out = dst + y * g.wo;
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) {
              std::fill(out, out + g.wo, T{0});
              continue;
            }
            const T* in_row = src + static_cast<std::size_t>(iy) * g.w;
            for (std::size_t x = 0; x < g.wo; ++x) {
              const auto ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pad);
              out[x] = (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) ? T{0} : in_row[ix];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const ConvGeometry& g, T* grad_input) {
  const std::size_t plane = g.ho * g.wo;
  for (std::size_t ci = 0; ci < g.cin; ++ci) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((ci * g.k + ky) * g.k + kx) * g.columns();
        for (std::size_t s = 0; s < g.n; ++s) {
          T* dst = grad_input + (s * g.cin + ci) * g.h * g.w;
          const T* src = row + s * plane;
          for (std::size_t y = 0; y < g.ho; ++y) {
            const auto iy = static_cast<std::ptrdiff_t>(y + ky) - static_cast<std::ptrdiff_t>(g.pad);
            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
            T* in_row = dst + static_cast<std::size_t>(iy) * g.w;
            const T* c = src + y * g.wo;
            for (std::size_t x = 0; x < g.wo; ++x) {
              const auto ix = static_cast<std::ptrdiff_t>(x + kx) - static_cast<std::ptrdiff_t>(g.pad);
              if (ix >= 0 && ix < static_cast<std::ptrdiff_t>(g.w)) in_row[ix] += c[x];
            }
          }
        }
      }
    }
  }
}

}  // namespace

namespace {

// Samples per GEMM so that one im2col block stays cache-resident.
std::size_t conv_group(const ConvGeometry& g) {
  constexpr std::size_t kTargetColumns = 2048;
  return std::clamp<std::size_t>(kTargetColumns / std::max<std::size_t>(1, g.ho * g.wo), 1, g.n);
}

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::array<std::vector<T>, 3> buffers;
  return buffers[static_cast<std::size_t>(slot)];
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t padding) {
  if (input.rank() != 4 || kernel.rank() != 4 || kernel.dim(1) != input.dim(1) ||
      kernel.dim(2) != kernel.dim(3) || bias.numel() != kernel.dim(0)) {
    throw ShapeError("conv2d: input " + shape_str(input.shape()) + ", kernel " +
                     shape_str(kernel.shape()) + ", bias " + shape_str(bias.shape()));
  }
  ConvGeometry full{input.dim(0), input.dim(1), input.dim(2), input.dim(3), kernel.dim(0),
                    kernel.dim(2), padding, 0, 0};
  if (full.h + 2 * padding < full.k || full.w + 2 * padding < full.k) {
    throw ShapeError("conv2d: kernel larger than padded input");
  }
  full.ho = full.h + 2 * padding - full.k + 1;
  full.wo = full.w + 2 * padding - full.k + 1;
  const std::size_t plane = full.ho * full.wo;
  const std::size_t in_sample = full.cin * full.h * full.w;
  const std::size_t group = conv_group(full);

  std::vector<T> out(full.n * full.cout * plane);
  auto& cols = scratch<T>(0);
  auto& product = scratch<T>(1);
  for (std::size_t s0 = 0; s0 < full.n; s0 += group) {
    ConvGeometry g = full;
    g.n = std::min(group, full.n - s0);
    cols.resize(g.patch() * g.columns());
    product.resize(g.cout * g.columns());
    im2col(input.data().data() + s0 * in_sample, g, cols.data());
    mmat(product.data(), g.cout, g.columns()).noalias() =
        cmat(kernel.data().data(), g.cout, g.patch()) * cmat(cols.data(), g.patch(), g.columns());
    for (std::size_t s = 0; s < g.n; ++s) {
      for (std::size_t co = 0; co < g.cout; ++co) {
        const T b = bias.data()[co];
        const T* src = product.data() + co * g.columns() + s * plane;
        T* dst = out.data() + ((s0 + s) * g.cout + co) * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] + b;
      }
    }
  }

  return Tensor<T>::from_op(
      "conv2d", {full.n, full.cout, full.ho, full.wo}, std::move(out), {input, kernel, bias},
      [full, group, input, kernel](std::span<const T> grad, std::span<const std::span<T>> gi) {
        const std::size_t plane = full.ho * full.wo;
        const std::size_t in_sample = full.cin * full.h * full.w;
        if (!gi[2].empty()) {
          for (std::size_t co = 0; co < full.cout; ++co) {
            T acc = 0;
            for (std::size_t s = 0; s < full.n; ++s) {
              const T* src = grad.data() + (s * full.cout + co) * plane;
              for (std::size_t i = 0; i < plane; ++i) acc += src[i];
            }
            gi[2][co] += acc;
          }
        }
        if (gi[0].empty() && gi[1].empty()) return;
        auto& cols = scratch<T>(0);
        auto& gmat = scratch<T>(1);
        auto& dcols = scratch<T>(2);
        for (std::size_t s0 = 0; s0 < full.n; s0 += group) {
          ConvGeometry g = full;
          g.n = std::min(group, full.n - s0);
          gmat.resize(g.cout * g.columns());
          for (std::size_t s = 0; s < g.n; ++s) {
            for (std::size_t co = 0; co < g.cout; ++co) {
              const T* src = grad.data() + ((s0 + s) * g.cout + co) * plane;
              std::copy(src, src + plane, gmat.data() + co * g.columns() + s * plane);
            }
          }
          const auto gm = cmat(gmat.data(), g.cout, g.columns());
          if (!gi[1].empty()) {
            cols.resize(g.patch() * g.columns());
            im2col(input.data().data() + s0 * in_sample, g, cols.data());
            mmat(gi[1].data(), g.cout, g.patch()).noalias() +=
                gm * cmat(cols.data(), g.patch(), g.columns()).transpose();
          }
          if (!gi[0].empty()) {
            dcols.resize(g.patch() * g.columns());
            mmat(dcols.data(), g.patch(), g.columns()).noalias() =
                cmat(kernel.data().data(), g.cout, g.patch()).transpose() * gm;
            col2im_add(dcols.data(), g, gi[0].data() + s0 * in_sample);
          }
        }
      });
}

template <typename T>
Tensor<T> batch_norm(const Tensor<T>& input, const Tensor<T>& scale, const Tensor<T>& shift,
                     BatchNormStats<T>& stats, bool training, T eps, T momentum) {
  if (input.rank() != 4 && input.rank() != 2) {
    throw ShapeError("batch_norm: expected rank 2 or 4, got " + shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t inner = input.numel() / (n * c);
  if (scale.numel() != c || shift.numel() != c) {
    throw ShapeError("batch_norm: scale/shift do not match " + std::to_string(c) + " channels");
  }
  if (stats.running_mean.size() != c || stats.running_var.size() != c) {
    throw ShapeError("batch_norm: running statistics do not match channel count");
  }
  const std::size_t count = n * inner;
  if (count == 0) throw ContractError("batch_norm: empty batch");
  const T* x = input.data().data();

  std::vector<T> mean(c), inv_std(c);
  if (training) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      // Plane sums in T, accumulated across samples in double; the order is fixed.
      double acc = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = x + (s * c + ch) * inner;
        T plane = 0;
        for (std::size_t i = 0; i < inner; ++i) plane += p[i];
        acc += plane;
      }
      const double mu = acc / static_cast<double>(count);
      const T mu_t = static_cast<T>(mu);
      double sq = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const T* p = x + (s * c + ch) * inner;
        T plane = 0;
        for (std::size_t i = 0; i < inner; ++i) plane += (p[i] - mu_t) * (p[i] - mu_t);
        sq += plane;
      }
      const double var = sq / static_cast<double>(count);
      mean[ch] = mu_t;
      inv_std[ch] = static_cast<T>(1.0 / std::sqrt(var + static_cast<double>(eps)));
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      stats.running_mean[ch] =
          static_cast<T>((1.0 - momentum) * stats.running_mean[ch] + momentum * mu);
      stats.running_var[ch] =
          static_cast<T>((1.0 - momentum) * stats.running_var[ch] + momentum * unbiased);
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = stats.running_mean[ch];
      inv_std[ch] = static_cast<T>(
          1.0 / std::sqrt(static_cast<double>(stats.running_var[ch]) + static_cast<double>(eps)));
    }
  }

  std::vector<T> out(input.numel());
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t base = (s * c + ch) * inner;
      const T k = scale.data()[ch] * inv_std[ch];
      const T b = shift.data()[ch] - mean[ch] * k;
      for (std::size_t i = 0; i < inner; ++i) out[base + i] = x[base + i] * k + b;
    }
  }

  return Tensor<T>::from_op(
      training ? "batch_norm" : "batch_norm_eval", input.shape(), std::move(out),
      {input, scale, shift},
      [n, c, inner, training, input, scale, mean = std::move(mean),
       inv_std = std::move(inv_std)](std::span<const T> g, std::span<const std::span<T>> gi) {
        const T* x = input.data().data();
        const double count = static_cast<double>(n * inner);
        for (std::size_t ch = 0; ch < c; ++ch) {
          const T mu = mean[ch], is = inv_std[ch];
          double sum_g = 0.0, sum_g_xh = 0.0;
          for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + ch) * inner;
            T pg = 0, pgx = 0;
            for (std::size_t i = 0; i < inner; ++i) {
              pg += g[base + i];
              pgx += g[base + i] * (x[base + i] - mu);
            }
            sum_g += pg;
            sum_g_xh += static_cast<double>(pgx) * is;
          }
          if (!gi[1].empty()) gi[1][ch] += static_cast<T>(sum_g_xh);
          if (!gi[2].empty()) gi[2][ch] += static_cast<T>(sum_g);
          if (gi[0].empty()) continue;
          const T k = scale.data()[ch] * is;
          if (!training) {
            for (std::size_t s = 0; s < n; ++s) {
              const std::size_t base = (s * c + ch) * inner;
              for (std::size_t i = 0; i < inner; ++i) gi[0][base + i] += k * g[base + i];
            }
            continue;
          }
          const T mean_g = static_cast<T>(sum_g / count);
          const T coef = static_cast<T>(sum_g_xh / count) * is;
          for (std::size_t s = 0; s < n; ++s) {
            const std::size_t base = (s * c + ch) * inner;
            for (std::size_t i = 0; i < inner; ++i) {
              gi[0][base + i] += k * (g[base + i] - mean_g - (x[base + i] - mu) * coef);
            }
          }
        }
      });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& input) {
  std::vector<T> out(input.numel());
  const auto x = input.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  return Tensor<T>::from_op("relu", input.shape(), std::move(out), {input},
                            [input](std::span<const T> g, std::span<const std::span<T>> gi) {
                              const T* x = input.data().data();
                              const T* gp = g.data();
                              T* out = gi[0].data();
                              const std::size_t n = g.size();
                              for (std::size_t i = 0; i < n; ++i) out[i] += x[i] > T{0} ? gp[i] : T{0};
                            });
}

template <typename T>
Tensor<T> max_pool_2x2(const Tensor<T>& input) {
  if (input.rank() != 4 || input.dim(2) % 2 != 0 || input.dim(3) % 2 != 0) {
    throw ShapeError("max_pool_2x2: expected N x C x even H x even W, got " +
                     shape_str(input.shape()));
  }
  const std::size_t planes = input.dim(0) * input.dim(1);
  const std::size_t h = input.dim(2), w = input.dim(3), ho = h / 2, wo = w / 2;
  std::vector<T> out(planes * ho * wo);
  std::vector<std::uint32_t> argmax(out.size());
  const auto x = input.data();
  for (std::size_t p = 0; p < planes; ++p) {
    for (std::size_t y = 0; y < ho; ++y) {
      for (std::size_t xo = 0; xo < wo; ++xo) {
        std::size_t best = p * h * w + (2 * y) * w + 2 * xo;
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t idx = p * h * w + (2 * y + dy) * w + 2 * xo + dx;
            if (x[idx] > x[best]) best = idx;
          }
        }
        const std::size_t o = (p * ho + y) * wo + xo;
        out[o] = x[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return Tensor<T>::from_op(
      "max_pool_2x2", {input.dim(0), input.dim(1), ho, wo}, std::move(out), {input},
      [argmax = std::move(argmax)](std::span<const T> g, std::span<const std::span<T>> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) gi[0][argmax[i]] += g[i];
      });
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  if (input.rank() != 4) {
    throw ShapeError("global_avg_pool: expected rank 4, got " + shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1);
  const std::size_t hw = input.dim(2) * input.dim(3);
  std::vector<T> out(n * c);
  for (std::size_t p = 0; p < n * c; ++p) {
    double acc = 0.0;
    for (std::size_t i = 0; i < hw; ++i) acc += input.data()[p * hw + i];
    out[p] = static_cast<T>(acc / static_cast<double>(hw));
  }
  return Tensor<T>::from_op("global_avg_pool", {n, c}, std::move(out), {input},
                            [hw](std::span<const T> g, std::span<const std::span<T>> gi) {
                              const T inv = T{1} / static_cast<T>(hw);
                              for (std::size_t p = 0; p < g.size(); ++p) {
                                for (std::size_t i = 0; i < hw; ++i) gi[0][p * hw + i] += g[p] * inv;
                              }
                            });
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  return add_channel_bias(matmul(x, weight), bias);
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    throw ShapeError("softmax_cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  std::vector<T> probs(n * k);
  std::vector<int> targets(labels.begin(), labels.end());
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const int y = targets[s];
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(y) +
                          " outside [0, " + std::to_string(k) + ")");
    }
    const T* row = logits.data().data() + s * k;
    const T peak = *std::max_element(row, row + k);
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(static_cast<double>(row[j] - peak));
    const double log_z = std::log(z) + peak;
    for (std::size_t j = 0; j < k; ++j) {
      probs[s * k + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - log_z));
    }
    total += log_z - static_cast<double>(row[y]);
  }
  const double loss = total / static_cast<double>(n);
  return Tensor<T>::from_op(
      "softmax_cross_entropy", {1}, {static_cast<T>(loss)}, {logits},
      [n, k, probs = std::move(probs), targets = std::move(targets)](
          std::span<const T> g, std::span<const std::span<T>> gi) {
        const T f = g[0] / static_cast<T>(n);
        for (std::size_t s = 0; s < n; ++s) {
          for (std::size_t j = 0; j < k; ++j) {
            const T onehot = static_cast<int>(j) == targets[s] ? T{1} : T{0};
            gi[0][s * k + j] += f * (probs[s * k + j] - onehot);
          }
        }
      });
}

#define PLACELAB_INSTANTIATE(T)                                                          \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,        \
                            std::size_t);                                                \
  template Tensor<T> batch_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                                BatchNormStats<T>&, bool, T, T);                         \
  template Tensor<T> relu(const Tensor<T>&);                                             \
  template Tensor<T> max_pool_2x2(const Tensor<T>&);                                     \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                  \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);       \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);

PLACELAB_INSTANTIATE(float)
PLACELAB_INSTANTIATE(double)

#undef PLACELAB_INSTANTIATE

}  // namespace placelab
