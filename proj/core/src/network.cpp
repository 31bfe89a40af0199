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

#include "placelab/network.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "placelab/errors.hpp"

namespace placelab {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

std::string_view to_string(LayerId id) {
  static constexpr std::array<std::string_view, 4> kNames = {"L1", "L2", "L3", "L4"};
  return kNames[layer_index(id)];
}

LayerId parse_layer(std::string_view text) {
  for (LayerId id : kAllLayers) {
    if (text == to_string(id)) return id;
  }
  throw ConfigError("unknown layer '" + std::string(text) + "' (expected L1..L4)");
}

namespace {

template <typename T>
Tensor<T> normal_init(Shape shape, double stddev, RandomStream& rng) {
  std::vector<T> values(shape_numel(shape));
  for (T& v : values) v = static_cast<T>(rng.normal() * stddev);
  return Tensor<T>::from(std::move(shape), std::move(values), true);
}

}  // namespace

template <typename T>
Network<T>::Network(const NetworkConfig& config, RandomStream& init) : config_(config) {
  std::size_t in = config.in_channels;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const std::size_t out = config.widths[b];
    const std::size_t fan_in = in * 9;
    Block& blk = blocks_[b];
    blk.conv_weight = normal_init<T>({out, in, 3, 3}, std::sqrt(2.0 / fan_in), init);
    blk.conv_bias = Tensor<T>::zeros({out}, true);
    blk.bn_scale = Tensor<T>::full({out}, T{1}, true);
    blk.bn_shift = Tensor<T>::zeros({out}, true);
    blk.bn_stats.running_mean.assign(out, T{0});
    blk.bn_stats.running_var.assign(out, T{1});
    in = out;
  }
  head_weight_ = normal_init<T>({in, config.num_classes}, std::sqrt(1.0 / in), init);
  head_bias_ = Tensor<T>::zeros({config.num_classes}, true);
}

template <typename T>
typename Network<T>::Output Network<T>::forward(const Tensor<T>& images, Mode mode,
                                                std::span<const FeatureHook<T>> hooks) {
  std::size_t place_hooks = 0;
  for (const auto& hook : hooks) place_hooks += hook.kind == HookKind::kPlace ? 1 : 0;
  if (place_hooks > 1) {
    throw ContractError("forward: at most one PLACE hook per forward pass");
  }
  if (images.rank() != 4 || images.dim(1) != config_.in_channels) {
    throw ShapeError("forward: expected N x " + std::to_string(config_.in_channels) +
                     " x H x W images, got " + shape_str(images.shape()));
  }
  const bool training = mode == Mode::kTrain;
  Output result;
  Tensor<T> x = images;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    Block& blk = blocks_[b];
    x = conv2d(x, blk.conv_weight, blk.conv_bias, 1);
    x = batch_norm(x, blk.bn_scale, blk.bn_shift, blk.bn_stats, training,
                   static_cast<T>(config_.bn_eps), static_cast<T>(config_.bn_momentum));
    x = relu(x);
    x = max_pool_2x2(x);
    result.blocks[b] = x;
    for (const auto& hook : hooks) {
      if (layer_index(hook.layer) != b) continue;
      if (!training && hook.kind != HookKind::kOther) continue;
      Tensor<T> replaced = hook.transform(x);
      if (replaced.shape() != x.shape()) {
        throw ContractError("forward: hook at " + std::string(to_string(hook.layer)) +
                            " changed feature shape " + shape_str(x.shape()) + " -> " +
                            shape_str(replaced.shape()));
      }
      x = replaced;
    }
  }
  result.features = global_avg_pool(x);
  result.logits = linear(result.features, head_weight_, head_bias_);
  return result;
}

template <typename T>
Network<T> Network<T>::clone() const {
  Network copy = *this;
  const auto deep = [](const Tensor<T>& t) {
    auto values = t.values();
    return Tensor<T>::from(t.shape(), std::move(values), t.requires_grad());
  };
  for (Block& blk : copy.blocks_) {
    blk.conv_weight = deep(blk.conv_weight);
    blk.conv_bias = deep(blk.conv_bias);
    blk.bn_scale = deep(blk.bn_scale);
    blk.bn_shift = deep(blk.bn_shift);
  }
  copy.head_weight_ = deep(head_weight_);
  copy.head_bias_ = deep(head_bias_);
  return copy;
}

template <typename T>
std::vector<Tensor<T>> Network<T>::parameters() const {
  std::vector<Tensor<T>> out;
  for (const Block& blk : blocks_) {
    out.insert(out.end(), {blk.conv_weight, blk.conv_bias, blk.bn_scale, blk.bn_shift});
  }
  out.push_back(head_weight_);
  out.push_back(head_bias_);
  return out;
}

template <typename T>
std::vector<NamedTensor<T>> Network<T>::state() const {
  std::vector<NamedTensor<T>> out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    const Block& blk = blocks_[b];
    const std::string prefix = "block" + std::to_string(b + 1) + ".";
    const std::size_t c = blk.bn_stats.running_mean.size();
    out.push_back({prefix + "conv.weight", blk.conv_weight, true});
    out.push_back({prefix + "conv.bias", blk.conv_bias, true});
    out.push_back({prefix + "bn.weight", blk.bn_scale, true});
    out.push_back({prefix + "bn.bias", blk.bn_shift, true});
    out.push_back({prefix + "bn.running_mean", Tensor<T>::from({c}, blk.bn_stats.running_mean), false});
    out.push_back({prefix + "bn.running_var", Tensor<T>::from({c}, blk.bn_stats.running_var), false});
  }
  out.push_back({"head.weight", head_weight_, true});
  out.push_back({"head.bias", head_bias_, true});
  return out;
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t total = 0;
  for (const auto& p : parameters()) total += p.numel();
  return total;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto p : parameters()) p.zero_grad();
}

namespace {

template <typename V>
void write_pod(std::ofstream& os, const V& value) {
  os.write(reinterpret_cast<const char*>(&value), sizeof(V));
}

template <typename V>
V read_pod(std::ifstream& is, const std::filesystem::path& path) {
  V value{};
  is.read(reinterpret_cast<char*>(&value), sizeof(V));
  if (!is) throw std::runtime_error("checkpoint " + path.string() + ": truncated file");
  return value;
}

}  // namespace

template <typename T>
void Network<T>::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("checkpoint " + path.string() + ": cannot open for writing");
  const auto arrays = state();
  os.write(kCheckpointMagic.data(), kCheckpointMagic.size());
  write_pod(os, kCheckpointVersion);
  write_pod(os, static_cast<std::uint32_t>(sizeof(T)));
  write_pod(os, static_cast<std::uint64_t>(arrays.size()));
  for (const auto& entry : arrays) {
    write_pod(os, static_cast<std::uint32_t>(entry.name.size()));
    os.write(entry.name.data(), static_cast<std::streamsize>(entry.name.size()));
    write_pod(os, static_cast<std::uint32_t>(entry.tensor.rank()));
    for (std::size_t d : entry.tensor.shape()) write_pod(os, static_cast<std::uint64_t>(d));
    os.write(reinterpret_cast<const char*>(entry.tensor.data().data()),
             static_cast<std::streamsize>(entry.tensor.numel() * sizeof(T)));
  }
  if (!os) throw std::runtime_error("checkpoint " + path.string() + ": write failed");
}

template <typename T>
void Network<T>::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("checkpoint " + path.string() + ": cannot open");
  std::array<char, 4> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kCheckpointMagic) {
    throw std::runtime_error("checkpoint " + path.string() + ": bad magic");
  }
  if (read_pod<std::uint32_t>(is, path) != kCheckpointVersion) {
    throw std::runtime_error("checkpoint " + path.string() + ": unsupported version");
  }
  if (read_pod<std::uint32_t>(is, path) != sizeof(T)) {
    throw std::runtime_error("checkpoint " + path.string() + ": scalar type mismatch");
  }
  auto arrays = state();
  if (read_pod<std::uint64_t>(is, path) != arrays.size()) {
    throw std::runtime_error("checkpoint " + path.string() + ": array count mismatch");
  }
  std::vector<std::vector<T>> loaded;
  for (const auto& entry : arrays) {
    const auto name_len = read_pod<std::uint32_t>(is, path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is || name != entry.name) {
      throw std::runtime_error("checkpoint " + path.string() + ": expected array '" +
                               entry.name + "'");
    }
    const auto rank = read_pod<std::uint32_t>(is, path);
    Shape shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<std::size_t>(read_pod<std::uint64_t>(is, path)));
    }
    if (shape != entry.tensor.shape()) {
      throw std::runtime_error("checkpoint " + path.string() + ": shape mismatch for '" +
                               entry.name + "'");
    }
    std::vector<T> values(entry.tensor.numel());
    is.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(T)));
    if (!is) throw std::runtime_error("checkpoint " + path.string() + ": truncated file");
    loaded.push_back(std::move(values));
  }
  // Commit only after the whole file validated.
  std::size_t i = 0;
  for (Block& blk : blocks_) {
    for (Tensor<T>* t : {&blk.conv_weight, &blk.conv_bias, &blk.bn_scale, &blk.bn_shift}) {
      std::copy(loaded[i].begin(), loaded[i].end(), t->data().begin());
      ++i;
    }
    blk.bn_stats.running_mean = std::move(loaded[i++]);
    blk.bn_stats.running_var = std::move(loaded[i++]);
  }
  std::copy(loaded[i].begin(), loaded[i].end(), head_weight_.data().begin());
  ++i;
  std::copy(loaded[i].begin(), loaded[i].end(), head_bias_.data().begin());
}

template class Network<float>;
template class Network<double>;

}  // namespace placelab
