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


#include "placelab/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "placelab/errors.hpp"
#include "placelab/layers.hpp"
#include "placelab/network.hpp"
#include "placelab/place_dropout.hpp"
#include "placelab/rng.hpp"
#include "placelab/style.hpp"

namespace placelab {

namespace {

using TensorD = Tensor<double>;
using Inputs = std::vector<TensorD>;

TensorD normal(Shape shape, RandomStream& rng, double stddev = 1.0, double mean = 0.0) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = mean + stddev * rng.normal();
  return TensorD::from(std::move(shape), std::move(v), true);
}

// Magnitudes in [0.1, 1] with random signs: no element near the ReLU kink.
TensorD away_from_zero(Shape shape, RandomStream& rng) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(0.1, 1.0) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
  return TensorD::from(std::move(shape), std::move(v), true);
}

// Distinct values 0.05 apart in random order: no pooling ties.
TensorD distinct(Shape shape, RandomStream& rng) {
  std::vector<double> v(shape_numel(shape));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i) - 1.0;
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(static_cast<std::uint32_t>(i))]);
  return TensorD::from(std::move(shape), std::move(v), true);
}

TensorD weighted_sum(const TensorD& out, std::span<const double> weights) {
  return sum(mul(out, TensorD::from(out.shape(), std::vector<double>(weights.begin(), weights.end()))));
}

Inputs fresh(const Inputs& inputs) {
  Inputs copy;
  for (const TensorD& t : inputs) copy.push_back(TensorD::from(t.shape(), t.values(), true));
  return copy;
}

}  // namespace

GradcheckResult check_gradient(const GradcheckCase& c, double h) {
  GradcheckResult result;
  result.op = c.op;
  result.tolerance = c.tolerance;

  Inputs inputs = fresh(c.inputs);
  const TensorD out = c.fn(inputs);
  RandomStream weight_rng({0x9e3779b9ULL, Purpose::kGeneric, 0, 0, 0});
  std::vector<double> weights(out.numel());
  for (double& w : weights) w = weight_rng.uniform(0.5, 1.5) * (weight_rng.bernoulli(0.5) ? 1.0 : -1.0);
  weighted_sum(out, weights).backward();

  const Inputs reference = fresh(c.inputs);
  const auto evaluate = [&](const Inputs& in) {
    NoGradGuard guard;
    return weighted_sum(c.numeric ? c.numeric(in, reference) : c.fn(in), weights).item();
  };
  if (c.numeric) {
    // Both forms must agree at the unperturbed point.
    const double direct = weighted_sum(out, weights).item();
    const double oracle = evaluate(reference);
    if (std::abs(direct - oracle) > 1e-9 * std::max(1.0, std::abs(direct))) {
      result.max_rel_error = std::numeric_limits<double>::infinity();
      result.worst = "reference function disagrees with the op's value";
      return result;
    }
  }

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    // An input the op never reached has a zero gradient.
    std::vector<double> analytic(inputs[i].numel(), 0.0);
    if (inputs[i].has_grad()) std::copy(inputs[i].grad().begin(), inputs[i].grad().end(), analytic.begin());
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      Inputs probe = fresh(c.inputs);
      std::vector<double> plus = probe[i].values();
      std::vector<double> minus = plus;
      plus[j] += h;
      minus[j] -= h;
      probe[i] = TensorD::from(c.inputs[i].shape(), std::move(plus), true);
      const double f_plus = evaluate(probe);
      probe[i] = TensorD::from(c.inputs[i].shape(), std::move(minus), true);
      const double f_minus = evaluate(probe);
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[j]), std::abs(numeric), kGradcheckFloor});
      const double err = std::abs(analytic[j] - numeric) / denom;
      if (!(err <= result.max_rel_error)) {
        result.max_rel_error = err;
        std::ostringstream where;
        where << "input " << i << " element " << j << ": analytic " << analytic[j] << ", numeric " << numeric;
        result.worst = where.str();
      }
    }
  }
  result.passed = result.max_rel_error < c.tolerance;
  return result;
}

std::vector<GradcheckCase> default_gradcheck_cases(std::uint64_t seed) {
  RandomStream rng({seed, Purpose::kGeneric, 0, 0, 0});
  std::vector<GradcheckCase> cases;
  const auto add_case = [&](std::string op, auto fn, Inputs inputs, double tol = 1e-5) {
    cases.push_back({std::move(op), std::move(fn), std::move(inputs), tol, {}});
  };

  add_case("add", [](const Inputs& x) { return add(x[0], x[1]); },
           {normal({3, 4}, rng), normal({3, 4}, rng)});
  add_case("mul", [](const Inputs& x) { return mul(x[0], x[1]); },
           {normal({3, 4}, rng), normal({3, 4}, rng)});
  add_case("mul_channel", [](const Inputs& x) { return mul(x[0], x[1]); },
           {normal({2, 3, 2, 2}, rng), normal({2, 3}, rng)});
  add_case("scale", [](const Inputs& x) { return scale(x[0], 0.75); }, {normal({5}, rng)});
  add_case("sum", [](const Inputs& x) { return sum(x[0]); }, {normal({2, 3}, rng)});
  add_case("reshape", [](const Inputs& x) { return reshape(x[0], {3, 2}); }, {normal({2, 3}, rng)});
  add_case("matmul", [](const Inputs& x) { return matmul(x[0], x[1]); },
           {normal({3, 4}, rng), normal({4, 5}, rng)});
  add_case("add_channel_bias", [](const Inputs& x) { return add_channel_bias(x[0], x[1]); },
           {normal({2, 3, 2, 2}, rng), normal({3}, rng)});
  add_case("conv2d", [](const Inputs& x) { return conv2d(x[0], x[1], x[2], 1); },
           {normal({2, 3, 5, 4}, rng), normal({4, 3, 3, 3}, rng, 0.3), normal({4}, rng)});
  add_case("conv2d_valid", [](const Inputs& x) { return conv2d(x[0], x[1], x[2], 0); },
           {normal({1, 2, 4, 5}, rng), normal({3, 2, 3, 3}, rng, 0.3), normal({3}, rng)});
  add_case("batch_norm",
           [](const Inputs& x) {
             BatchNormStats<double> stats{std::vector<double>(3, 0.0), std::vector<double>(3, 1.0)};
             return batch_norm(x[0], x[1], x[2], stats, true, 1e-5, 0.1);
           },
           {normal({4, 3, 2, 3}, rng, 2.0, 0.5), normal({3}, rng, 0.5, 1.0), normal({3}, rng)}, 1e-4);
  add_case("batch_norm_eval",
           [](const Inputs& x) {
             BatchNormStats<double> stats{{0.1, -0.2, 0.3}, {1.5, 0.5, 2.0}};
             return batch_norm(x[0], x[1], x[2], stats, false, 1e-5, 0.1);
           },
           {normal({2, 3, 2, 2}, rng), normal({3}, rng, 0.5, 1.0), normal({3}, rng)}, 1e-4);
  add_case("relu", [](const Inputs& x) { return relu(x[0]); }, {away_from_zero({2, 3, 4}, rng)});
  add_case("max_pool_2x2", [](const Inputs& x) { return max_pool_2x2(x[0]); }, {distinct({2, 2, 4, 6}, rng)});
  add_case("global_avg_pool", [](const Inputs& x) { return global_avg_pool(x[0]); },
           {normal({2, 3, 3, 2}, rng)});
  add_case("linear", [](const Inputs& x) { return linear(x[0], x[1], x[2]); },
           {normal({4, 6}, rng), normal({6, 3}, rng), normal({3}, rng)});
  add_case("softmax_cross_entropy",
           [](const Inputs& x) {
             static const std::vector<int> labels = {0, 3, 1, 4, 4};
             return softmax_cross_entropy(x[0], labels);
           },
           {normal({5, 5}, rng, 2.0)});

  const ChannelMask single{4, {1, 3}};
  add_case("apply_mask", [single](const Inputs& x) { return apply_mask(x[0], single); },
           {normal({4, 2, 3}, rng)});
  const std::vector<ChannelMask> masks = {{4, {0}}, {4, {2, 3}}, {4, {}}};
  add_case("apply_masks", [masks](const Inputs& x) { return apply_masks(x[0], std::span(masks)); },
           {normal({3, 4, 2, 2}, rng)});

  StyleStats<double> target{2, 3, {}, {}};
  for (int i = 0; i < 6; ++i) {
    target.mu.push_back(rng.normal());
    target.sigma.push_back(rng.uniform(0.5, 2.0));
  }
  add_case("adain", [target](const Inputs& x) { return adain(x[0], target); },
           {normal({2, 3, 3, 3}, rng, 1.5, 0.3)});
  // Donor statistics are constants: the reference forms restyle with
  // statistics of the unperturbed inputs.
  const auto permuted = [](const StyleStats<double>& own, std::span<const std::size_t> partner,
                           std::span<const double> lambda) {
    StyleStats<double> target = own;
    const std::size_t c = own.channels;
    for (std::size_t s = 0; s < partner.size(); ++s) {
      const double w = lambda.empty() ? 0.0 : lambda[s];
      for (std::size_t ch = 0; ch < c; ++ch) {
        const std::size_t i = s * c + ch, j = partner[s] * c + ch;
        target.mu[i] = w * own.mu[i] + (1.0 - w) * own.mu[j];
        target.sigma[i] = w * own.sigma[i] + (1.0 - w) * own.sigma[j];
      }
    }
    return target;
  };
  const auto mixed = [](const StyleStats<double>& x, const StyleStats<double>& y, double w) {
    StyleStats<double> target = x;
    for (std::size_t i = 0; i < x.mu.size(); ++i) {
      target.mu[i] = w * x.mu[i] + (1.0 - w) * y.mu[i];
      target.sigma[i] = w * x.sigma[i] + (1.0 - w) * y.sigma[i];
    }
    return target;
  };
  const Inputs pair = {normal({3, 4, 3}, rng, 1.0, 0.5), normal({3, 4, 3}, rng, 2.0, -0.5)};
  add_case("swap_style.first", [](const Inputs& x) { return swap_style(x[0], x[1]).first; }, pair);
  cases.back().numeric = [](const Inputs& x, const Inputs& ref) { return adain(x[0], channel_stats(ref[1])); };
  add_case("swap_style.second", [](const Inputs& x) { return swap_style(x[0], x[1]).second; }, pair);
  cases.back().numeric = [](const Inputs& x, const Inputs& ref) { return adain(x[1], channel_stats(ref[0])); };
  add_case("mix_style", [](const Inputs& x) { return mix_style(x[0], x[1], 0.3); }, pair);
  cases.back().numeric = [mixed](const Inputs& x, const Inputs& ref) {
    return adain(x[0], mixed(channel_stats(ref[0]), channel_stats(ref[1]), 0.3));
  };
  const std::vector<std::size_t> partner = {2, 0, 1};
  add_case("batch_swap_with", [partner](const Inputs& x) { return batch_swap_with(x[0], std::span(partner)); },
           {normal({3, 2, 3, 2}, rng, 1.0, 0.5)});
  cases.back().numeric = [partner, permuted](const Inputs& x, const Inputs& ref) {
    return adain(x[0], permuted(channel_stats(ref[0]), partner, {}));
  };
  const std::vector<double> lambda = {0.2, 0.9, 0.5};
  add_case("batch_mix_with",
           [partner, lambda](const Inputs& x) {
             return batch_mix_with(x[0], std::span(partner), std::span(lambda));
           },
           {normal({3, 2, 3, 2}, rng, 1.0, 0.5)});
  cases.back().numeric = [partner, lambda, permuted](const Inputs& x, const Inputs& ref) {
    return adain(x[0], permuted(channel_stats(ref[0]), partner, lambda));
  };

  // Whole network in training mode with a style hook at L1 and a dropout
  // mask at L3; gradients with respect to the input images.
  const auto net_forward = [partner, permuted](const TensorD& images, const StyleStats<double>* frozen) {
    static const std::vector<ChannelMask> masks = {{3, {1}}, {3, {}}, {3, {0, 2}}};
    static const std::vector<int> labels = {1, 3, 0};
    NetworkConfig config;
    config.widths = {3, 4, 3, 5};
    config.num_classes = 4;
    RandomStream init({7, Purpose::kInit, 0, 0, 0});
    Network<double> net(config, init);
    const std::vector<FeatureHook<double>> hooks = {
        {LayerId::kL1, HookKind::kOther,
         [&](const TensorD& f) {
           return frozen ? adain(f, permuted(*frozen, partner, {})) : batch_swap_with(f, std::span(partner));
         }},
        {LayerId::kL3, HookKind::kOther, [&](const TensorD& f) { return apply_masks(f, std::span(masks)); }},
    };
    auto out = net.forward(images, Mode::kTrain, hooks);
    return std::pair(softmax_cross_entropy(out.logits, labels), channel_stats(out.blocks[0]));
  };
  add_case("network", [net_forward](const Inputs& x) { return net_forward(x[0], nullptr).first; },
           {normal({3, 3, 16, 16}, rng)});
  cases.back().numeric = [net_forward](const Inputs& x, const Inputs& ref) {
    const StyleStats<double> frozen = net_forward(ref[0], nullptr).second;
    return net_forward(x[0], &frozen).first;
  };
  return cases;
}

GradcheckCase faulty_gradcheck_case() {
  RandomStream rng({1, Purpose::kGeneric, 0, 0, 0});
  return {"faulty_square",
          [](const Inputs& x) {
            const TensorD a = x[0];
            std::vector<double> out(a.numel());
            for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * a.data()[i];
            return TensorD::from_op("faulty_square", a.shape(), std::move(out), {a},
                                    [a](std::span<const double> g, std::span<const std::span<double>> gi) {
                                      for (std::size_t i = 0; i < g.size(); ++i) {
                                        gi[0][i] += 2.02 * a.data()[i] * g[i];
                                      }
                                    });
          },
          {normal({6}, rng)},
          1e-5};
}

std::vector<GradcheckResult> run_gradcheck(std::span<const GradcheckCase> cases) {
  std::vector<GradcheckResult> results;
  for (const GradcheckCase& c : cases) results.push_back(check_gradient(c));
  return results;
}

bool print_gradcheck(std::ostream& out, std::span<const GradcheckResult> results) {
  bool ok = true;
  for (const GradcheckResult& r : results) {
    ok = ok && r.passed;
    out << (r.passed ? "ok    " : "FAIL  ") << std::left << std::setw(24) << r.op << " max_rel_error "
        << std::scientific << std::setprecision(3) << r.max_rel_error << "  (tolerance " << r.tolerance
        << ")" << std::defaultfloat;
    if (!r.passed) out << "  worst at " << r.worst;
    out << '\n';
  }
  return ok;
}

}  // namespace placelab
