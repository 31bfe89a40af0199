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

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "placelab/tensor.hpp"

namespace placelab {

using GradcheckFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;
/// Second argument: the unperturbed inputs.
using GradcheckReferenceFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&,
                                                          const std::vector<Tensor<double>>&)>;

/// A differentiable function of some double tensors. The checked scalar is
/// sum(fn(inputs) * R) for a fixed random R.
///
/// Ops that treat some statistics as constants supply `numeric`, which
/// computes the same value with those statistics taken from the unperturbed
/// inputs; finite differences then run on it instead of on `fn`.
struct GradcheckCase {
  std::string op;
  GradcheckFn fn;
  std::vector<Tensor<double>> inputs;
  double tolerance = 1e-5;
  GradcheckReferenceFn numeric = {};
};

struct GradcheckResult {
  std::string op;
  /// max over elements of |analytic - numeric| / max(|analytic|, |numeric|, floor)
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  /// Location of the worst element.
  std::string worst;
};

inline constexpr double kGradcheckStep = 1e-5;
inline constexpr double kGradcheckFloor = 1e-4;

/// Central differences with step h against the analytic gradient of every
/// input element.
GradcheckResult check_gradient(const GradcheckCase& c, double h = kGradcheckStep);

/// One case per differentiable operation plus a small network with dropout
/// and style hooks. Inputs keep a margin from ReLU and pooling kinks.
std::vector<GradcheckCase> default_gradcheck_cases(std::uint64_t seed = 0);

/// A square op whose backward rule is off by 1%; must fail the check.
GradcheckCase faulty_gradcheck_case();

std::vector<GradcheckResult> run_gradcheck(std::span<const GradcheckCase> cases);

/// One line per op; returns true when all passed.
bool print_gradcheck(std::ostream& out, std::span<const GradcheckResult> results);

}  // namespace placelab
