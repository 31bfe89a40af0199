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
#include <limits>
#include <thread>

#include "placelab/errors.hpp"
#include "placelab/tensor.hpp"

using namespace placelab;
using TD = Tensor<double>;

TEST_CASE("factories validate shapes") {
  CHECK_THROWS_AS(TD::from({2, 2}, {1, 2, 3}), ShapeError);
  CHECK_THROWS_AS(TD::zeros({2, 0}), ShapeError);
  const TD t = TD::full({2, 3}, 1.5);
  CHECK(t.numel() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.dim(1) == 3);
  CHECK(t.data()[5] == 1.5);
  CHECK(TD::scalar(4.0).item() == 4.0);
  CHECK_THROWS_AS(t.item(), ContractError);
}

TEST_CASE("elementwise ops and their gradients") {
  const TD a = TD::from({3}, {1, 2, 3}, true);
  const TD b = TD::from({3}, {4, -5, 6}, true);
  const TD loss = sum(add(mul(a, b), scale(a, 2.0)));
  CHECK(loss.item() == doctest::Approx(4 - 10 + 18 + 12));
  loss.backward();
  // d/da = b + 2, d/db = a
  CHECK(a.grad()[0] == 6.0);
  CHECK(a.grad()[1] == -3.0);
  CHECK(b.grad()[2] == 3.0);
}

TEST_CASE("channel broadcast multiply") {
  const TD x = TD::from({1, 2, 1, 2}, {1, 2, 3, 4}, true);
  const TD m = TD::from({1, 2}, {0, 1}, true);
  const TD y = mul(x, m);
  CHECK(y.values() == std::vector<double>{0, 0, 3, 4});
  sum(y).backward();
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[3] == 1.0);
  CHECK(m.grad()[0] == 3.0);
  CHECK(m.grad()[1] == 7.0);
  CHECK_THROWS_AS(mul(x, TD::zeros({2, 2})), ShapeError);
}

TEST_CASE("matmul matches a hand product") {
  const TD a = TD::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  const TD b = TD::from({3, 2}, {7, 8, 9, 10, 11, 12}, true);
  const TD c = matmul(a, b);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(c.values() == std::vector<double>{58, 64, 139, 154});
  sum(c).backward();
  // dA = 1 * B^T rows sums: row sums of B
  CHECK(a.grad()[0] == 15.0);
  CHECK(a.grad()[2] == 23.0);
  // dB = A^T * 1: column sums of A
  CHECK(b.grad()[0] == 5.0);
  CHECK(b.grad()[5] == 9.0);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
}

TEST_CASE("leaf gradients accumulate until zero_grad") {
  TD a = TD::from({2}, {1, 2}, true);
  sum(scale(a, 3.0)).backward();
  sum(scale(a, 3.0)).backward();
  CHECK(a.grad()[0] == 6.0);
  a.zero_grad();
  CHECK(a.grad()[0] == 0.0);
}

TEST_CASE("shared subexpressions sum their gradients") {
  const TD a = TD::from({1}, {3}, true);
  const TD b = mul(a, a);         // a^2
  const TD c = add(b, mul(b, a));  // a^2 + a^3
  sum(c).backward();
  CHECK(a.grad()[0] == doctest::Approx(2 * 3 + 3 * 9));
}

TEST_CASE("backward preconditions") {
  const TD a = TD::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(a.backward(), ContractError);
  const TD bad = sum(scale(a, std::numeric_limits<double>::infinity()));
  CHECK_THROWS_AS(bad.backward(), NumericalError);
}

TEST_CASE("no-grad guard stops recording on its thread only") {
  const TD a = TD::from({2}, {1, 2}, true);
  {
    NoGradGuard guard;
    CHECK_FALSE(grad_mode_enabled());
    CHECK(sum(a).is_leaf());
    bool other = false;
    std::thread([&] { other = grad_mode_enabled(); }).join();
    CHECK(other);
  }
  CHECK(grad_mode_enabled());
  CHECK_FALSE(sum(a).is_leaf());
}

TEST_CASE("detach and reshape") {
  const TD a = TD::from({2, 3}, {1, 2, 3, 4, 5, 6}, true);
  const TD d = a.detach();
  CHECK(d.is_leaf());
  CHECK_FALSE(d.requires_grad());
  CHECK(d.values() == a.values());
  const TD r = reshape(a, {3, 2});
  CHECK(r.shape() == Shape{3, 2});
  CHECK_THROWS_AS(reshape(a, {4, 2}), ShapeError);
  sum(scale(r, 2.0)).backward();
  CHECK(a.grad()[4] == 2.0);
}

TEST_CASE("channel bias on rank 2 and rank 4") {
  const TD x2 = TD::zeros({2, 3});
  const TD b = TD::from({3}, {1, 2, 3}, true);
  CHECK(add_channel_bias(x2, b).values() == std::vector<double>{1, 2, 3, 1, 2, 3});
  const TD x4 = TD::zeros({1, 3, 1, 2});
  const TD y = add_channel_bias(x4, b);
  CHECK(y.values() == std::vector<double>{1, 1, 2, 2, 3, 3});
  sum(y).backward();
  CHECK(b.grad()[1] == 2.0);
}

TEST_CASE("sum accumulates in double precision") {
  std::vector<float> v(1 << 20, 0.1f);
  const Tensor<float> t = Tensor<float>::from({v.size()}, v);
  CHECK(sum(t).item() == doctest::Approx(0.1f * static_cast<double>(v.size())).epsilon(1e-6));
}
