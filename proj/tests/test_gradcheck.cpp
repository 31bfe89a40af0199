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

#include <sstream>

#include "placelab/gradcheck.hpp"

using namespace placelab;

TEST_CASE("every operation passes the gradient check") {
  const auto cases = default_gradcheck_cases();
  const auto results = run_gradcheck(cases);
  REQUIRE(results.size() == cases.size());
  for (const auto& r : results) {
    INFO(r.op << " error " << r.max_rel_error << " at " << r.worst);
    CHECK(r.passed);
    CHECK(r.max_rel_error <= r.tolerance);
  }
  std::ostringstream out;
  CHECK(print_gradcheck(out, results));
  CHECK(out.str().find("conv2d") != std::string::npos);
  CHECK(out.str().find("network") != std::string::npos);
}

TEST_CASE("a wrong backward rule is caught and named") {
  const auto bad = faulty_gradcheck_case();
  const auto result = check_gradient(bad);
  CHECK_FALSE(result.passed);
  CHECK(result.max_rel_error > 5e-3);
  std::ostringstream out;
  const GradcheckResult both[] = {check_gradient(default_gradcheck_cases().front()), result};
  CHECK_FALSE(print_gradcheck(out, both));
  CHECK(out.str().find("faulty_square") != std::string::npos);
}

TEST_CASE("cases are reproducible") {
  const auto a = default_gradcheck_cases(4);
  const auto b = default_gradcheck_cases(4);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].op == b[i].op);
    for (std::size_t j = 0; j < a[i].inputs.size(); ++j) CHECK(a[i].inputs[j].values() == b[i].inputs[j].values());
  }
}
