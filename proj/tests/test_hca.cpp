// Copyright 2026 The mftts Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cmath>

#include "doctest.h"
#include "mftts/error.hpp"
#include "mftts/hca.hpp"
#include "test_util.hpp"

using namespace mftts;
using namespace mftts::testing;

namespace {

TD scores_row(double pos, const std::vector<double>& negs) {
  std::vector<double> v{pos};
  v.insert(v.end(), negs.begin(), negs.end());
  return TD::from({1, v.size()}, v);
}

std::array<TD, kTierCount> same_for_all(const TD& s) { return {s, s, s}; }

}  // namespace

TEST_CASE("similarity closed forms") {
  const std::vector<double> x{1, 2, 3};
  const std::vector<double> neg{-1, -2, -3};
  CHECK(similarity(x, x, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(similarity(std::vector<double>{1, 0}, std::vector<double>{0, 5}, 1.0) ==
        0.0);
  CHECK(similarity(x, neg, 0.5) == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK_THROWS_AS(similarity(x, std::vector<double>{0, 0, 0}, 1.0),
                  ContractError);
  CHECK_THROWS_AS(similarity(x, x, 0.0), ContractError);
}

TEST_CASE("similarity matrix matches the scalar form") {
  Rng rng(1);
  const TD a = TD::randn({3, 4}, rng);
  const TD b = TD::randn({5, 4}, rng);
  const TD s = similarity_matrix(a, b, 0.1);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(s.at(i, j) ==
            doctest::Approx(similarity(a.data().subspan(i * 4, 4),
                                       b.data().subspan(j * 4, 4), 0.1))
                .epsilon(1e-12));
  CHECK_THROWS_AS(similarity_matrix(a, TD::zeros({2, 4}), 1.0), ContractError);
}

TEST_CASE("uniform similarities give ln(N+1) per tier") {
  const HcaConfig cfg;
  CHECK(hca_loss(same_for_all(scores_row(0.7, {0.7})), cfg).item() ==
        doctest::Approx(3 * std::log(2.0)).epsilon(1e-12));
  CHECK(std::abs(hca_loss(same_for_all(scores_row(0, {0})), cfg).item() -
                 2.0794415416798357) < 1e-6);
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const std::size_t p = 1 + rng.below(4);
    const double s = rng.uniform(-5, 5);
    HcaConfig c;
    c.lambdas = {rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2)};
    const TD scores = TD::full({p, n + 1}, s);
    const double expect =
        (c.lambdas[0] + c.lambdas[1] + c.lambdas[2]) * std::log(n + 1.0);
    CHECK(std::abs(hca_loss(same_for_all(scores), c).item() - expect) <= 1e-6);
  }
}

TEST_CASE("saturated positive drives the loss to zero") {
  const TD s = scores_row(20.0, {0.0});
  CHECK(info_nce(s).item() < 1e-8);
  CHECK(hca_loss(same_for_all(s), HcaConfig{}).item() < 3e-8);
}

TEST_CASE("lambda masking keeps only the weighted tiers") {
  Rng rng(3);
  const std::array<TD, kTierCount> scores{TD::randn({4, 3}, rng),
                                          TD::randn({4, 3}, rng),
                                          TD::randn({4, 3}, rng)};
  HcaConfig c;
  c.lambdas = {1, 0, 0};
  CHECK(hca_loss(scores, c).item() ==
        doctest::Approx(info_nce(scores[0]).item()).epsilon(1e-15));
  // Skipped tiers may be left undefined.
  CHECK(hca_loss<double>({scores[0], TD(), TD()}, c).item() ==
        info_nce(scores[0]).item());
}

TEST_CASE("loss decreases monotonically in the positive similarity") {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    std::vector<double> negs(n);
    for (auto& x : negs) x = rng.uniform(-10, 10);
    const double pos = rng.uniform(-10, 10);
    const double bump = rng.uniform(1e-3, 2.0);
    HcaConfig c;
    c.lambdas = {rng.uniform(0.1, 2), rng.uniform(0.1, 2), rng.uniform(0.1, 2)};
    const double lo = hca_loss(same_for_all(scores_row(pos, negs)), c).item();
    const double hi = hca_loss(same_for_all(scores_row(pos + bump, negs)), c).item();
    CHECK(hi < lo);
    CHECK(hi >= 0.0);
  }
}

TEST_CASE("missing negatives are a contract error") {
  CHECK_THROWS_AS(info_nce(TD::zeros({2, 1})), ContractError);
  CHECK_THROWS_AS(info_nce_in_batch(TD::zeros({1, 1})), ContractError);
  CHECK_THROWS_AS(info_nce_in_batch(TD::zeros({2, 3})), DimensionError);
  HcaConfig bad;
  bad.tau = 0;
  CHECK_THROWS_AS(bad.validate(), ContractError);
  bad = HcaConfig{};
  bad.lambdas[1] = -1;
  CHECK_THROWS_AS(bad.validate(), ContractError);
}

TEST_CASE("in-batch form equals the positive-first form") {
  Rng rng(5);
  const TD s = TD::randn({4, 4}, rng);
  std::vector<double> rearranged;
  for (std::size_t i = 0; i < 4; ++i) {
    rearranged.push_back(s.at(i, i));
    for (std::size_t j = 0; j < 4; ++j)
      if (j != i) rearranged.push_back(s.at(i, j));
  }
  CHECK(info_nce_in_batch(s).item() ==
        doctest::Approx(info_nce(TD::from({4, 4}, rearranged)).item())
            .epsilon(1e-13));
}

TEST_CASE("gradient check through similarity and loss") {
  Rng rng(6);
  TD ex = random_leaf({4, 6}, rng);
  TD ec0 = random_leaf({4, 6}, rng);
  TD ec1 = random_leaf({4, 6}, rng);
  TD ec2 = random_leaf({4, 6}, rng);
  HcaConfig c;
  c.lambdas = {1.0, 0.5, 0.25};
  c.tau = 0.5;
  const auto loss = [&] {
    return hca_loss<double>({similarity_matrix(ex, ec0, c.tau),
                             similarity_matrix(ex, ec1, c.tau),
                             similarity_matrix(ex, ec2, c.tau)},
                            c);
  };
  const auto loss_in_batch = [&] {
    return info_nce_in_batch(similarity_matrix(ex, ec0, c.tau));
  };
  const GradReport a = check_gradients(
      "hca", loss, {{"e_x", ex}, {"e_c0", ec0}, {"e_c1", ec1}, {"e_c2", ec2}});
  const GradReport b =
      check_gradients("info_nce_in_batch", loss_in_batch, {{"e_x", ex}, {"e_c0", ec0}});
  INFO(a.max_rel_error << " " << b.max_rel_error);
  CHECK(a.passed(1e-4));
  CHECK(b.passed(1e-4));
}
