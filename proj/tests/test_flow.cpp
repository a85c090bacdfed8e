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
#include <cstring>
#include <limits>

#include "doctest.h"
#include "mftts/error.hpp"
#include "mftts/flow.hpp"
#include "test_util.hpp"

using namespace mftts;
using namespace mftts::testing;

namespace {

// tests/oracles/cfm_golden.py
constexpr double kCfmGolden = 1.6823222599139376;

bool bit_equal(const TD& a, const TD& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data().data(), b.data().data(),
                     a.size() * sizeof(double)) == 0;
}

// Max abs error of integrating dx/dt = -x from x0 over [0, 1].
double decay_error(OdeMethod method, std::size_t steps, const TD& x0) {
  const Field<double> field = [](const TD& x, double) { return scale(x, -1.0); };
  const TD x1 = integrate_ode(field, x0, OdeConfig{steps, method, 0});
  double err = 0;
  for (std::size_t i = 0; i < x0.size(); ++i)
    err = std::max(err, std::abs(x1.data()[i] - std::exp(-1.0) * x0.data()[i]));
  return err;
}

double observed_order(OdeMethod method, const TD& x0) {
  // Least-squares slope of log error against log step size over 8..64.
  std::vector<double> lx, ly;
  for (std::size_t n : {8, 16, 32, 64}) {
    lx.push_back(std::log(1.0 / static_cast<double>(n)));
    ly.push_back(std::log(decay_error(method, n, x0)));
  }
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) mx += lx[i], my += ly[i];
  mx /= lx.size();
  my /= ly.size();
  double num = 0, den = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

}  // namespace

TEST_CASE("path endpoints are exact and the blend is linear") {
  Rng rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    TD x0 = TD::randn({4, 3}, rng);
    const TD x1 = TD::randn({4, 3}, rng);
    x0.mutable_data()[0] = -0.0;
    CHECK(bit_equal(interpolate_path(x0, x1, 0.0), x0));
    CHECK(bit_equal(interpolate_path(x0, x1, 1.0), x1));
  }
  const TD z = TD::zeros({1});
  const TD two = TD::full({1}, 2.0);
  CHECK(interpolate_path(z, two, 0.25).item() == 0.5);
  CHECK_THROWS_AS(interpolate_path(z, TD::zeros({2}), 0.5), DimensionError);
  CHECK_THROWS_AS(interpolate_path(z, two, 1.5), ContractError);
}

TEST_CASE("target field closed forms") {
  const TD x = TD::from({3}, {1, 2, 3});
  const TD zero = target_field(x, x);
  for (double v : zero.data()) CHECK(v == 0.0);
  const TD u = target_field(TD::zeros({2}), TD::from({2}, {1, -1}));
  CHECK(u.data()[0] == 1.0);
  CHECK(u.data()[1] == -1.0);
}

TEST_CASE("integrating the constant target field from x0 lands on x1") {
  Rng rng(2);
  const TD x0 = TD::randn({5, 4}, rng);
  const TD x1 = TD::randn({5, 4}, rng);
  const TD u = target_field(x0, x1);
  const Field<double> field = [&](const TD&, double) { return u; };
  for (std::size_t steps : {1, 2, 8, 32}) {
    for (OdeMethod m : {OdeMethod::kEuler, OdeMethod::kMidpoint}) {
      const TD end = integrate_ode(field, x0, OdeConfig{steps, m, 0});
      CHECK(max_abs_diff(end.data(), x1.data()) <= 1e-9);
    }
  }
}

TEST_CASE("sample_ode with the oracle field returns x1 for any step count") {
  const Shape shape{6, 4};
  Rng rng(3);
  const TD x1 = TD::randn(shape, rng);
  for (std::uint64_t seed : {0u, 7u}) {
    const TD x0 = ode_initial_noise<double>(shape, seed);
    const TD u = target_field(x0, x1);
    const Field<double> oracle = [&](const TD&, double) { return u; };
    for (std::size_t steps : {1, 2, 8, 32}) {
      for (OdeMethod m : {OdeMethod::kEuler, OdeMethod::kMidpoint}) {
        const TD out = sample_ode(oracle, shape, OdeConfig{steps, m, seed});
        CHECK(max_abs_diff(out.data(), x1.data()) <= 1e-9);
      }
    }
  }
}

TEST_CASE("one euler step is x0 + v(x0, 0)") {
  const Shape shape{3, 2};
  const Field<double> field = [](const TD& x, double t) {
    return add_scalar(scale(square(x), 0.5), t + 0.25);
  };
  const TD x0 = ode_initial_noise<double>(shape, 9);
  const TD expect = add(x0, field(x0, 0.0));
  const TD got = sample_ode(field, shape, OdeConfig{1, OdeMethod::kEuler, 9});
  CHECK(bit_equal(got, expect));
}

TEST_CASE("decay testbed: observed orders and midpoint accuracy") {
  Rng rng(4);
  const TD x0 = TD::randn({8}, rng);
  const double euler = observed_order(OdeMethod::kEuler, x0);
  const double mid = observed_order(OdeMethod::kMidpoint, x0);
  INFO("euler order " << euler << ", midpoint order " << mid);
  CHECK(std::abs(euler - 1.0) <= 0.2);
  CHECK(std::abs(mid - 2.0) <= 0.3);
  for (std::size_t n : {4, 8, 16, 32, 64})
    CHECK(decay_error(OdeMethod::kMidpoint, n, x0) <=
          decay_error(OdeMethod::kEuler, n, x0));
  // Errors shrink as the step count doubles.
  CHECK(decay_error(OdeMethod::kEuler, 64, x0) < decay_error(OdeMethod::kEuler, 8, x0));
}

TEST_CASE("sampler is deterministic given the seed") {
  const Shape shape{4, 4};
  Rng rng(5);
  const TD w = TD::randn({4, 4}, rng, 0.5);
  const Field<double> field = [&](const TD& x, double t) {
    return add_scalar(gelu(matmul(x, w)), t);
  };
  for (OdeMethod m : {OdeMethod::kEuler, OdeMethod::kMidpoint}) {
    const TD a = sample_ode(field, shape, OdeConfig{16, m, 11});
    const TD b = sample_ode(field, shape, OdeConfig{16, m, 11});
    const TD c = sample_ode(field, shape, OdeConfig{16, m, 12});
    CHECK(bit_equal(a, b));
    CHECK(!bit_equal(a, c));
  }
}

TEST_CASE("non-finite field output names the step") {
  const Field<double> field = [](const TD& x, double t) {
    if (t >= 0.375)
      return TD::full(x.shape(), std::numeric_limits<double>::quiet_NaN());
    return x;
  };
  try {
    sample_ode(field, {2, 2}, OdeConfig{8, OdeMethod::kEuler, 1});
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 3") != std::string::npos);
  }
  CHECK_THROWS_AS(OdeConfig({0, OdeMethod::kEuler, 0}).validate(), ConfigError);
  CHECK(ode_method_from_string("midpoint") == OdeMethod::kMidpoint);
  CHECK_THROWS_AS(ode_method_from_string("rk4"), ConfigError);
}

TEST_CASE("cfm loss is zero at the oracle field") {
  Rng data_rng(6);
  std::vector<TD> x1s;
  for (std::size_t i = 0; i < 4; ++i)
    x1s.push_back(TD::randn({3 + i, 5}, data_rng));
  // Replay the draws cfm_loss makes so the closure knows each x0.
  Rng replay(77);
  std::vector<TD> x0s;
  for (const auto& x1 : x1s) {
    x0s.push_back(TD::randn(x1.shape(), replay));
    replay.uniform();
  }
  const ItemField<double> oracle = [&](std::size_t i, const TD&, double) {
    return target_field(x0s[i], x1s[i]);
  };
  Rng rng(77);
  const double loss = cfm_loss<double>(oracle, x1s, rng).item();
  CHECK(loss <= 1e-10);
  CHECK(loss >= 0.0);
}

TEST_CASE("cfm loss with a zero field and zero noise is the mean square of x1") {
  const std::vector<TD> x1s{TD::from({2, 2}, {1, 2, 3, 4}),
                            TD::from({1, 2}, {2, 2})};
  const std::vector<TD> x0s{TD::zeros({2, 2}), TD::zeros({1, 2})};
  const std::vector<double> ts{0.3, 0.9};
  const ItemField<double> zero = [](std::size_t, const TD& x, double) {
    return TD::zeros(x.shape());
  };
  // Item means 7.5 and 4, averaged over items.
  CHECK(cfm_loss<double>(zero, x1s, x0s, ts).item() ==
        doctest::Approx(5.75).epsilon(1e-15));
  CHECK_THROWS_AS(cfm_loss<double>(zero, {}, {}, {}), ContractError);
}

TEST_CASE("cfm loss golden value for a fixed tiny field") {
  Rng wrng(8);
  const TD w = TD::randn({5, 5}, wrng, 0.3);
  const TD b = TD::randn({1, 5}, wrng, 0.3);
  Rng drng(9);
  std::vector<TD> x1s;
  for (std::size_t i = 0; i < 3; ++i) x1s.push_back(TD::randn({4, 5}, drng));
  const ItemField<double> field = [&](std::size_t, const TD& x, double t) {
    return add(matmul(x, w), scale(b, t));
  };
  Rng rng(42);
  const double loss = cfm_loss<double>(field, x1s, rng).item();
  CHECK(loss == doctest::Approx(kCfmGolden).epsilon(1e-12));
  Rng again(42);
  CHECK(cfm_loss<double>(field, x1s, again).item() == loss);
}
