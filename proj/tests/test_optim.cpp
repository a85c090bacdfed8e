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
#include "mftts/optim.hpp"
#include "test_util.hpp"

using namespace mftts;
using namespace mftts::testing;

namespace {

// Leaves `g` in the gradient of `p`.
void set_grad(TD& p, const std::vector<double>& g) {
  p.zero_grad();
  sum(mul(p, TD::from(p.shape(), g))).backward();
}

}  // namespace

TEST_CASE("schedule closed forms") {
  const LrSchedule s{3e-4, 1e-5, 50, 500};
  CHECK(s.at(0) == 0.0);
  CHECK(s.at(25) == doctest::Approx(1.5e-4).epsilon(1e-12));
  CHECK(std::abs(s.at(50) - 3e-4) <= 1e-9);
  CHECK(std::abs(s.at(500) - 1e-5) <= 1e-9);
  CHECK(std::abs(s.at(275) - (1e-5 + 0.5 * (3e-4 - 1e-5))) <= 1e-12);
  CHECK(s.at(900) == 1e-5);
  for (std::size_t k = 51; k <= 500; ++k) CHECK(s.at(k) <= s.at(k - 1));
  CHECK_THROWS_AS((LrSchedule{1e-3, 1e-5, 500, 500}.validate()), ConfigError);
  CHECK_THROWS_AS((LrSchedule{1e-3, 1e-2, 5, 50}.validate()), ConfigError);
}

TEST_CASE("weight decay exclusions") {
  CHECK(applies_weight_decay("field.dit0.ff1.w"));
  CHECK(applies_weight_decay("enc.phone_emb"));
  CHECK(!applies_weight_decay("field.dit0.ff1.b"));
  CHECK(!applies_weight_decay("field.final_ln.gamma"));
  CHECK(!applies_weight_decay("field.cma.text_self1.ln.beta"));
}

TEST_CASE("scalar AdamW trace matches the reference") {
  // tests/oracles/adamw_trace.py
  const double expected[10] = {
      0.5994999998181612, 0.6989571299106282, 0.7983574443460678,
      0.8976061966557355, 0.9964895943597737, 1.0946447848065803,
      1.191554183668822,  1.2865817764527812, 1.3790598903311646,
      1.4684124260447262};
  ParamSet<double> ps;
  ps.add("w", TD::from({1}, {0.5}));
  AdamW<double> opt({0.9, 0.98, 1e-8, 0.01});
  for (int k = 0; k < 10; ++k) {
    TD& w = ps.get_mut("w");
    const double x = w.item();
    set_grad(w, {2 * (x - 3) + 1.2 * std::cos(4 * x)});
    opt.step(ps, 0.1);
    CHECK(std::abs(ps.get("w").item() - expected[k]) <= 1e-7);
  }
  CHECK(opt.steps_taken() == 10);
}

TEST_CASE("biases skip weight decay") {
  ParamSet<double> ps;
  ps.add("layer.w", TD::from({1}, {2.0}));
  ps.add("layer.b", TD::from({1}, {2.0}));
  set_grad(ps.get_mut("layer.w"), {0.0});
  set_grad(ps.get_mut("layer.b"), {0.0});
  AdamW<double> opt({0.9, 0.98, 1e-8, 0.1});
  opt.step(ps, 0.5);
  CHECK(ps.get("layer.w").item() == doctest::Approx(2.0 * (1 - 0.05)));
  CHECK(ps.get("layer.b").item() == 2.0);
}

TEST_CASE("parameters without gradients are left alone") {
  ParamSet<double> ps;
  ps.add("a", TD::from({2}, {1.0, 2.0}));
  ps.add("unused", TD::from({2}, {3.0, 4.0}));
  set_grad(ps.get_mut("a"), {1.0, -1.0});
  AdamW<double> opt;
  opt.step(ps, 0.01);
  CHECK(ps.get("unused").data()[0] == 3.0);
  CHECK(ps.get("a").data()[0] < 1.0);
  CHECK(ps.get("a").data()[1] > 2.0);
}

TEST_CASE("clipping bounds the global norm") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    ParamSet<double> ps;
    ps.add("x", TD::zeros({3, 4}));
    ps.add("y", TD::zeros({5}));
    std::vector<double> gx(12), gy(5);
    const double mag = rng.uniform(0.01, 20.0);
    for (auto& v : gx) v = mag * rng.normal();
    for (auto& v : gy) v = mag * rng.normal();
    set_grad(ps.get_mut("x"), gx);
    set_grad(ps.get_mut("y"), gy);
    double expect = 0;
    for (double v : gx) expect += v * v;
    for (double v : gy) expect += v * v;
    expect = std::sqrt(expect);
    const double clip = 1.2;
    const double pre = clip_grad_norm(ps, clip);
    CHECK(pre == doctest::Approx(expect).epsilon(1e-12));
    const double post = global_grad_norm(ps);
    if (pre > clip) {
      CHECK(post <= clip + 1e-6);
      CHECK(post == doctest::Approx(clip).epsilon(1e-12));
      // Direction is preserved.
      CHECK(ps.get("x").grad()[0] / gx[0] == doctest::Approx(clip / pre));
    } else {
      CHECK(post == doctest::Approx(pre).epsilon(1e-15));
    }
  }
  ParamSet<double> ps;
  CHECK_THROWS_AS(clip_grad_norm(ps, 0.0), ContractError);
}
