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

#include <algorithm>
#include <numeric>

#include "doctest.h"
#include "mftts/attention.hpp"
#include "mftts/error.hpp"
#include "test_util.hpp"

using namespace mftts;
using namespace mftts::testing;

namespace {

AttentionConfig cfg_d(std::size_t d, std::size_t h) {
  return AttentionConfig{d, h, 0.0};
}

ParamSet<double> mha_params(std::size_t d, std::uint64_t seed) {
  ParamSet<double> ps;
  Rng rng(seed);
  init_mha(ps, "m", d, rng);
  // Non-zero biases so they are exercised too.
  for (const auto& n : ps.names()) {
    if (n.ends_with(".b")) {
      for (auto& x : ps.get_mut(n).mutable_data()) x = 0.1 * rng.normal();
    }
  }
  return ps;
}

ParamSet<double> align_params(std::size_t d, std::uint64_t seed) {
  ParamSet<double> ps;
  Rng rng(seed);
  init_cross_modal_align(ps, "cma", d, rng);
  // Larger weights than the 0.02 init so attention is far from uniform.
  for (const auto& n : ps.names())
    for (auto& x : ps.get_mut(n).mutable_data())
      if (n.ends_with(".w")) x *= 20.0;
  return ps;
}

TD rows_of(const TD& x, const std::vector<std::size_t>& order) {
  std::vector<double> v;
  const std::size_t d = x.dim(1);
  for (std::size_t r : order)
    v.insert(v.end(), x.data().begin() + r * d, x.data().begin() + (r + 1) * d);
  return TD::from({order.size(), d}, v);
}

void check_row_stochastic(const TD& w) {
  for (std::size_t r = 0; r < w.dim(0); ++r) {
    double s = 0;
    for (std::size_t c = 0; c < w.dim(1); ++c) {
      CHECK(w.at(r, c) >= 0.0);
      s += w.at(r, c);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

}  // namespace

TEST_CASE("mha: single key gives weight one and the projected value") {
  const auto ps = mha_params(8, 1);
  Rng rng(2);
  const TD q = TD::randn({3, 8}, rng);
  const TD kv = TD::randn({1, 8}, rng);
  std::vector<std::pair<std::string, TD>> probe;
  RunContext<double> ctx;
  ctx.attention_probe = &probe;
  const TD out = multi_head_attention(ps, "m", q, kv, kv, cfg_d(8, 2), ctx);
  REQUIRE(probe.size() == 2);
  for (const auto& [name, w] : probe)
    for (double x : w.data()) CHECK(x == doctest::Approx(1.0));
  const TD expect_row = linear(ps, "m.o", linear(ps, "m.v", kv));
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c)
      CHECK(out.at(r, c) == doctest::Approx(expect_row.at(0, c)).epsilon(1e-12));
}

TEST_CASE("mha: identical keys give uniform weights over unmasked entries") {
  const auto ps = mha_params(8, 3);
  Rng rng(4);
  const TD q = TD::randn({2, 8}, rng);
  const TD row = TD::randn({1, 8}, rng);
  const TD k = concat<double>({row, row, row, row}, 0);
  const TD v = TD::randn({4, 8}, rng);
  std::vector<std::pair<std::string, TD>> probe;
  RunContext<double> ctx;
  ctx.attention_probe = &probe;
  multi_head_attention(ps, "m", q, k, v, cfg_d(8, 2), ctx);
  for (const auto& [name, w] : probe)
    for (double x : w.data()) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));

  probe.clear();
  const std::vector<std::uint8_t> keep{1, 0, 1, 0, 0, 1, 1, 1};
  multi_head_attention(ps, "m", q, k, v, cfg_d(8, 2), ctx, keep);
  for (const auto& [name, w] : probe) {
    CHECK(w.at(0, 0) == doctest::Approx(0.5));
    CHECK(w.at(0, 1) == 0.0);
    CHECK(w.at(0, 3) == 0.0);
    CHECK(w.at(1, 0) == 0.0);
    CHECK(w.at(1, 3) == doctest::Approx(1.0 / 3.0));
  }
}

TEST_CASE("mha: fully masked row is a contract error") {
  const auto ps = mha_params(4, 5);
  Rng rng(6);
  const TD q = TD::randn({2, 4}, rng);
  const TD k = TD::randn({2, 4}, rng);
  RunContext<double> ctx;
  const std::vector<std::uint8_t> keep{1, 1, 0, 0};
  CHECK_THROWS_AS(multi_head_attention(ps, "m", q, k, k, cfg_d(4, 2), ctx, keep),
                  ContractError);
  const std::vector<std::uint8_t> short_mask{1, 1};
  CHECK_THROWS_AS(
      multi_head_attention(ps, "m", q, k, k, cfg_d(4, 2), ctx, short_mask),
      DimensionError);
}

TEST_CASE("mha: permuting keys and values together leaves output unchanged") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 2 + rng.below(6);
    const auto ps = mha_params(8, 100 + trial);
    const TD q = TD::randn({3, 8}, rng);
    const TD k = TD::randn({n, 8}, rng);
    const TD v = TD::randn({n, 8}, rng);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    RunContext<double> ctx;
    const TD a = multi_head_attention(ps, "m", q, k, v, cfg_d(8, 4), ctx);
    const TD b = multi_head_attention(ps, "m", q, rows_of(k, perm),
                                      rows_of(v, perm), cfg_d(8, 4), ctx);
    CHECK(max_abs_diff(a.data(), b.data()) <= 1e-5);
  }
}

TEST_CASE("mha: config validation") {
  CHECK_THROWS_AS(AttentionConfig({6, 4, 0.0}).validate(), ContractError);
  CHECK_THROWS_AS(AttentionConfig({8, 2, 1.0}).validate(), ContractError);
  CHECK_NOTHROW(AttentionConfig({8, 2, 0.1}).validate());
}

TEST_CASE("align: zero output projections reduce to triple layer norm") {
  auto ps = align_params(8, 11);
  for (const char* sub : kAlignSublayers) {
    const std::string base = std::string("cma.") + sub + ".o";
    for (auto& x : ps.get_mut(base + ".w").mutable_data()) x = 0;
    for (auto& x : ps.get_mut(base + ".b").mutable_data()) x = 0;
  }
  Rng rng(12);
  const TD ft = TD::randn({5, 8}, rng, 3.0);
  const TD fa = TD::randn({7, 8}, rng, 3.0);
  RunContext<double> ctx;
  const auto out = cross_modal_align(ps, "cma", ft, fa, cfg_d(8, 2), ctx);
  const TD et = layer_norm(layer_norm(layer_norm(ft)));
  const TD ea = layer_norm(layer_norm(layer_norm(fa)));
  CHECK(max_abs_diff(out.text.data(), et.data()) <= 1e-6);
  CHECK(max_abs_diff(out.audio.data(), ea.data()) <= 1e-6);
}

TEST_CASE("align: shapes preserved, including length one") {
  Rng rng(13);
  for (auto [tt, ta, d, h] : std::vector<std::array<std::size_t, 4>>{
           {1, 1, 8, 2}, {3, 9, 8, 4}, {6, 2, 12, 3}, {4, 4, 16, 1}}) {
    auto ps = align_params(d, 14 + tt);
    const TD ft = TD::randn({tt, d}, rng);
    const TD fa = TD::randn({ta, d}, rng);
    RunContext<double> ctx;
    const auto out = cross_modal_align(ps, "cma", ft, fa, cfg_d(d, h), ctx);
    CHECK(out.text.shape() == ft.shape());
    CHECK(out.audio.shape() == fa.shape());
  }
}

TEST_CASE("align: every attention map is row-stochastic") {
  auto ps = align_params(8, 15);
  Rng rng(16);
  const TD ft = TD::randn({4, 8}, rng);
  const TD fa = TD::randn({6, 8}, rng);
  std::vector<std::pair<std::string, TD>> probe;
  RunContext<double> ctx;
  ctx.attention_probe = &probe;
  cross_modal_align(ps, "cma", ft, fa, cfg_d(8, 2), ctx);
  CHECK(probe.size() == 12);  // six sublayers x two heads
  for (const auto& [name, w] : probe) {
    INFO(name);
    check_row_stochastic(w);
  }
  // Cross-attention maps are text x audio and audio x text.
  CHECK(probe[4].second.shape() == Shape{4, 6});
  CHECK(probe[6].second.shape() == Shape{6, 4});
}

TEST_CASE("align: perturbing one audio row reaches the text output") {
  auto ps = align_params(8, 17);
  Rng rng(18);
  const TD ft = TD::randn({4, 8}, rng);
  TD fa = TD::randn({5, 8}, rng);
  RunContext<double> ctx;
  const TD before = cross_modal_align(ps, "cma", ft, fa, cfg_d(8, 2), ctx).text;
  auto data = fa.mutable_data();
  for (std::size_t c = 0; c < 8; ++c) data[2 * 8 + c] += 0.5;
  const TD after = cross_modal_align(ps, "cma", ft, fa, cfg_d(8, 2), ctx).text;
  CHECK(max_abs_diff(before.data(), after.data()) > 1e-6);
}

TEST_CASE("align: gradient check on 3x8 text and 4x8 audio") {
  auto ps = align_params(8, 19);
  Rng rng(20);
  TD ft = random_leaf({3, 8}, rng);
  TD fa = random_leaf({4, 8}, rng);
  std::vector<NamedTensor> inputs{{"F_t", ft}, {"F_a", fa}};
  for (const auto& n : ps.names()) inputs.emplace_back(n, ps.get(n));
  const AttentionConfig cfg = cfg_d(8, 2);
  RunContext<double> ctx;
  const auto loss = [&] {
    const auto out = cross_modal_align(ps, "cma", ft, fa, cfg, ctx);
    return add(project(out.text, 1), project(out.audio, 2));
  };
  const GradReport r = check_gradients("cross_modal_align", loss, inputs);
  INFO("max rel err " << r.max_rel_error);
  CHECK(r.passed(1e-3));
}

TEST_CASE("mha: dropout only in training and replayable") {
  const auto ps = mha_params(8, 21);
  Rng rng(22);
  const TD q = TD::randn({3, 8}, rng);
  const TD k = TD::randn({5, 8}, rng);
  const AttentionConfig cfg{8, 2, 0.3};
  RunContext<double> eval;
  const TD e1 = multi_head_attention(ps, "m", q, k, k, cfg, eval);
  const TD e2 = multi_head_attention(ps, "m", q, k, k, cfg, eval);
  CHECK(max_abs_diff(e1.data(), e2.data()) == 0.0);
  Rng r1(5), r2(5);
  RunContext<double> t1{true, &r1, nullptr};
  RunContext<double> t2{true, &r2, nullptr};
  const TD a = multi_head_attention(ps, "m", q, k, k, cfg, t1);
  const TD b = multi_head_attention(ps, "m", q, k, k, cfg, t2);
  CHECK(max_abs_diff(a.data(), b.data()) == 0.0);
  CHECK(max_abs_diff(a.data(), e1.data()) > 0.0);
}
