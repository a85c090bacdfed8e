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

#include "mftts/gradsuite.hpp"

#include "mftts/attention.hpp"
#include "mftts/flow.hpp"
#include "mftts/hca.hpp"
#include "mftts/params.hpp"
#include "mftts/train.hpp"

namespace mftts {

namespace {

using TD = Tensor<double>;

TD leaf(Shape shape, Rng& rng, double stddev = 1.0) {
  return TD::randn(std::move(shape), rng, stddev, true);
}

TD positive_leaf(Shape shape, Rng& rng) {
  TD t = TD::zeros(std::move(shape), true);
  for (auto& v : t.mutable_data()) v = rng.uniform(0.5, 2.0);
  return t;
}

// sum(y * R) for a fixed random R.
TD project(const TD& y, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(y, TD::randn(y.shape(), rng)));
}

std::vector<NamedTensor> all_params(const ParamSet<double>& ps) {
  std::vector<NamedTensor> out;
  for (const auto& n : ps.names()) out.emplace_back(n, ps.get(n));
  return out;
}

class Suite {
 public:
  Suite(std::function<void(const GradSuiteEntry&)> cb) : cb_(std::move(cb)) {}

  void check(const std::string& op, const std::function<TD()>& fn,
             std::vector<NamedTensor> inputs, double tol = kPrimitiveTolerance,
             const GradCheckOptions& opt = {}, bool full = false) {
    GradSuiteEntry e{check_gradients(op, fn, std::move(inputs), opt), tol, full};
    if (cb_) cb_(e);
    entries_.push_back(std::move(e));
  }

  std::vector<GradSuiteEntry> take() { return std::move(entries_); }

 private:
  std::function<void(const GradSuiteEntry&)> cb_;
  std::vector<GradSuiteEntry> entries_;
};

void primitives(Suite& s, Rng& rng) {
  const std::size_t m = 3, n = 4, k = 2;
  TD a = leaf({m, n}, rng), b = leaf({m, n}, rng);
  TD row = leaf({n}, rng), col = leaf({m, 1}, rng), pos = positive_leaf({m, n}, rng);
  s.check("add", [&] { return project(add(a, b)); }, {{"a", a}, {"b", b}});
  s.check("add (broadcast row)", [&] { return project(add(a, row)); }, {{"a", a}, {"row", row}});
  s.check("sub (broadcast column)", [&] { return project(sub(a, col)); }, {{"a", a}, {"col", col}});
  s.check("mul", [&] { return project(mul(a, b)); }, {{"a", a}, {"b", b}});
  s.check("div", [&] { return project(div(a, pos)); }, {{"a", a}, {"pos", pos}});
  s.check("scale", [&] { return project(scale(a, 1.7)); }, {{"a", a}});
  s.check("add_scalar", [&] { return project(mul(add_scalar(a, 0.3), a)); }, {{"a", a}});
  s.check("gelu", [&] { return project(gelu(a)); }, {{"a", a}});
  s.check("sigmoid", [&] { return project(sigmoid(a)); }, {{"a", a}});
  s.check("tanh", [&] { return project(tanh(a)); }, {{"a", a}});
  s.check("exp", [&] { return project(exp(a)); }, {{"a", a}});
  s.check("log", [&] { return project(log(pos)); }, {{"pos", pos}});
  s.check("sqrt", [&] { return project(sqrt(pos)); }, {{"pos", pos}});
  s.check("square", [&] { return project(square(a)); }, {{"a", a}});
  TD w = leaf({n, k}, rng);
  s.check("matmul", [&] { return project(matmul(a, w)); }, {{"a", a}, {"w", w}});
  s.check("transpose", [&] { return project(transpose(a)); }, {{"a", a}});
  s.check("reshape", [&] { return project(reshape(a, {n, m})); }, {{"a", a}});
  s.check("concat", [&] { return project(concat<double>({a, b, a}, 0)); }, {{"a", a}, {"b", b}});
  s.check("slice", [&] { return project(slice(a, 1, 1, n)); }, {{"a", a}});
  s.check("sum", [&] { return sum(mul(a, a)); }, {{"a", a}});
  s.check("mean", [&] { return mean(mul(a, b)); }, {{"a", a}, {"b", b}});
  s.check("sum_axis", [&] { return project(sum_axis(a, 0)); }, {{"a", a}});
  s.check("mean_axis", [&] { return project(mean_axis(a, 1)); }, {{"a", a}});
  s.check("softmax", [&] { return project(softmax(a, 1)); }, {{"a", a}});
  s.check("log_softmax", [&] { return project(log_softmax(a, 1)); }, {{"a", a}});
  std::vector<std::uint8_t> keep(m * n, 1);
  for (std::size_t i = 0; i < m; ++i) keep[i * n + i] = 0;
  s.check("masked_softmax", [&] { return project(masked_softmax(a, keep)); }, {{"a", a}});
  TD gamma = leaf({n}, rng), beta = leaf({n}, rng);
  s.check("layer_norm", [&] { return project(layer_norm(a, gamma, beta)); },
          {{"x", a}, {"gamma", gamma}, {"beta", beta}});
  s.check("layer_norm (no affine)", [&] { return project(layer_norm(a)); }, {{"x", a}});
  TD x = leaf({6, n}, rng), cw = leaf({k, n, 5}, rng), cb = leaf({k}, rng);
  s.check("conv1d", [&] { return project(conv1d(x, cw, cb)); },
          {{"x", x}, {"w", cw}, {"b", cb}});
  TD table = leaf({5, n}, rng);
  const std::vector<std::int32_t> ids{3, 0, 3, 4};
  s.check("embedding", [&] { return project(embedding(table, ids)); }, {{"table", table}});
  s.check("dropout (fixed mask)",
          [&] {
            Rng mask(17);
            return project(dropout(a, 0.3, true, &mask));
          },
          {{"a", a}});
}

void blocks(Suite& s, Rng& rng) {
  const std::size_t d = 8;
  ParamSet<double> ps;
  init_linear(ps, "lin", d, 5, rng);
  init_mha(ps, "mha", d, rng);
  init_cross_modal_align(ps, "cma", d, rng);
  for (const auto& n : ps.names())
    for (auto& v : ps.get_mut(n).mutable_data()) v = 0.3 * rng.normal();
  const AttentionConfig acfg{d, 2, 0.0};
  RunContext<double> ctx;
  TD q = leaf({4, d}, rng), kv = leaf({6, d}, rng);

  auto with_prefix = [&](const std::string& p, std::vector<NamedTensor> extra) {
    for (const auto& n : ps.names())
      if (n.rfind(p, 0) == 0) extra.emplace_back(n, ps.get(n));
    return extra;
  };
  s.check("linear", [&] { return project(linear(ps, "lin", q)); }, with_prefix("lin.", {{"x", q}}));
  std::vector<std::uint8_t> keep(4 * 6, 1);
  for (std::size_t i = 0; i < 4; ++i) keep[i * 6 + 5 - i] = 0;
  s.check("multi_head_attention (masked)",
          [&] { return project(multi_head_attention(ps, "mha", q, kv, kv, acfg, ctx, keep)); },
          with_prefix("mha.", {{"q", q}, {"kv", kv}}));
  s.check("cross_modal_align",
          [&] {
            const auto out = cross_modal_align(ps, "cma", q, kv, acfg, ctx);
            return add(project(out.text, 1), project(out.audio, 2));
          },
          with_prefix("cma.", {{"text", q}, {"audio", kv}}));

  TD ea = leaf({4, 5}, rng), eb = leaf({4, 5}, rng);
  s.check("similarity_matrix", [&] { return project(similarity_matrix(ea, eb, 0.1)); },
          {{"a", ea}, {"b", eb}});
  TD scores = leaf({3, 5}, rng);
  s.check("info_nce", [&] { return info_nce(scores); }, {{"scores", scores}});
  TD square_scores = leaf({4, 4}, rng);
  s.check("info_nce_in_batch", [&] { return info_nce_in_batch(square_scores); },
          {{"scores", square_scores}});
  TD s0 = leaf({2, 4}, rng), s1 = leaf({2, 4}, rng), s2 = leaf({2, 4}, rng);
  s.check("hca_loss", [&] { return hca_loss<double>({s0, s1, s2}, HcaConfig{{1.0, 0.5, 2.0}, 0.1}); },
          {{"phon", s0}, {"syll", s1}, {"pros", s2}});

  TD x1 = leaf({5, 3}, rng), x0 = leaf({5, 3}, rng), fw = leaf({3, 3}, rng);
  const std::vector<double> ts{0.3};
  const ItemField<double> field = [&](std::size_t, const TD& xt, double t) {
    return scale(matmul(xt, fw), 1.0 + t);
  };
  s.check("cfm_loss",
          [&] {
            const std::vector<TD> x1s{x1}, x0s{x0};
            return cfm_loss<double>(field, x1s, x0s, ts);
          },
          {{"x1", x1}, {"field.w", fw}});
}

void full_model(Suite& s, std::uint64_t seed) {
  const SyntheticCorpus corpus = generate_synthetic_corpus(seed + 1, 3, ModelConfig{}.mel_bins);
  const auto items = prepare_items<double>(corpus);
  Model<double> m = Model<double>::init(ModelConfig{}, seed + 2);
  Rng rng(seed + 3);
  for (auto& v : m.params.get_mut("field.out.w").mutable_data()) v = 0.05 * rng.normal();

  TrainConfig cfg;
  cfg.dur_weight = 0;  // checked separately below
  GradCheckOptions opt;
  opt.max_entries_per_input = 3;
  opt.step = 1e-5;
  opt.seed = seed;
  RunContext<double> ctx;  // eval mode: no dropout
  s.check("full model: L_CFM + w * L_HCA",
          [&] {
            Rng noise(seed + 4);
            return training_loss<double>(m, items, cfg, ctx, noise);
          },
          all_params(m.params), kModelTolerance, opt, true);

  // The predictor reads a detached encoding, so its check uses fixed inputs.
  std::vector<TD> conds;
  for (const auto& it : items)
    conds.push_back(encode_conditions(m, it.cond, 0, ctx).out.detach());
  std::vector<NamedTensor> dur;
  for (const auto& n : m.params.names())
    if (n.rfind("dur.", 0) == 0) dur.emplace_back(n, m.params.get(n));
  s.check("full model: duration loss",
          [&] {
            TD l;
            for (std::size_t i = 0; i < conds.size(); ++i) {
              const double target = std::log(static_cast<double>(items[i].x1.dim(0)));
              const TD e = square(add_scalar(duration_log_frames(m, conds[i]), -target));
              l = l.defined() ? add(l, e) : e;
            }
            return sum(l);
          },
          dur, kModelTolerance, opt, true);
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(
    std::uint64_t seed, const std::function<void(const GradSuiteEntry&)>& on_entry) {
  Suite s(on_entry);
  Rng rng(seed);
  primitives(s, rng);
  blocks(s, rng);
  full_model(s, seed);
  return s.take();
}

}  // namespace mftts
