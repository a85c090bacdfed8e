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

#include "mftts/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "mftts/error.hpp"

namespace mftts {

namespace {

constexpr std::array<double, 4> kEvalTimes{0.125, 0.375, 0.625, 0.875};
constexpr std::uint64_t kEpochSalt = 1ULL << 40;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  f << text;
  if (!f) throw IoError("cannot write " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("batch must be >= 1");
  if (!(clip > 0)) throw ConfigError("clip must be positive");
  if (schedule.steps != steps)
    throw ConfigError("schedule length differs from steps");
  schedule.validate();
  adamw.validate();
  try {
    hca.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  if (!(hca_weight >= 0) || !(dur_weight >= 0))
    throw ConfigError("loss weights must be non-negative");
  model.validate();
  MelConfig m = mel;
  m.bins = model.mel_bins;
  m.validate();
  if (corpus_dir.empty() && corpus_items < batch)
    throw ConfigError("corpus_items (" + std::to_string(corpus_items) +
                      ") is smaller than the batch (" + std::to_string(batch) + ")");
  if (eval_ode_steps == 0) throw ConfigError("eval_ode_steps must be >= 1");
  if (heldout_items == 0) throw ConfigError("heldout_items must be >= 1");
}

TrainConfig TrainConfig::from_config(ConfigMap c) {
  TrainConfig t;
  t.steps = c.get_size("steps", t.steps);
  t.batch = c.get_size("batch", t.batch);
  t.schedule.peak = c.get_double("peak_lr", t.schedule.peak);
  t.schedule.final_lr = c.get_double("final_lr", t.schedule.final_lr);
  t.schedule.warmup = c.get_size("warmup", t.schedule.warmup);
  t.schedule.steps = t.steps;
  t.clip = c.get_double("clip", t.clip);
  t.adamw.beta1 = c.get_double("beta1", t.adamw.beta1);
  t.adamw.beta2 = c.get_double("beta2", t.adamw.beta2);
  t.adamw.eps = c.get_double("adam_eps", t.adamw.eps);
  t.adamw.weight_decay = c.get_double("weight_decay", t.adamw.weight_decay);
  t.hca_weight = c.get_double("hca_weight", t.hca_weight);
  t.dur_weight = c.get_double("dur_weight", t.dur_weight);
  t.hca.tau = c.get_double("hca_tau", t.hca.tau);
  t.hca.lambdas[0] = c.get_double("lambda_phon", t.hca.lambdas[0]);
  t.hca.lambdas[1] = c.get_double("lambda_syll", t.hca.lambdas[1]);
  t.hca.lambdas[2] = c.get_double("lambda_pros", t.hca.lambdas[2]);
  t.seed = static_cast<std::uint64_t>(c.get_int("seed", static_cast<std::int64_t>(t.seed)));
  t.mel.sample_rate = c.get_double("sample_rate", t.mel.sample_rate);
  t.mel.frame_ms = c.get_double("frame_ms", t.mel.frame_ms);
  t.mel.shift_ms = c.get_double("shift_ms", t.mel.shift_ms);
  t.mel.n_fft = c.get_size("n_fft", t.mel.n_fft);
  t.mel.fmin = c.get_double("fmin", t.mel.fmin);
  t.mel.fmax = c.get_double("fmax", t.mel.fmax);
  t.mel.log_floor = c.get_double("log_floor", t.mel.log_floor);
  t.corpus_items = c.get_size("corpus_items", t.corpus_items);
  t.corpus_seed = static_cast<std::uint64_t>(
      c.get_int("corpus_seed", static_cast<std::int64_t>(t.corpus_seed)));
  t.corpus_dir = c.get_string("corpus_dir", "");
  t.out_dir = c.get_string("out_dir", "");
  t.checkpoint_every = c.get_size("checkpoint_every", t.checkpoint_every);
  t.eval_seed = static_cast<std::uint64_t>(
      c.get_int("eval_seed", static_cast<std::int64_t>(t.eval_seed)));
  t.heldout_items = c.get_size("heldout_items", t.heldout_items);
  t.heldout_seed = static_cast<std::uint64_t>(
      c.get_int("heldout_seed", static_cast<std::int64_t>(t.heldout_seed)));
  t.eval_ode_steps = c.get_size("eval_ode_steps", t.eval_ode_steps);
  t.model = ModelConfig::from_config(c);
  t.mel.bins = t.model.mel_bins;
  c.require_all_used();
  t.validate();
  return t;
}

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_config(ConfigMap::load(path));
}

std::string metrics_csv(const std::vector<StepMetrics>& log) {
  std::string out = "step,lr,cfm_loss,hca_loss,grad_norm\n";
  for (const auto& s : log) {
    out += std::to_string(s.step) + ',' + format_double(s.lr) + ',' +
           format_double(s.cfm_loss) + ',' + format_double(s.hca_loss) + ',' +
           format_double(s.grad_norm) + '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss

template <typename T>
std::vector<TrainItem<T>> prepare_items(const SyntheticCorpus& corpus) {
  std::vector<TrainItem<T>> items;
  items.reserve(corpus.items.size());
  for (const auto& it : corpus.items) {
    TrainItem<T> ti;
    ti.cond = cond_input(it.ht);
    std::vector<T> v(it.mel.data.begin(), it.mel.data.end());
    ti.x1 = Tensor<T>::from({it.mel.frames, it.mel.bins}, std::move(v));
    items.push_back(std::move(ti));
  }
  return items;
}

template <typename T>
Tensor<T> training_loss(const Model<T>& m, std::span<const TrainItem<T>> batch,
                        const TrainConfig& cfg, RunContext<T>& ctx, Rng& rng,
                        LossParts* parts) {
  if (batch.empty()) throw ContractError("training_loss: empty batch");
  std::vector<Encoded<T>> enc;
  std::vector<Tensor<T>> x1s;
  enc.reserve(batch.size());
  for (const auto& it : batch) {
    enc.push_back(encode_conditions(m, it.cond, it.speaker, ctx));
    x1s.push_back(it.x1);
  }
  std::vector<Tensor<T>> hidden(batch.size());
  const ItemField<T> field = [&](std::size_t i, const Tensor<T>& xt, double t) {
    return forward_field(m, xt, t, enc[i].out, ctx, &hidden[i]);
  };
  const Tensor<T> cfm = cfm_loss<T>(field, x1s, rng);
  Tensor<T> total = cfm;

  Tensor<T> hca;
  if (batch.size() >= 2 && cfg.hca_weight > 0) {
    const auto active = active_tiers(m.cfg, cfg.hca);
    for (std::size_t k = 0; k < kTierCount; ++k) {
      if (!active[k]) continue;
      const Tier tier = static_cast<Tier>(k);
      std::vector<Tensor<T>> s, c;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        s.push_back(speech_embedding(m, hidden[i], tier));
        c.push_back(condition_embedding(m, enc[i], tier));
      }
      const Tensor<T> scores =
          similarity_matrix(concat(c, 0), concat(s, 0), cfg.hca.tau);
      const Tensor<T> term =
          scale(info_nce_in_batch(scores), static_cast<T>(cfg.hca.lambdas[k]));
      hca = hca.defined() ? add(hca, term) : term;
    }
    if (hca.defined()) total = add(total, scale(hca, static_cast<T>(cfg.hca_weight)));
  }

  Tensor<T> dur;
  if (cfg.dur_weight > 0) {
    std::vector<Tensor<T>> errs;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const T target = static_cast<T>(std::log(static_cast<double>(x1s[i].dim(0))));
      errs.push_back(reshape(square(add_scalar(duration_log_frames(m, enc[i].out), -target)), {1}));
    }
    dur = mean(errs.size() == 1 ? errs[0] : concat(errs, 0));
    total = add(total, scale(dur, static_cast<T>(cfg.dur_weight)));
  }

  if (parts) {
    parts->cfm = static_cast<double>(cfm.item());
    parts->hca = hca.defined() ? static_cast<double>(hca.item()) : 0.0;
    parts->dur = dur.defined() ? static_cast<double>(dur.item()) : 0.0;
  }
  return total;
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate_cfm(const Model<float>& m, const SyntheticCorpus& corpus,
                    std::uint64_t seed) {
  NoGradGuard guard;
  RunContext<float> ctx;
  const auto items = prepare_items<float>(corpus);
  const Rng root(seed);
  double total = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    Rng r = root.fork(i);
    const auto x0 = Tensor<float>::randn(items[i].x1.shape(), r);
    const auto cond = encode_conditions(m, items[i].cond, items[i].speaker, ctx).out;
    const auto u = target_field(x0, items[i].x1);
    for (double t : kEvalTimes) {
      const auto v = forward_field(m, interpolate_path(x0, items[i].x1, t), t, cond, ctx);
      total += static_cast<double>(mean(square(sub(v, u))).item());
    }
  }
  return total / static_cast<double>(items.size() * kEvalTimes.size());
}

double evaluate_duration(const Model<float>& m, const SyntheticCorpus& corpus) {
  NoGradGuard guard;
  RunContext<float> ctx;
  double total = 0;
  for (const auto& it : corpus.items) {
    const auto cond = encode_conditions(m, cond_input(it.ht), 0, ctx).out;
    const double e = static_cast<double>(duration_log_frames(m, cond).item()) -
                     std::log(static_cast<double>(it.mel.frames));
    total += e * e;
  }
  return total / static_cast<double>(corpus.items.size());
}

double evaluate_mcd(const Model<float>& m, const SyntheticCorpus& corpus,
                    const OdeConfig& ode) {
  double total = 0;
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    const auto& it = corpus.items[i];
    SynthesisRequest req;
    req.text = it.text;
    req.frames = it.mel.frames;
    OdeConfig o = ode;
    o.seed = ode.seed + i;
    total += mcd(synthesize(m, Frontend::builtin(), req, o), it.mel);
  }
  return total / static_cast<double>(corpus.items.size());
}

// ---------------------------------------------------------------------------
// Training

SyntheticCorpus training_corpus(const TrainConfig& cfg) {
  if (!cfg.corpus_dir.empty()) {
    SyntheticCorpus c = load_corpus(cfg.corpus_dir);
    if (c.bins != cfg.model.mel_bins)
      throw ConfigError("corpus has " + std::to_string(c.bins) + " mel bins, model " +
                        std::to_string(cfg.model.mel_bins));
    return c;
  }
  return generate_synthetic_corpus(cfg.corpus_seed, cfg.corpus_items, cfg.model.mel_bins);
}

TrainResult train(const TrainConfig& cfg, const SyntheticCorpus& corpus,
                  const StepCallback& on_step) {
  cfg.validate();
  if (corpus.items.size() < cfg.batch)
    throw ConfigError("corpus has " + std::to_string(corpus.items.size()) +
                      " items, fewer than the batch of " + std::to_string(cfg.batch));
  if (corpus.bins != cfg.model.mel_bins)
    throw ConfigError("corpus mel bins differ from the model");
  if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

  const auto items = prepare_items<float>(corpus);
  TrainResult res{Model<float>::init(cfg.model, cfg.seed), {}, 0, 0};
  Model<float>& m = res.model;
  AdamW<float> opt(cfg.adamw);
  res.initial_cfm = evaluate_cfm(m, corpus, cfg.eval_seed);

  const Rng root(cfg.seed);
  std::vector<std::size_t> order(items.size());
  std::size_t cursor = order.size(), epoch = 0;
  std::vector<TrainItem<float>> batch;
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    batch.clear();
    while (batch.size() < cfg.batch) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng er = root.fork(kEpochSalt + epoch++);
        for (std::size_t i = order.size(); i > 1; --i)
          std::swap(order[i - 1], order[er.below(i)]);
        cursor = 0;
      }
      batch.push_back(items[order[cursor++]]);
    }

    Rng step_rng = root.fork(s);
    RunContext<float> ctx{true, &step_rng, nullptr};
    m.params.zero_grad();
    LossParts parts;
    auto fail = [&](const std::string& why) {
      std::string where;
      if (!cfg.out_dir.empty()) {
        const auto p = cfg.out_dir / "last_good.ckpt";
        save_checkpoint(p, m);
        where = "; last good parameters saved to " + p.string();
      }
      throw NumericError("training diverged at step " + std::to_string(s + 1) + ": " +
                         why + where);
    };
    Tensor<float> loss;
    try {
      loss = training_loss<float>(m, batch, cfg, ctx, step_rng, &parts);
    } catch (const NumericError& e) {
      fail(e.what());
    }
    if (!std::isfinite(loss.item())) fail("non-finite loss");
    loss.backward();
    const double norm = global_grad_norm(m.params);
    if (!std::isfinite(norm)) fail("non-finite gradient");
    clip_grad_norm(m.params, cfg.clip);
    StepMetrics sm;
    sm.step = s + 1;
    sm.lr = cfg.schedule.at(s + 1);
    opt.step(m.params, sm.lr);
    sm.cfm_loss = parts.cfm;
    sm.hca_loss = parts.hca;
    sm.dur_loss = parts.dur;
    sm.grad_norm = norm;
    res.log.push_back(sm);
    if (on_step) on_step(sm);
    if (!cfg.out_dir.empty() && cfg.checkpoint_every && sm.step % cfg.checkpoint_every == 0)
      save_checkpoint(cfg.out_dir / ("step_" + std::to_string(sm.step) + ".ckpt"), m);
  }
  res.final_cfm = evaluate_cfm(m, corpus, cfg.eval_seed);
  if (!cfg.out_dir.empty()) {
    write_text(cfg.out_dir / "metrics.csv", metrics_csv(res.log));
    save_checkpoint(cfg.out_dir / "final.ckpt", m);
  }
  return res;
}

// ---------------------------------------------------------------------------
// Ablation

std::string AblationReport::to_text() const {
  std::ostringstream o;
  o << "variant  tiers             held-out L_CFM   MCD (dB)\n";
  for (const auto& r : rows) {
    std::string tiers = "phon";
    if (r.use_syll) tiers += "+syll";
    if (r.use_pros) tiers += "+pros";
    char line[128];
    std::snprintf(line, sizeof line, "%-8s %-17s %-16.6f %.4f\n", r.name.c_str(),
                  tiers.c_str(), r.val_cfm, r.mcd);
    o << line;
  }
  o << (ordering_holds ? "ordering holds: L_CFM A > B > C, MCD C < A\n"
                       : "ORDERING VIOLATED: expected L_CFM A > B > C and MCD C < A\n");
  return o.str();
}

AblationReport run_ablation(const TrainConfig& base, const StepCallback& on_step) {
  base.validate();
  const SyntheticCorpus corpus = training_corpus(base);
  const SyntheticCorpus heldout =
      generate_synthetic_corpus(base.heldout_seed, base.heldout_items, base.model.mel_bins);
  AblationReport rep;
  const struct {
    const char* name;
    bool syll, pros;
  } variants[] = {{"A", false, false}, {"B", true, false}, {"C", true, true}};
  for (const auto& v : variants) {
    TrainConfig cfg = base;
    cfg.model.use_syll = v.syll;
    cfg.model.use_pros = v.pros;
    if (!base.out_dir.empty()) cfg.out_dir = base.out_dir / v.name;
    const TrainResult r = train(cfg, corpus, on_step);
    AblationRow row;
    row.name = v.name;
    row.use_syll = v.syll;
    row.use_pros = v.pros;
    row.val_cfm = evaluate_cfm(r.model, heldout, base.eval_seed);
    row.mcd = evaluate_mcd(r.model, heldout,
                           {base.eval_ode_steps, OdeMethod::kEuler, base.eval_seed});
    rep.rows.push_back(row);
  }
  rep.ordering_holds = rep.rows[0].val_cfm > rep.rows[1].val_cfm &&
                       rep.rows[1].val_cfm > rep.rows[2].val_cfm &&
                       rep.rows[2].mcd < rep.rows[0].mcd;
  if (!base.out_dir.empty()) write_text(base.out_dir / "ablation.txt", rep.to_text());
  return rep;
}

#define MFTTS_INSTANTIATE_TRAIN(T)                                              \
  template std::vector<TrainItem<T>> prepare_items<T>(const SyntheticCorpus&);  \
  template Tensor<T> training_loss<T>(const Model<T>&,                          \
                                      std::span<const TrainItem<T>>,            \
                                      const TrainConfig&, RunContext<T>&, Rng&, \
                                      LossParts*);

MFTTS_INSTANTIATE_TRAIN(float)
MFTTS_INSTANTIATE_TRAIN(double)

}  // namespace mftts
