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

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "doctest.h"
#include "mftts/error.hpp"
#include "mftts/train.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace mftts;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() /
             ("mftts_train_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TrainConfig small_config(std::size_t steps) {
  TrainConfig cfg;
  cfg.steps = steps;
  cfg.schedule.steps = steps;
  cfg.schedule.warmup = std::min<std::size_t>(5, steps - 1);
  cfg.batch = 4;
  cfg.corpus_items = 16;
  cfg.heldout_items = 4;
  cfg.eval_ode_steps = 2;
  return cfg;
}

}  // namespace

TEST_CASE("config keys parse and unknown keys are rejected") {
  const auto cfg = TrainConfig::from_config(ConfigMap::parse(
      "steps = 120\nwarmup = 10\npeak_lr = 0.001\nbatch = 2\nhca_weight = 0.5\n"
      "lambda_syll = 0.25\nhca_tau = 0.2\nseed = 9\ndit_layers = 1\nout_dir = runs/x\n"));
  CHECK(cfg.steps == 120);
  CHECK(cfg.schedule.steps == 120);
  CHECK(cfg.schedule.warmup == 10);
  CHECK(cfg.schedule.peak == 0.001);
  CHECK(cfg.batch == 2);
  CHECK(cfg.hca_weight == 0.5);
  CHECK(cfg.hca.lambdas[1] == 0.25);
  CHECK(cfg.hca.tau == 0.2);
  CHECK(cfg.seed == 9);
  CHECK(cfg.model.dit_layers == 1);
  CHECK(cfg.out_dir == fs::path("runs/x"));

  CHECK_THROWS_AS(TrainConfig::from_config(ConfigMap::parse("stpes = 3\n")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_config(ConfigMap::parse("steps = 10\nwarmup = 10\n")),
                  ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_config(ConfigMap::parse("clip = 0\n")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_config(ConfigMap::parse("batch = 0\n")), ConfigError);
  CHECK_THROWS_AS(TrainConfig::from_config(ConfigMap::parse("steps = many\n")), ConfigError);
}

TEST_CASE("shipped configs load") {
  for (const char* name : {"desk.cfg", "ablate.cfg", "full.cfg"}) {
    CAPTURE(name);
    const auto cfg = TrainConfig::load(fs::path(MFTTS_SOURCE_DIR) / "configs" / name);
    CHECK(cfg.steps > cfg.schedule.warmup);
  }
  const auto desk = TrainConfig::load(fs::path(MFTTS_SOURCE_DIR) / "configs" / "desk.cfg");
  CHECK(desk.steps == 500);
  CHECK(desk.batch == 8);
  CHECK(desk.corpus_items == 64);
  CHECK(desk.seed == 42);
}

TEST_CASE("metrics csv layout") {
  std::vector<StepMetrics> log{{1, 0.5, 2.0, 0.25, 9.0, 1.5}};
  CHECK(metrics_csv(log) == "step,lr,cfm_loss,hca_loss,grad_norm\n1,0.5,2,0.25,1.5\n");
}

TEST_CASE("training is replayable and follows the schedule") {
  TempDir a("a"), b("b");
  TrainConfig cfg = small_config(12);
  const auto corpus = training_corpus(cfg);
  cfg.out_dir = a.path;
  const auto r1 = train(cfg, corpus);
  cfg.out_dir = b.path;
  const auto r2 = train(cfg, corpus);
  REQUIRE(r1.log.size() == 12);
  CHECK(metrics_csv(r1.log) == metrics_csv(r2.log));
  for (const auto& n : r1.model.params.names()) {
    const auto x = r1.model.params.get(n).data(), y = r2.model.params.get(n).data();
    CHECK_MESSAGE(std::equal(x.begin(), x.end(), y.begin()), n);
  }
  for (const auto& s : r1.log) CHECK(s.lr == cfg.schedule.at(s.step));
  CHECK(r1.log.front().lr > 0);
  CHECK(std::abs(r1.log.back().lr - cfg.schedule.final_lr) < 1e-9);
  CHECK(fs::exists(a.path / "metrics.csv"));
  const auto reloaded = load_checkpoint(a.path / "final.ckpt", &cfg.model);
  CHECK(reloaded.params.numel() == r1.model.params.numel());
}

TEST_CASE("every parameter moves within two steps") {
  TrainConfig cfg = small_config(2);
  cfg.schedule.warmup = 1;
  const auto corpus = training_corpus(cfg);
  const auto init = Model<float>::init(cfg.model, cfg.seed);
  const auto r = train(cfg, corpus);
  for (const auto& n : init.params.names()) {
    const auto x = init.params.get(n).data(), y = r.model.params.get(n).data();
    CHECK_MESSAGE(!std::equal(x.begin(), x.end(), y.begin()), "dead parameter " << n);
  }
}

TEST_CASE("duration loss halves within 200 steps") {
  TrainConfig cfg;
  cfg.steps = 200;
  cfg.schedule.steps = 200;
  const auto corpus = training_corpus(cfg);
  const double before = evaluate_duration(Model<float>::init(cfg.model, cfg.seed), corpus);
  const auto r = train(cfg, corpus);
  const double after = evaluate_duration(r.model, corpus);
  MESSAGE("duration MSE " << before << " -> " << after);
  CHECK(after <= 0.5 * before);
}

TEST_CASE("non-finite loss aborts and keeps the last good parameters") {
  TempDir dir("nan");
  // A step of 1e30 leaves finite parameters whose next forward pass
  // overflows.
  TrainConfig cfg = small_config(20);
  cfg.schedule.warmup = 1;
  cfg.schedule.peak = 1e30;
  cfg.schedule.final_lr = 1e30;
  cfg.out_dir = dir.path;
  const auto corpus = training_corpus(cfg);
  try {
    train(cfg, corpus);
    FAIL("expected divergence");
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    MESSAGE(msg);
    CHECK(msg.find("training diverged at step 2") != std::string::npos);
    CHECK(msg.find("last_good.ckpt") != std::string::npos);
  }
  REQUIRE(fs::exists(dir.path / "last_good.ckpt"));
  const auto good = load_checkpoint(dir.path / "last_good.ckpt", &cfg.model);
  for (const auto& n : good.params.names())
    for (float v : good.params.get(n).data()) REQUIRE(std::isfinite(v));
  CHECK(!fs::exists(dir.path / "final.ckpt"));
}

TEST_CASE("a masked tier has no effect on the encoding") {
  const auto& fe = Frontend::builtin();
  const CondInput base = cond_input(fe.build("bi boo de genembi."));
  RunContext<float> ctx;

  ModelConfig a;
  a.use_syll = false;
  a.use_pros = false;
  const auto m = Model<float>::init(a, 3);
  CondInput other = base;
  for (auto& v : other.prosody) v = 1.0 - v;
  for (auto& v : other.syll_pos) v = (v + 1) % 3;
  for (auto& v : other.morph) v = 1 - v;
  const auto x = encode_conditions(m, base, 0, ctx).out;
  const auto y = encode_conditions(m, other, 0, ctx).out;
  CHECK(std::equal(x.data().begin(), x.data().end(), y.data().begin()));

  ModelConfig c;
  const auto mc = Model<float>::init(c, 3);
  const auto xc = encode_conditions(mc, base, 0, ctx).out;
  const auto yc = encode_conditions(mc, other, 0, ctx).out;
  CHECK(!std::equal(xc.data().begin(), xc.data().end(), yc.data().begin()));
}

TEST_CASE("ablation report shape") {
  TempDir dir("abl");
  TrainConfig cfg = small_config(3);
  cfg.out_dir = dir.path;
  const auto rep = run_ablation(cfg);
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].name == "A");
  CHECK(!rep.rows[0].use_syll);
  CHECK(rep.rows[1].use_syll);
  CHECK(!rep.rows[1].use_pros);
  CHECK(rep.rows[2].use_pros);
  for (const auto& r : rep.rows) {
    CHECK(std::isfinite(r.val_cfm));
    CHECK(r.mcd >= 0);
  }
  CHECK(fs::exists(dir.path / "ablation.txt"));
  CHECK(fs::exists(dir.path / "A" / "metrics.csv"));
}

TEST_CASE("corpus directories feed training") {
  TempDir dir("corpus");
  TrainConfig cfg = small_config(2);
  save_corpus(dir.path, generate_synthetic_corpus(3, 6, cfg.model.mel_bins));
  cfg.corpus_dir = dir.path;
  CHECK(training_corpus(cfg).items.size() == 6);
  cfg.model.mel_bins = 20;
  CHECK_THROWS_AS(training_corpus(cfg), ConfigError);
}
