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

// Training loop, held-out evaluation and the tier ablation.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mftts/corpus.hpp"
#include "mftts/model.hpp"
#include "mftts/optim.hpp"

namespace mftts {

struct TrainConfig {
  std::size_t steps = 500;
  std::size_t batch = 8;
  LrSchedule schedule{2e-3, 1e-5, 50, 500};  // steps mirrors `steps`
  double clip = 1.2;
  AdamWConfig adamw;
  double hca_weight = 0.1;
  double dur_weight = 1.0;
  HcaConfig hca;
  std::uint64_t seed = 42;
  ModelConfig model;
  MelConfig mel;  // bins follow model.mel_bins

  // Corpus: loaded from corpus_dir when set, generated otherwise.
  std::size_t corpus_items = 64;
  std::uint64_t corpus_seed = 42;
  std::filesystem::path corpus_dir;
  // Metrics CSV and checkpoints go here when set.
  std::filesystem::path out_dir;
  std::size_t checkpoint_every = 0;  // 0: final checkpoint only

  // Evaluation and ablation.
  std::uint64_t eval_seed = 7;
  std::size_t heldout_items = 32;
  std::uint64_t heldout_seed = 1042;
  std::size_t eval_ode_steps = 16;

  void validate() const;  // ConfigError
  // Unknown keys are a ConfigError.
  static TrainConfig from_config(ConfigMap cfg);
  static TrainConfig load(const std::filesystem::path& path);
};

struct StepMetrics {
  std::size_t step = 0;  // 1-based
  double lr = 0;
  double cfm_loss = 0;
  double hca_loss = 0;
  double dur_loss = 0;
  double grad_norm = 0;  // before clipping
};

// `step,lr,cfm_loss,hca_loss,grad_norm` with shortest round-trip numbers.
std::string metrics_csv(const std::vector<StepMetrics>& log);

// Per-item tensors shared by the loss and the evaluators.
template <typename T>
struct TrainItem {
  CondInput cond;
  Tensor<T> x1;  // target mel [F x bins]
  std::size_t speaker = 0;
};

template <typename T>
std::vector<TrainItem<T>> prepare_items(const SyntheticCorpus& corpus);

struct LossParts {
  double cfm = 0, hca = 0, dur = 0;
};

// cfm + hca_weight * hca + dur_weight * dur for one batch. Noise, times
// and dropout masks come from `rng`.
template <typename T>
Tensor<T> training_loss(const Model<T>& m, std::span<const TrainItem<T>> batch,
                        const TrainConfig& cfg, RunContext<T>& ctx, Rng& rng,
                        LossParts* parts = nullptr);

// Conditional flow-matching loss in eval mode with noise fixed by `seed`,
// at four fixed times per item.
double evaluate_cfm(const Model<float>& m, const SyntheticCorpus& corpus,
                    std::uint64_t seed);
// Mean squared error of the predicted log frame count.
double evaluate_duration(const Model<float>& m, const SyntheticCorpus& corpus);
// Mean MCD of synthesized mels (true frame counts) against the targets.
double evaluate_mcd(const Model<float>& m, const SyntheticCorpus& corpus,
                    const OdeConfig& ode);

struct TrainResult {
  Model<float> model;
  std::vector<StepMetrics> log;
  double initial_cfm = 0, final_cfm = 0;  // evaluate_cfm on the train corpus
};

using StepCallback = std::function<void(const StepMetrics&)>;

// Raises NumericError on a non-finite loss after writing the parameters of
// the last good step to out_dir/last_good.ckpt (when out_dir is set).
TrainResult train(const TrainConfig& cfg, const SyntheticCorpus& corpus,
                  const StepCallback& on_step = {});
// Loads or generates the corpus named by cfg.
SyntheticCorpus training_corpus(const TrainConfig& cfg);

struct AblationRow {
  std::string name;  // A, B or C
  bool use_syll = false, use_pros = false;
  double val_cfm = 0;
  double mcd = 0;
};

struct AblationReport {
  std::vector<AblationRow> rows;
  bool ordering_holds = false;  // cfm A > B > C and mcd C < A
  std::string to_text() const;
};

AblationReport run_ablation(const TrainConfig& base, const StepCallback& on_step = {});

}  // namespace mftts
