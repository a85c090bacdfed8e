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

// Command-line front end. Talks to the library through the C API only.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error,
// 3 a verification (gradient suite, ablation ordering) did not hold.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "mftts/mftts.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitAssertion = 3;

int exit_code(mftts_status s) {
  switch (s) {
    case MFTTS_OK: return kExitOk;
    case MFTTS_E_CONFIG:
    case MFTTS_E_INVALID_ARGUMENT: return kExitUsage;
    case MFTTS_E_ASSERTION: return kExitAssertion;
    default: return kExitRuntime;
  }
}

int fail(mftts_status s) {
  std::fprintf(stderr, "mftts: %s: %s\n", mftts_status_name(s), mftts_last_error());
  return exit_code(s);
}

struct Deleter {
  void operator()(mftts_model* p) const { mftts_model_free(p); }
  void operator()(mftts_mel* p) const { mftts_mel_free(p); }
  void operator()(mftts_train_config* p) const { mftts_train_config_free(p); }
  void operator()(char* p) const { mftts_string_free(p); }
};
template <typename T>
using Owned = std::unique_ptr<T, Deleter>;

void print_step(const mftts_step_metrics* m, void* user) {
  const std::size_t every = *static_cast<const std::size_t*>(user);
  if (every == 0 || m->step % every != 0) return;
  std::printf("step %5zu  lr %.3g  cfm %.5f  hca %.5f  dur %.5f  |g| %.4f\n", m->step,
              m->lr, m->cfm_loss, m->hca_loss, m->dur_loss, m->grad_norm);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int cmd_frontend(const std::string& text, bool json) {
  char* out = nullptr;
  const mftts_status s =
      mftts_frontend_analyze(text.c_str(), json ? MFTTS_FRONTEND_JSON : MFTTS_FRONTEND_TEXT, &out);
  if (s != MFTTS_OK) return fail(s);
  Owned<char> owned(out);
  std::fputs(out, stdout);
  return kExitOk;
}

int cmd_gen_corpus(std::uint64_t seed, std::size_t n, std::size_t bins, const std::string& dir) {
  const mftts_status s = mftts_corpus_generate(seed, n, bins, dir.c_str());
  if (s != MFTTS_OK) return fail(s);
  std::printf("wrote %zu items to %s\n", n, dir.c_str());
  return kExitOk;
}

mftts_status load_config(const std::string& path, Owned<mftts_train_config>& out) {
  mftts_train_config* cfg = nullptr;
  const mftts_status s = mftts_train_config_load(path.c_str(), &cfg);
  out.reset(cfg);
  return s;
}

int cmd_train(const std::string& config, std::size_t log_every) {
  Owned<mftts_train_config> cfg;
  if (mftts_status s = load_config(config, cfg); s != MFTTS_OK) return fail(s);
  const auto t0 = std::chrono::steady_clock::now();
  mftts_train_summary summary{};
  const mftts_status s = mftts_train(cfg.get(), print_step, &log_every, &summary, nullptr);
  if (s != MFTTS_OK) return fail(s);
  std::printf("trained %zu steps in %.1f s; train L_CFM %.5f -> %.5f (ratio %.4f)\n",
              summary.steps, seconds_since(t0), summary.initial_cfm, summary.final_cfm,
              summary.final_cfm / summary.initial_cfm);
  return kExitOk;
}

struct SynthArgs {
  std::string ckpt, text, ref_wav, ref_text, out, method = "euler";
  std::uint64_t seed = 0;
  std::size_t steps = 32, speaker = 0, frames = 0;
};

int cmd_synthesize(const SynthArgs& a) {
  if (a.ref_wav.empty() != a.ref_text.empty()) {
    std::fprintf(stderr, "mftts synthesize: --ref-wav and --ref-text go together\n");
    return kExitUsage;
  }
  mftts_model* raw = nullptr;
  if (mftts_status s = mftts_model_load(a.ckpt.c_str(), &raw); s != MFTTS_OK) return fail(s);
  Owned<mftts_model> model(raw);
  mftts_synthesis_options opts;
  mftts_synthesis_options_init(&opts);
  opts.text = a.text.c_str();
  if (!a.ref_wav.empty()) {
    opts.ref_wav = a.ref_wav.c_str();
    opts.ref_text = a.ref_text.c_str();
  }
  opts.seed = a.seed;
  opts.steps = a.steps;
  opts.method = a.method == "midpoint" ? MFTTS_ODE_MIDPOINT : MFTTS_ODE_EULER;
  opts.speaker = a.speaker;
  opts.frames = a.frames;
  mftts_mel* mel = nullptr;
  if (mftts_status s = mftts_synthesize(model.get(), &opts, &mel); s != MFTTS_OK) return fail(s);
  Owned<mftts_mel> owned(mel);
  if (mftts_status s = mftts_mel_write_csv(mel, a.out.c_str()); s != MFTTS_OK) return fail(s);
  std::size_t frames = 0, bins = 0;
  mftts_mel_shape(mel, &frames, &bins);
  std::printf("wrote %zu x %zu mel to %s\n", frames, bins, a.out.c_str());
  return kExitOk;
}

int cmd_eval(const std::string& ref, const std::string& hyp) {
  mftts_eval_result r{};
  if (mftts_status s = mftts_eval_files(ref.c_str(), hyp.c_str(), &r); s != MFTTS_OK)
    return fail(s);
  std::printf("MCD: %.4f dB\n", r.mcd_db);
  if (!r.has_f0) {
    std::printf("F0-RMSE: n/a (needs waveforms)\n");
  } else if (r.no_voicing_warning) {
    std::printf("F0-RMSE: n/a (no frame voiced in both)\n");
  } else {
    std::printf("F0-RMSE: %.4f Hz over %zu frames\n", r.f0_rmse_hz, r.co_voiced_frames);
  }
  return kExitOk;
}

void print_grad(const mftts_grad_entry* e, void*) {
  std::printf("%-4s %-28s max rel %.3e  tol %.0e  (%zu entries)%s\n", e->passed ? "ok" : "FAIL",
              e->op, e->max_rel_error, e->tolerance, e->entries, e->full_model ? "  [model]" : "");
  std::fflush(stdout);
}

int cmd_gradcheck(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  int all = 0;
  if (mftts_status s = mftts_gradcheck(seed, print_grad, nullptr, &all); s != MFTTS_OK)
    return fail(s);
  std::printf("gradient suite %s in %.1f s\n", all ? "passed" : "FAILED", seconds_since(t0));
  return all ? kExitOk : kExitAssertion;
}

int cmd_ablate(const std::string& config, std::size_t log_every) {
  Owned<mftts_train_config> cfg;
  if (mftts_status s = load_config(config, cfg); s != MFTTS_OK) return fail(s);
  char* report = nullptr;
  int holds = 0;
  const mftts_status s = mftts_ablate(cfg.get(), print_step, &log_every, &report, &holds);
  if (s != MFTTS_OK) return fail(s);
  Owned<char> owned(report);
  std::fputs(report, stdout);
  return holds ? kExitOk : kExitAssertion;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mftts: hierarchical flow-matching TTS at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mftts_version()));

  std::string text;
  bool json = false;
  auto* frontend = app.add_subcommand("frontend", "Print the three-tier analysis of a text");
  frontend->add_option("text", text, "Romanized Manchu text")->required();
  frontend->add_flag("--json", json, "Emit JSON instead of the listing");

  std::uint64_t corpus_seed = 42;
  std::size_t corpus_n = 64, corpus_bins = 16;
  std::string corpus_out;
  auto* gen = app.add_subcommand("gen-corpus", "Write the synthetic corpus");
  gen->add_option("--seed", corpus_seed, "Corpus seed")->required();
  gen->add_option("--n", corpus_n, "Number of items")->required()->check(CLI::PositiveNumber);
  gen->add_option("--out", corpus_out, "Output directory")->required();
  gen->add_option("--bins", corpus_bins, "Mel bins")->capture_default_str();

  std::string config;
  std::size_t log_every = 50;
  auto* train = app.add_subcommand("train", "Train from a config file");
  train->add_option("--config", config, "key = value config")->required();
  train->add_option("--log-every", log_every, "Print every N steps (0: quiet)")
      ->capture_default_str();

  SynthArgs sa;
  auto* synth = app.add_subcommand("synthesize", "Synthesize a mel spectrogram (CSV)");
  synth->add_option("--ckpt", sa.ckpt, "Checkpoint")->required();
  synth->add_option("--text", sa.text, "Text to speak")->required();
  synth->add_option("--ref-wav", sa.ref_wav, "Reference recording (16-bit PCM WAV)");
  synth->add_option("--ref-text", sa.ref_text, "Transcript of the reference");
  synth->add_option("--seed", sa.seed, "Noise seed")->required();
  synth->add_option("--steps", sa.steps, "ODE steps")->required()->check(CLI::PositiveNumber);
  synth->add_option("--out", sa.out, "Output mel CSV")->required();
  synth->add_option("--method", sa.method, "euler or midpoint")
      ->check(CLI::IsMember({"euler", "midpoint"}))
      ->capture_default_str();
  synth->add_option("--speaker", sa.speaker, "Speaker id")->capture_default_str();
  synth->add_option("--frames", sa.frames, "Output frames (0: predicted)")->capture_default_str();

  std::string ref, hyp;
  auto* eval = app.add_subcommand("eval", "MCD and F0-RMSE between two files");
  eval->add_option("--ref", ref, "Reference mel CSV or WAV")->required();
  eval->add_option("--hyp", hyp, "Hypothesis mel CSV or WAV")->required();

  std::uint64_t grad_seed = 0;
  auto* grad = app.add_subcommand("gradcheck", "Run the finite-difference gradient suite");
  grad->add_option("--seed", grad_seed, "Seed for the random inputs")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Train the tier-ablation variants");
  ablate->add_option("--config", config, "key = value config")->required();
  ablate->add_option("--log-every", log_every, "Print every N steps (0: quiet)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "mftts: %s\n\n", e.what());
    const CLI::App* scope = &app;
    for (const CLI::App* sub : app.get_subcommands()) scope = sub;
    std::fputs(scope->help().c_str(), stderr);
    return kExitUsage;
  }

  if (*frontend) return cmd_frontend(text, json);
  if (*gen) return cmd_gen_corpus(corpus_seed, corpus_n, corpus_bins, corpus_out);
  if (*train) return cmd_train(config, log_every);
  if (*synth) return cmd_synthesize(sa);
  if (*eval) return cmd_eval(ref, hyp);
  if (*grad) return cmd_gradcheck(grad_seed);
  if (*ablate) return cmd_ablate(config, log_every);
  return kExitUsage;
}
