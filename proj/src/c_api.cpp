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

#include "mftts/mftts.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <new>
#include <sstream>
#include <string>

#include "mftts/audio.hpp"
#include "mftts/config.hpp"
#include "mftts/corpus.hpp"
#include "mftts/error.hpp"
#include "mftts/frontend.hpp"
#include "mftts/gradsuite.hpp"
#include "mftts/model.hpp"
#include "mftts/train.hpp"

struct mftts_train_config {
  mftts::ConfigMap raw;
  mftts::TrainConfig cfg;
};

struct mftts_model {
  mftts::Model<float> model;
};

struct mftts_mel {
  mftts::MelSpectrogram mel;
};

namespace {

thread_local std::string g_last_error;

class InvalidArgument : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename Fn>
mftts_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return MFTTS_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return MFTTS_E_INVALID_ARGUMENT;
  } catch (const mftts::ParseError& e) {
    g_last_error = e.what();
    return MFTTS_E_PARSE;
  } catch (const mftts::DimensionError& e) {
    g_last_error = e.what();
    return MFTTS_E_DIMENSION;
  } catch (const mftts::ContractError& e) {
    g_last_error = e.what();
    return MFTTS_E_CONTRACT;
  } catch (const mftts::NumericError& e) {
    g_last_error = e.what();
    return MFTTS_E_NUMERIC;
  } catch (const mftts::IoError& e) {
    g_last_error = e.what();
    return MFTTS_E_IO;
  } catch (const mftts::CheckpointError& e) {
    g_last_error = e.what();
    return MFTTS_E_CHECKPOINT;
  } catch (const mftts::ConfigError& e) {
    g_last_error = e.what();
    return MFTTS_E_CONFIG;
  } catch (const mftts::AssertionFailure& e) {
    g_last_error = e.what();
    return MFTTS_E_ASSERTION;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MFTTS_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MFTTS_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown exception";
    return MFTTS_E_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " is NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

mftts_step_metrics to_c(const mftts::StepMetrics& s) {
  return {s.step, s.lr, s.cfm_loss, s.hca_loss, s.dur_loss, s.grad_norm};
}

mftts::StepCallback step_callback(mftts_step_callback fn, void* user) {
  if (!fn) return {};
  return [fn, user](const mftts::StepMetrics& s) {
    const mftts_step_metrics m = to_c(s);
    fn(&m, user);
  };
}

std::string text_dump(const mftts::HierarchicalText& ht, const mftts::G2PTable& g2p) {
  using mftts::to_string;
  std::ostringstream o;
  o << "text: " << ht.source << "\n";
  o << "phonemes (" << ht.phon.size() << "):\n";
  for (std::size_t i = 0; i < ht.phon.size(); ++i) {
    const auto& sym = g2p.symbol(ht.phon.ids[i]);
    o << "  " << i << "  " << ht.phon.graphemes[i] << "  /" << sym.ipa << "/  id="
      << ht.phon.ids[i] << "  " << to_string(ht.phon.classes[i]) << "\n";
  }
  auto span_text = [&](const mftts::Span& s) {
    std::string r;
    for (std::size_t i = s.begin; i < s.end; ++i) r += ht.phon.graphemes[i];
    return r;
  };
  o << "syllables:";
  for (const auto& s : ht.syll.syllables)
    o << "  " << span_text(s) << "[" << s.begin << "," << s.end << ")";
  o << "\nmorphemes:";
  for (const auto& m : ht.syll.morphemes)
    o << "  " << m.text << "(" << (m.kind == mftts::MorphKind::kRoot ? "root" : "suffix")
      << ")[" << m.span.begin << "," << m.span.end << ")";
  o << "\nprosody: type=" << to_string(ht.pros.type) << "\n";
  for (std::size_t w = 0; w < ht.pros.words.size(); ++w) {
    o << "  " << ht.pros.words[w] << "  prominence=" << ht.pros.prominence[w]
      << "  boundary=" << to_string(ht.pros.boundaries[w]) << "\n";
  }
  for (const auto& w : ht.warnings) o << "warning: " << w << "\n";
  return o.str();
}

bool is_wav(const std::filesystem::path& p) {
  std::string ext = p.extension().string();
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".wav";
}

mftts::MelConfig mel_config_for(std::size_t bins) {
  mftts::MelConfig cfg;
  cfg.bins = bins;
  cfg.validate();
  return cfg;
}

}  // namespace

extern "C" {

const char* mftts_version(void) { return "0.1.0"; }

const char* mftts_status_name(mftts_status status) {
  switch (status) {
    case MFTTS_OK: return "ok";
    case MFTTS_E_INVALID_ARGUMENT: return "invalid argument";
    case MFTTS_E_DIMENSION: return "dimension error";
    case MFTTS_E_CONTRACT: return "contract error";
    case MFTTS_E_NUMERIC: return "numeric error";
    case MFTTS_E_PARSE: return "parse error";
    case MFTTS_E_IO: return "i/o error";
    case MFTTS_E_CHECKPOINT: return "checkpoint error";
    case MFTTS_E_CONFIG: return "config error";
    case MFTTS_E_ASSERTION: return "assertion failure";
    case MFTTS_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* mftts_last_error(void) { return g_last_error.c_str(); }

void mftts_string_free(char* s) { std::free(s); }

mftts_status mftts_frontend_analyze(const char* text, mftts_frontend_format format,
                                    char** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    const mftts::Frontend& fe = mftts::Frontend::builtin();
    const mftts::HierarchicalText ht = fe.build(text);
    switch (format) {
      case MFTTS_FRONTEND_TEXT: *out = dup_string(text_dump(ht, fe.g2p())); return;
      case MFTTS_FRONTEND_JSON: *out = dup_string(mftts::to_json(ht, fe.g2p()) + "\n"); return;
    }
    throw InvalidArgument("unknown frontend format");
  });
}

mftts_status mftts_corpus_generate(uint64_t seed, size_t n_items, size_t mel_bins,
                                   const char* out_dir) {
  return guarded([&] {
    require(out_dir, "out_dir");
    mftts::save_corpus(out_dir, mftts::generate_synthetic_corpus(seed, n_items, mel_bins));
  });
}

mftts_status mftts_train_config_load(const char* path, mftts_train_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto h = std::make_unique<mftts_train_config>();
    h->raw = mftts::ConfigMap::load(path);
    h->cfg = mftts::TrainConfig::from_config(h->raw);
    *out = h.release();
  });
}

mftts_status mftts_train_config_default(mftts_train_config** out) {
  return guarded([&] {
    require(out, "out");
    auto h = std::make_unique<mftts_train_config>();
    h->cfg = mftts::TrainConfig::from_config(h->raw);
    *out = h.release();
  });
}

mftts_status mftts_train_config_set(mftts_train_config* cfg, const char* key,
                                    const char* value) {
  return guarded([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    mftts::ConfigMap raw = cfg->raw;
    raw.set(key, value);
    cfg->cfg = mftts::TrainConfig::from_config(raw);
    cfg->raw = std::move(raw);
  });
}

void mftts_train_config_free(mftts_train_config* cfg) { delete cfg; }

mftts_status mftts_model_create(const mftts_train_config* cfg, mftts_model** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = new mftts_model{mftts::Model<float>::init(cfg->cfg.model, cfg->cfg.seed)};
  });
}

mftts_status mftts_model_load(const char* path, mftts_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mftts_model{mftts::load_checkpoint(path)};
  });
}

mftts_status mftts_model_save(const mftts_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    mftts::save_checkpoint(path, model->model);
  });
}

mftts_status mftts_model_parameter_count(const mftts_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.params.numel();
  });
}

void mftts_model_free(mftts_model* model) { delete model; }

mftts_status mftts_mel_read_csv(const char* path, mftts_mel** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new mftts_mel{mftts::read_mel_csv(path)};
  });
}

mftts_status mftts_mel_write_csv(const mftts_mel* mel, const char* path) {
  return guarded([&] {
    require(mel, "mel");
    require(path, "path");
    mftts::write_mel_csv(path, mel->mel);
  });
}

mftts_status mftts_mel_from_wav(const char* path, size_t bins, mftts_mel** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    const mftts::Waveform w = mftts::read_wav(path);
    mftts::MelConfig cfg = mel_config_for(bins);
    cfg.sample_rate = w.sample_rate;
    *out = new mftts_mel{mftts::mel_spectrogram(w.samples, cfg)};
  });
}

mftts_status mftts_mel_shape(const mftts_mel* mel, size_t* frames, size_t* bins) {
  return guarded([&] {
    require(mel, "mel");
    if (frames) *frames = mel->mel.frames;
    if (bins) *bins = mel->mel.bins;
  });
}

mftts_status mftts_mel_data(const mftts_mel* mel, const double** data) {
  return guarded([&] {
    require(mel, "mel");
    require(data, "data");
    *data = mel->mel.data.data();
  });
}

void mftts_mel_free(mftts_mel* mel) { delete mel; }

void mftts_synthesis_options_init(mftts_synthesis_options* opts) {
  if (!opts) return;
  *opts = mftts_synthesis_options{};
  opts->steps = 32;
  opts->method = MFTTS_ODE_EULER;
}

mftts_status mftts_synthesize(const mftts_model* model, const mftts_synthesis_options* opts,
                              mftts_mel** out) {
  return guarded([&] {
    require(model, "model");
    require(opts, "opts");
    require(opts->text, "opts->text");
    require(out, "out");
    if (opts->method != MFTTS_ODE_EULER && opts->method != MFTTS_ODE_MIDPOINT)
      throw InvalidArgument("unknown ODE method");
    if ((opts->ref_wav == nullptr) != (opts->ref_text == nullptr))
      throw InvalidArgument("ref_wav and ref_text must be given together");
    const mftts::Model<float>& m = model->model;
    mftts::SynthesisRequest req;
    req.text = opts->text;
    req.speaker = opts->speaker;
    if (opts->frames > 0) req.frames = opts->frames;
    if (opts->ref_wav) {
      const mftts::Waveform w = mftts::read_wav(opts->ref_wav);
      mftts::MelConfig cfg = mel_config_for(m.cfg.mel_bins);
      cfg.sample_rate = w.sample_rate;
      req.ref_mel = mftts::mel_spectrogram(w.samples, cfg);
      req.ref_text = opts->ref_text;
    }
    const mftts::OdeConfig ode{opts->steps,
                               opts->method == MFTTS_ODE_MIDPOINT ? mftts::OdeMethod::kMidpoint
                                                                  : mftts::OdeMethod::kEuler,
                               opts->seed};
    *out = new mftts_mel{mftts::synthesize(m, mftts::Frontend::builtin(), req, ode)};
  });
}

mftts_status mftts_mcd(const mftts_mel* a, const mftts_mel* b, double* out) {
  return guarded([&] {
    require(a, "a");
    require(b, "b");
    require(out, "out");
    *out = mftts::mcd(a->mel, b->mel);
  });
}

mftts_status mftts_eval_files(const char* ref_path, const char* hyp_path,
                              mftts_eval_result* out) {
  return guarded([&] {
    require(ref_path, "ref_path");
    require(hyp_path, "hyp_path");
    require(out, "out");
    const bool ref_wav = is_wav(ref_path), hyp_wav = is_wav(hyp_path);
    *out = mftts_eval_result{};
    if (ref_wav && hyp_wav) {
      const mftts::Waveform a = mftts::read_wav(ref_path), b = mftts::read_wav(hyp_path);
      if (a.sample_rate != b.sample_rate)
        throw mftts::ContractError("eval: sample rates differ");
      mftts::MelConfig cfg = mel_config_for(mftts::MelConfig{}.bins);
      cfg.sample_rate = a.sample_rate;
      out->mcd_db = mftts::mcd(mftts::mel_spectrogram(a.samples, cfg),
                               mftts::mel_spectrogram(b.samples, cfg));
      const mftts::F0Rmse f0 = mftts::f0_rmse(a.samples, b.samples, cfg);
      out->has_f0 = 1;
      out->f0_rmse_hz = f0.rmse_hz;
      out->co_voiced_frames = f0.co_voiced;
      out->no_voicing_warning = f0.no_voicing_warning ? 1 : 0;
      return;
    }
    if (ref_wav || hyp_wav)
      throw mftts::ContractError("eval: compare a wav with a wav or a mel with a mel");
    out->mcd_db = mftts::mcd(mftts::read_mel_csv(ref_path), mftts::read_mel_csv(hyp_path));
  });
}

mftts_status mftts_train(const mftts_train_config* cfg, mftts_step_callback on_step,
                         void* user, mftts_train_summary* summary,
                         mftts_model** model_out) {
  return guarded([&] {
    require(cfg, "cfg");
    const mftts::SyntheticCorpus corpus = mftts::training_corpus(cfg->cfg);
    mftts::TrainResult r = mftts::train(cfg->cfg, corpus, step_callback(on_step, user));
    if (summary) *summary = {r.log.size(), r.initial_cfm, r.final_cfm};
    if (model_out) *model_out = new mftts_model{std::move(r.model)};
  });
}

mftts_status mftts_gradcheck(uint64_t seed, mftts_grad_callback on_entry, void* user,
                             int* all_passed) {
  return guarded([&] {
    require(all_passed, "all_passed");
    bool ok = true;
    mftts::run_gradient_suite(seed, [&](const mftts::GradSuiteEntry& e) {
      ok = ok && e.passed();
      if (on_entry) {
        const mftts_grad_entry c{e.report.op.c_str(), e.report.max_rel_error, e.tolerance,
                                 e.report.entries.size(), e.full_model ? 1 : 0, e.passed() ? 1 : 0};
        on_entry(&c, user);
      }
    });
    *all_passed = ok ? 1 : 0;
  });
}

mftts_status mftts_ablate(const mftts_train_config* cfg, mftts_step_callback on_step,
                          void* user, char** report, int* ordering_holds) {
  return guarded([&] {
    require(cfg, "cfg");
    const mftts::AblationReport r = mftts::run_ablation(cfg->cfg, step_callback(on_step, user));
    if (ordering_holds) *ordering_holds = r.ordering_holds ? 1 : 0;
    if (report) *report = dup_string(r.to_text());
  });
}

}  // extern "C"
