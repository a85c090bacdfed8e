/* Copyright 2026 The mftts Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* Stable C interface to libmftts.
 *
 * Every function returns an mftts_status. On failure the message is kept in
 * thread-local storage until the next call on the same thread and can be
 * read with mftts_last_error(). Handles are opaque and owned by the caller;
 * release them with the matching *_free function (NULL is accepted).
 * Strings returned through `char**` are released with mftts_string_free. */

#ifndef MFTTS_MFTTS_H_
#define MFTTS_MFTTS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MFTTS_API __declspec(dllexport)
#else
#define MFTTS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mftts_status {
  MFTTS_OK = 0,
  MFTTS_E_INVALID_ARGUMENT = 1, /* NULL handle or out-pointer, bad enum */
  MFTTS_E_DIMENSION = 2,
  MFTTS_E_CONTRACT = 3,
  MFTTS_E_NUMERIC = 4,
  MFTTS_E_PARSE = 5,
  MFTTS_E_IO = 6,
  MFTTS_E_CHECKPOINT = 7,
  MFTTS_E_CONFIG = 8,
  MFTTS_E_ASSERTION = 9, /* a verification run did not hold */
  MFTTS_E_INTERNAL = 10
} mftts_status;

MFTTS_API const char* mftts_version(void);
MFTTS_API const char* mftts_status_name(mftts_status status);
/* Message of the last failure on this thread, "" after a success. */
MFTTS_API const char* mftts_last_error(void);
MFTTS_API void mftts_string_free(char* s);

/* ---- frontend --------------------------------------------------------- */

typedef enum mftts_frontend_format {
  MFTTS_FRONTEND_TEXT = 0, /* three-tier listing, one tier per block */
  MFTTS_FRONTEND_JSON = 1
} mftts_frontend_format;

/* Analyses UTF-8 romanized text with the built-in tables. A parse error's
 * message carries the byte offset. */
MFTTS_API mftts_status mftts_frontend_analyze(const char* text,
                                              mftts_frontend_format format,
                                              char** out);

/* ---- corpus ----------------------------------------------------------- */

/* Writes meta.txt, manifest.tsv and mel/<i>.f32 under `out_dir`. */
MFTTS_API mftts_status mftts_corpus_generate(uint64_t seed, size_t n_items,
                                             size_t mel_bins,
                                             const char* out_dir);

/* ---- training configuration ------------------------------------------- */

typedef struct mftts_train_config mftts_train_config;

/* Flat `key = value` file; unknown keys fail with MFTTS_E_CONFIG. */
MFTTS_API mftts_status mftts_train_config_load(const char* path,
                                               mftts_train_config** out);
/* Desk defaults. */
MFTTS_API mftts_status mftts_train_config_default(mftts_train_config** out);
/* Overrides one key with the same rules as the file format. */
MFTTS_API mftts_status mftts_train_config_set(mftts_train_config* cfg,
                                              const char* key,
                                              const char* value);
MFTTS_API void mftts_train_config_free(mftts_train_config* cfg);

/* ---- models ----------------------------------------------------------- */

typedef struct mftts_model mftts_model;

/* Fresh parameters for the config's model section and seed. */
MFTTS_API mftts_status mftts_model_create(const mftts_train_config* cfg,
                                          mftts_model** out);
MFTTS_API mftts_status mftts_model_load(const char* path, mftts_model** out);
MFTTS_API mftts_status mftts_model_save(const mftts_model* model,
                                        const char* path);
MFTTS_API mftts_status mftts_model_parameter_count(const mftts_model* model,
                                                   size_t* out);
MFTTS_API void mftts_model_free(mftts_model* model);

/* ---- mel spectrograms ------------------------------------------------- */

typedef struct mftts_mel mftts_mel;

MFTTS_API mftts_status mftts_mel_read_csv(const char* path, mftts_mel** out);
MFTTS_API mftts_status mftts_mel_write_csv(const mftts_mel* mel,
                                           const char* path);
/* Log-mel of a 16-bit PCM mono WAV with the default analysis settings and
 * `bins` filters. */
MFTTS_API mftts_status mftts_mel_from_wav(const char* path, size_t bins,
                                          mftts_mel** out);
MFTTS_API mftts_status mftts_mel_shape(const mftts_mel* mel, size_t* frames,
                                       size_t* bins);
/* Row-major frames x bins; valid until the handle is freed. */
MFTTS_API mftts_status mftts_mel_data(const mftts_mel* mel,
                                      const double** data);
MFTTS_API void mftts_mel_free(mftts_mel* mel);

/* ---- synthesis -------------------------------------------------------- */

typedef enum mftts_ode_method {
  MFTTS_ODE_EULER = 0,
  MFTTS_ODE_MIDPOINT = 1
} mftts_ode_method;

typedef struct mftts_synthesis_options {
  const char* text;
  const char* ref_wav; /* optional; needs ref_text */
  const char* ref_text;
  uint64_t seed;
  size_t steps;
  mftts_ode_method method;
  size_t speaker;
  size_t frames; /* 0: predicted */
} mftts_synthesis_options;

MFTTS_API void mftts_synthesis_options_init(mftts_synthesis_options* opts);
MFTTS_API mftts_status mftts_synthesize(const mftts_model* model,
                                        const mftts_synthesis_options* opts,
                                        mftts_mel** out);

/* ---- evaluation ------------------------------------------------------- */

typedef struct mftts_eval_result {
  double mcd_db;
  int has_f0;      /* F0 needs waveforms on both sides */
  double f0_rmse_hz;
  size_t co_voiced_frames;
  int no_voicing_warning;
} mftts_eval_result;

/* Each path is a mel CSV or a WAV (chosen by the .wav extension). */
MFTTS_API mftts_status mftts_eval_files(const char* ref_path,
                                        const char* hyp_path,
                                        mftts_eval_result* out);
MFTTS_API mftts_status mftts_mcd(const mftts_mel* a, const mftts_mel* b,
                                 double* out);

/* ---- training, gradient suite, ablation -------------------------------- */

typedef struct mftts_step_metrics {
  size_t step;
  double lr;
  double cfm_loss;
  double hca_loss;
  double dur_loss;
  double grad_norm;
} mftts_step_metrics;

typedef void (*mftts_step_callback)(const mftts_step_metrics* m, void* user);

typedef struct mftts_train_summary {
  size_t steps;
  double initial_cfm;
  double final_cfm;
} mftts_train_summary;

/* Trains on the configured corpus. Metrics and checkpoints go to the
 * config's out_dir. `model_out` may be NULL. */
MFTTS_API mftts_status mftts_train(const mftts_train_config* cfg,
                                   mftts_step_callback on_step, void* user,
                                   mftts_train_summary* summary,
                                   mftts_model** model_out);

typedef struct mftts_grad_entry {
  const char* op; /* valid during the callback only */
  double max_rel_error;
  double tolerance;
  size_t entries;
  int full_model;
  int passed;
} mftts_grad_entry;

typedef void (*mftts_grad_callback)(const mftts_grad_entry* e, void* user);

/* Runs the finite-difference suite. `all_passed` is set either way. */
MFTTS_API mftts_status mftts_gradcheck(uint64_t seed,
                                       mftts_grad_callback on_entry,
                                       void* user, int* all_passed);

/* Trains variants A (phon), B (+syll) and C (+pros). `report` receives the
 * table and `ordering_holds` whether held-out loss falls A > B > C with
 * MCD(C) < MCD(A). Either out-pointer may be NULL. */
MFTTS_API mftts_status mftts_ablate(const mftts_train_config* cfg,
                                    mftts_step_callback on_step, void* user,
                                    char** report, int* ordering_holds);

#ifdef __cplusplus
}
#endif

#endif /* MFTTS_MFTTS_H_ */
