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

// Log-mel features and the objective metrics: mel cepstral distortion and
// F0 RMSE. Also the small file formats the harness reads and writes.

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mftts {

struct MelConfig {
  double sample_rate = 16000.0;
  double frame_ms = 50.0;
  double shift_ms = 12.5;
  std::size_t n_fft = 1024;
  std::size_t bins = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-5;

  // Both round down; at 44.1 kHz the 12.5 ms hop becomes 551 samples.
  std::size_t frame_samples() const;
  std::size_t hop_samples() const;
  void validate() const;  // ConfigError

  friend bool operator==(const MelConfig&, const MelConfig&) = default;
};

struct MelSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> data;  // row-major frames x bins, natural-log energies
  MelConfig cfg;

  double at(std::size_t f, std::size_t b) const { return data[f * bins + b]; }
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Centre frequency of each filter, bins entries.
std::vector<double> mel_center_frequencies(const MelConfig& cfg);

// Hann window, magnitude STFT, triangular filterbank, log with floor.
// Frames = floor((N - frame) / hop) + 1; shorter input is a ContractError.
MelSpectrogram mel_spectrogram(std::span<const double> wave, const MelConfig& cfg);

// Orthonormal DCT-II of one log-mel frame.
std::vector<double> mel_cepstrum(std::span<const double> log_mel);

inline constexpr std::size_t kMcdCoefficients = 13;

// Mean over frames of (10 / ln 10) * sqrt(2 * sum_{d=1..13} (ca_d - cb_d)^2).
// Frame counts, bin counts and configs must match; there is no alignment.
double mcd(const MelSpectrogram& a, const MelSpectrogram& b);

struct F0Config {
  double min_hz = 50.0;
  double max_hz = 500.0;
  double voicing_threshold = 0.3;
};

// Per-frame F0 in Hz, 0 for unvoiced frames. Framing follows `mel`.
std::vector<double> f0_track(std::span<const double> wave, const MelConfig& mel,
                             const F0Config& f0 = {});

struct F0Rmse {
  double rmse_hz = 0.0;
  std::size_t co_voiced = 0;
  bool no_voicing_warning = false;  // set when no frame is voiced in both
};

F0Rmse f0_rmse(std::span<const double> a, std::span<const double> b,
               const MelConfig& mel, const F0Config& f0 = {});

// ---------------------------------------------------------------------------
// Files

struct Waveform {
  std::vector<double> samples;  // mono, nominally in [-1, 1]
  double sample_rate = 16000.0;
};

// 16-bit PCM mono RIFF/WAVE.
Waveform read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const Waveform& w);

// Headerless little-endian float32 samples.
Waveform read_f32(const std::filesystem::path& path, double sample_rate);
void write_f32(const std::filesystem::path& path, std::span<const double> samples);

// `# mel frames=F bins=B sample_rate=... ...` header, then one row per frame.
void write_mel_csv(const std::filesystem::path& path, const MelSpectrogram& m);
MelSpectrogram read_mel_csv(const std::filesystem::path& path);

}  // namespace mftts
