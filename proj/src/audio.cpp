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

#include "mftts/audio.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numbers>
#include <sstream>

#include "mftts/config.hpp"
#include "mftts/error.hpp"

namespace mftts {

namespace {

std::size_t floor_samples(double sr, double ms) {
  // The epsilon keeps exact products (16000 * 0.0125) from rounding down.
  return static_cast<std::size_t>(std::floor(sr * ms / 1000.0 + 1e-9));
}

// Filterbank weights [bins x (n_fft/2 + 1)].
std::vector<double> filterbank(const MelConfig& cfg) {
  const std::size_t nfreq = cfg.n_fft / 2 + 1;
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> edges(cfg.bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) /
                                  static_cast<double>(cfg.bins + 1));
  std::vector<double> w(cfg.bins * nfreq, 0.0);
  for (std::size_t b = 0; b < cfg.bins; ++b) {
    const double l = edges[b], c = edges[b + 1], r = edges[b + 2];
    for (std::size_t k = 0; k < nfreq; ++k) {
      const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.n_fft);
      double v = 0.0;
      if (f > l && f <= c) v = (f - l) / (c - l);
      else if (f > c && f < r) v = (r - f) / (r - c);
      w[b * nfreq + k] = v;
    }
  }
  return w;
}

struct FftwPlan {
  explicit FftwPlan(std::size_t n)
      : in(static_cast<double*>(fftw_malloc(sizeof(double) * n))),
        out(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)))) {
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
  }
  ~FftwPlan() {
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(out);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;

  double* in;
  fftw_complex* out;
  fftw_plan plan;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!f) throw IoError("short write to " + path.string());
}

std::uint32_t le32(const std::string& s, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + i])) << (8 * i);
  return v;
}

std::uint16_t le16(const std::string& s, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(s[at]) |
                                    (static_cast<unsigned char>(s[at + 1]) << 8));
}

void put32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put16(std::string& s, std::uint16_t v) {
  s.push_back(static_cast<char>(v & 0xff));
  s.push_back(static_cast<char>(v >> 8));
}

}  // namespace

std::size_t MelConfig::frame_samples() const { return floor_samples(sample_rate, frame_ms); }
std::size_t MelConfig::hop_samples() const { return floor_samples(sample_rate, shift_ms); }

void MelConfig::validate() const {
  if (!(sample_rate > 0)) throw ConfigError("mel config: sample rate must be positive");
  if (!(shift_ms > 0) || frame_ms < shift_ms)
    throw ConfigError("mel config: frame length must be >= frame shift > 0");
  if (hop_samples() == 0) throw ConfigError("mel config: hop is shorter than one sample");
  if (n_fft < frame_samples())
    throw ConfigError("mel config: FFT size " + std::to_string(n_fft) +
                      " is smaller than the " + std::to_string(frame_samples()) +
                      "-sample frame");
  if (bins == 0) throw ConfigError("mel config: bins must be >= 1");
  if (!(fmin >= 0 && fmin < fmax && fmax <= sample_rate / 2))
    throw ConfigError("mel config: need 0 <= fmin < fmax <= sample_rate / 2");
  if (!(log_floor > 0)) throw ConfigError("mel config: log floor must be positive");
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::vector<double> mel_center_frequencies(const MelConfig& cfg) {
  const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
  std::vector<double> c(cfg.bins);
  for (std::size_t b = 0; b < cfg.bins; ++b)
    c[b] = mel_to_hz(lo + (hi - lo) * static_cast<double>(b + 1) /
                              static_cast<double>(cfg.bins + 1));
  return c;
}

MelSpectrogram mel_spectrogram(std::span<const double> wave, const MelConfig& cfg) {
  cfg.validate();
  const std::size_t frame = cfg.frame_samples(), hop = cfg.hop_samples();
  if (wave.size() < frame)
    throw ContractError("mel_spectrogram: " + std::to_string(wave.size()) +
                        " samples is shorter than one " + std::to_string(frame) +
                        "-sample frame");
  const std::size_t frames = (wave.size() - frame) / hop + 1;
  const std::size_t nfreq = cfg.n_fft / 2 + 1;
  const std::vector<double> fb = filterbank(cfg);
  std::vector<double> window(frame);
  for (std::size_t n = 0; n < frame; ++n)
    window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                     static_cast<double>(frame));

  MelSpectrogram out;
  out.frames = frames;
  out.bins = cfg.bins;
  out.cfg = cfg;
  out.data.resize(frames * cfg.bins);
  FftwPlan fft(cfg.n_fft);
  std::vector<double> mag(nfreq);
  for (std::size_t f = 0; f < frames; ++f) {
    std::fill(fft.in, fft.in + cfg.n_fft, 0.0);
    for (std::size_t n = 0; n < frame; ++n) fft.in[n] = wave[f * hop + n] * window[n];
    fftw_execute(fft.plan);
    for (std::size_t k = 0; k < nfreq; ++k) mag[k] = std::hypot(fft.out[k][0], fft.out[k][1]);
    for (std::size_t b = 0; b < cfg.bins; ++b) {
      double e = 0.0;
      const double* w = fb.data() + b * nfreq;
      for (std::size_t k = 0; k < nfreq; ++k) e += w[k] * mag[k];
      out.data[f * cfg.bins + b] = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

std::vector<double> mel_cepstrum(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> c(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      s += x[i] * std::cos(std::numbers::pi * static_cast<double>(k) *
                           (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n)));
    c[k] = s * std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(n));
  }
  return c;
}

double mcd(const MelSpectrogram& a, const MelSpectrogram& b) {
  if (a.frames != b.frames || a.bins != b.bins)
    throw ContractError("mcd: shapes differ (" + std::to_string(a.frames) + "x" +
                        std::to_string(a.bins) + " vs " + std::to_string(b.frames) +
                        "x" + std::to_string(b.bins) + "); no time alignment is done");
  if (!(a.cfg == b.cfg)) throw ContractError("mcd: mel configs differ");
  if (a.bins <= kMcdCoefficients)
    throw ContractError("mcd: needs more than " + std::to_string(kMcdCoefficients) +
                        " mel bins, got " + std::to_string(a.bins));
  if (a.frames == 0) throw ContractError("mcd: empty spectrogram");
  const double k = 10.0 / std::numbers::ln10;
  double total = 0.0;
  for (std::size_t f = 0; f < a.frames; ++f) {
    const auto ca = mel_cepstrum(std::span(a.data).subspan(f * a.bins, a.bins));
    const auto cb = mel_cepstrum(std::span(b.data).subspan(f * b.bins, b.bins));
    double s = 0.0;
    for (std::size_t d = 1; d <= kMcdCoefficients; ++d) s += (ca[d] - cb[d]) * (ca[d] - cb[d]);
    total += k * std::sqrt(2.0 * s);
  }
  return total / static_cast<double>(a.frames);
}

std::vector<double> f0_track(std::span<const double> wave, const MelConfig& mel,
                             const F0Config& f0) {
  mel.validate();
  const std::size_t frame = mel.frame_samples(), hop = mel.hop_samples();
  if (wave.size() < frame) return {};
  const std::size_t frames = (wave.size() - frame) / hop + 1;
  const std::size_t lag_lo = static_cast<std::size_t>(std::floor(mel.sample_rate / f0.max_hz));
  const std::size_t lag_hi = std::min(
      static_cast<std::size_t>(std::ceil(mel.sample_rate / f0.min_hz)), frame - 2);
  std::vector<double> track(frames, 0.0);
  std::vector<double> x(frame), r(lag_hi + 2, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    double mean = 0.0;
    for (std::size_t n = 0; n < frame; ++n) mean += wave[f * hop + n];
    mean /= static_cast<double>(frame);
    for (std::size_t n = 0; n < frame; ++n) x[n] = wave[f * hop + n] - mean;
    // Normalized over the overlapping part so long lags are not tapered.
    for (std::size_t lag = lag_lo - 1; lag <= lag_hi + 1; ++lag) {
      double xy = 0, xx = 0, yy = 0;
      for (std::size_t n = 0; n + lag < frame; ++n) {
        xy += x[n] * x[n + lag];
        xx += x[n] * x[n];
        yy += x[n + lag] * x[n + lag];
      }
      r[lag] = (xx > 0 && yy > 0) ? xy / std::sqrt(xx * yy) : 0.0;
    }
    double peak = -1.0;
    for (std::size_t lag = lag_lo; lag <= lag_hi; ++lag) peak = std::max(peak, r[lag]);
    if (!(peak > f0.voicing_threshold)) continue;
    // First local maximum close to the global one avoids octave errors from
    // the near-equal peaks at multiples of the period.
    std::size_t best = 0;
    for (std::size_t lag = lag_lo; lag <= lag_hi; ++lag) {
      if (r[lag] >= 0.9 * peak && r[lag] >= r[lag - 1] && r[lag] >= r[lag + 1]) {
        best = lag;
        break;
      }
    }
    if (best == 0) continue;
    const double a = r[best - 1], b = r[best], c = r[best + 1];
    const double denom = a - 2 * b + c;
    const double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
    track[f] = mel.sample_rate / (static_cast<double>(best) + std::clamp(shift, -0.5, 0.5));
  }
  return track;
}

F0Rmse f0_rmse(std::span<const double> a, std::span<const double> b,
               const MelConfig& mel, const F0Config& f0) {
  if (a.size() != b.size())
    throw ContractError("f0_rmse: waveforms differ in length (" + std::to_string(a.size()) +
                        " vs " + std::to_string(b.size()) + ")");
  const auto ta = f0_track(a, mel, f0), tb = f0_track(b, mel, f0);
  F0Rmse out;
  double s = 0.0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    if (ta[i] > 0 && tb[i] > 0) {
      s += (ta[i] - tb[i]) * (ta[i] - tb[i]);
      ++out.co_voiced;
    }
  }
  if (out.co_voiced == 0) {
    out.no_voicing_warning = true;
    return out;
  }
  out.rmse_hz = std::sqrt(s / static_cast<double>(out.co_voiced));
  return out;
}

// ---------------------------------------------------------------------------
// Files

Waveform read_wav(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  if (s.size() < 12 || s.compare(0, 4, "RIFF") != 0 || s.compare(8, 4, "WAVE") != 0)
    throw IoError(path.string() + " is not a RIFF/WAVE file");
  std::size_t pos = 12;
  std::uint16_t channels = 0, bits = 0, format = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (pos + 8 <= s.size()) {
    const std::string id = s.substr(pos, 4);
    const std::uint32_t len = le32(s, pos + 4);
    const std::size_t body = pos + 8;
    if (body + len > s.size()) throw IoError(path.string() + ": truncated chunk '" + id + "'");
    if (id == "fmt ") {
      if (len < 16) throw IoError(path.string() + ": short fmt chunk");
      format = le16(s, body);
      channels = le16(s, body + 2);
      rate = le32(s, body + 4);
      bits = le16(s, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw IoError(path.string() + ": data chunk before fmt chunk");
      if (format != 1 || bits != 16 || channels != 1)
        throw IoError(path.string() + ": only 16-bit PCM mono is supported (format " +
                      std::to_string(format) + ", " + std::to_string(bits) + " bits, " +
                      std::to_string(channels) + " channels)");
      Waveform w;
      w.sample_rate = rate;
      w.samples.resize(len / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = static_cast<std::int16_t>(le16(s, body + 2 * i)) / 32768.0;
      return w;
    }
    pos = body + len + (len & 1);
  }
  throw IoError(path.string() + ": no data chunk");
}

void write_wav(const std::filesystem::path& path, const Waveform& w) {
  const std::uint32_t rate = static_cast<std::uint32_t>(std::lround(w.sample_rate));
  const std::uint32_t bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  std::string s = "RIFF";
  put32(s, 36 + bytes);
  s += "WAVEfmt ";
  put32(s, 16);
  put16(s, 1);
  put16(s, 1);
  put32(s, rate);
  put32(s, rate * 2);
  put16(s, 2);
  put16(s, 16);
  s += "data";
  put32(s, bytes);
  for (double x : w.samples) {
    const long v = std::lround(std::clamp(x, -1.0, 1.0) * 32767.0);
    put16(s, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  write_file(path, s);
}

Waveform read_f32(const std::filesystem::path& path, double sample_rate) {
  const std::string s = read_file(path);
  if (s.size() % 4 != 0)
    throw IoError(path.string() + ": size is not a multiple of 4 bytes");
  Waveform w;
  w.sample_rate = sample_rate;
  w.samples.resize(s.size() / 4);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    w.samples[i] = std::bit_cast<float>(le32(s, 4 * i));
  return w;
}

void write_f32(const std::filesystem::path& path, std::span<const double> samples) {
  std::string s;
  s.reserve(samples.size() * 4);
  for (double x : samples) put32(s, std::bit_cast<std::uint32_t>(static_cast<float>(x)));
  write_file(path, s);
}

void write_mel_csv(const std::filesystem::path& path, const MelSpectrogram& m) {
  std::string s = "# mel frames=" + std::to_string(m.frames) +
                  " bins=" + std::to_string(m.bins) +
                  " sample_rate=" + format_double(m.cfg.sample_rate) +
                  " frame_ms=" + format_double(m.cfg.frame_ms) +
                  " shift_ms=" + format_double(m.cfg.shift_ms) +
                  " n_fft=" + std::to_string(m.cfg.n_fft) +
                  " fmin=" + format_double(m.cfg.fmin) +
                  " fmax=" + format_double(m.cfg.fmax) +
                  " log_floor=" + format_double(m.cfg.log_floor) + "\n";
  for (std::size_t f = 0; f < m.frames; ++f) {
    for (std::size_t b = 0; b < m.bins; ++b) {
      if (b) s += ',';
      s += format_double(m.at(f, b));
    }
    s += '\n';
  }
  write_file(path, s);
}

MelSpectrogram read_mel_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line.rfind("# mel ", 0) != 0)
    throw IoError(path.string() + ": missing '# mel' header line");
  ConfigMap hdr;
  {
    std::istringstream fields(line.substr(6));
    std::string kv;
    while (fields >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw IoError(path.string() + ": bad header field '" + kv + "'");
      hdr.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
  }
  MelSpectrogram m;
  try {
    m.frames = hdr.get_size("frames", 0);
    m.bins = hdr.get_size("bins", 0);
    m.cfg.sample_rate = hdr.get_double("sample_rate", m.cfg.sample_rate);
    m.cfg.frame_ms = hdr.get_double("frame_ms", m.cfg.frame_ms);
    m.cfg.shift_ms = hdr.get_double("shift_ms", m.cfg.shift_ms);
    m.cfg.n_fft = hdr.get_size("n_fft", m.cfg.n_fft);
    m.cfg.fmin = hdr.get_double("fmin", m.cfg.fmin);
    m.cfg.fmax = hdr.get_double("fmax", m.cfg.fmax);
    m.cfg.log_floor = hdr.get_double("log_floor", m.cfg.log_floor);
    hdr.require_all_used();
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  m.cfg.bins = m.bins;
  m.data.reserve(m.frames * m.bins);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::size_t cols = 0;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        m.data.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        throw IoError(path.string() + ": row " + std::to_string(rows + 1) +
                      " has a non-numeric cell '" + cell + "'");
      }
      ++cols;
    }
    if (cols != m.bins)
      throw IoError(path.string() + ": row " + std::to_string(rows + 1) + " has " +
                    std::to_string(cols) + " values, expected " + std::to_string(m.bins));
    ++rows;
  }
  if (rows != m.frames)
    throw IoError(path.string() + ": " + std::to_string(rows) + " rows, header says " +
                  std::to_string(m.frames));
  return m;
}

}  // namespace mftts
