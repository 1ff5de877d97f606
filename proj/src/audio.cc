// Copyright (c) 2026 The Comix Authors
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

#include "comix/audio.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "comix/error.h"

namespace comix::audio {

namespace {

std::mutex& FftwPlannerMutex() {
  static std::mutex m;
  return m;
}

uint32_t ReadU32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t ReadU16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::vector<uint8_t>* out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void PutU16(std::vector<uint8_t>* out, uint16_t v) {
  out->push_back(static_cast<uint8_t>(v));
  out->push_back(static_cast<uint8_t>(v >> 8));
}

struct ParsedWav {
  WavInfo info;
  int format = 0;
  std::vector<uint8_t> bytes;
  size_t data_offset = 0;
  size_t data_size = 0;
};

ParsedWav ParseWav(const std::string& path, bool need_data) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open WAV '" + path + "'");
  ParsedWav w;
  if (need_data) {
    w.bytes.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  } else {
    w.bytes.resize(4096);
    in.read(reinterpret_cast<char*>(w.bytes.data()), static_cast<std::streamsize>(w.bytes.size()));
    w.bytes.resize(static_cast<size_t>(in.gcount()));
  }
  const auto& b = w.bytes;
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 ||
      std::memcmp(b.data() + 8, "WAVE", 4) != 0) {
    throw Error("not a RIFF/WAVE file: '" + path + "'");
  }
  size_t pos = 12;
  bool have_fmt = false;
  while (pos + 8 <= b.size() || (!need_data && pos + 8 <= b.size())) {
    uint32_t size = ReadU32(&b[pos + 4]);
    const uint8_t* id = &b[pos];
    size_t body = pos + 8;
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > b.size()) throw Error("corrupt WAV fmt chunk: '" + path + "'");
      w.format = ReadU16(&b[body]);
      w.info.channels = ReadU16(&b[body + 2]);
      w.info.sample_rate = static_cast<int>(ReadU32(&b[body + 4]));
      w.info.bits_per_sample = ReadU16(&b[body + 14]);
      if (w.format == 0xFFFE && size >= 26 && body + 26 <= b.size()) {
        w.format = ReadU16(&b[body + 24]);
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      if (!have_fmt) throw Error("WAV data chunk before fmt chunk: '" + path + "'");
      w.data_offset = body;
      w.data_size = size;
      if (need_data) {
        if (body + size > b.size()) {
          // Truncated files: keep what is actually present.
          w.data_size = b.size() - body;
        }
      }
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt || w.data_offset == 0) throw Error("corrupt WAV header: '" + path + "'");
  if (w.info.channels <= 0 || w.info.sample_rate <= 0) {
    throw Error("corrupt WAV header: '" + path + "'");
  }
  bool pcm_ok = (w.format == 1 && (w.info.bits_per_sample == 16 || w.info.bits_per_sample == 24 ||
                                   w.info.bits_per_sample == 32)) ||
                (w.format == 3 && w.info.bits_per_sample == 32);
  if (w.format != 1 && w.format != 3) {
    throw Error("unsupported WAV format tag " + std::to_string(w.format) + ": '" + path + "'");
  }
  if (!pcm_ok) {
    throw Error("unsupported bit depth " + std::to_string(w.info.bits_per_sample) + ": '" + path +
                "'");
  }
  size_t frame_bytes = static_cast<size_t>(w.info.channels) * (w.info.bits_per_sample / 8);
  w.info.frames = static_cast<int64_t>(w.data_size / frame_bytes);
  return w;
}

}  // namespace

WavInfo ReadWavInfo(const std::string& path) { return ParseWav(path, false).info; }

AudioClip LoadWav(const std::string& path, int target_rate) {
  ParsedWav w = ParseWav(path, true);
  const int ch = w.info.channels;
  const int bytes = w.info.bits_per_sample / 8;
  AudioClip clip;
  clip.sample_rate = w.info.sample_rate;
  clip.samples.resize(static_cast<size_t>(w.info.frames));
  const uint8_t* p = w.bytes.data() + w.data_offset;
  for (int64_t f = 0; f < w.info.frames; ++f) {
    double acc = 0.0;
    for (int c = 0; c < ch; ++c) {
      const uint8_t* s = p + (f * ch + c) * bytes;
      double v = 0.0;
      if (w.format == 3) {
        float x;
        std::memcpy(&x, s, 4);
        v = x;
      } else if (bytes == 2) {
        v = static_cast<int16_t>(ReadU16(s)) / 32768.0;
      } else if (bytes == 3) {
        int32_t x = static_cast<int32_t>((s[0] << 8) | (s[1] << 16) | (s[2] << 24)) >> 8;
        v = x / 8388608.0;
      } else {
        v = static_cast<int32_t>(ReadU32(s)) / 2147483648.0;
      }
      acc += v;
    }
    clip.samples[static_cast<size_t>(f)] = std::clamp(acc / ch, -1.0, 1.0);
  }
  if (target_rate > 0 && target_rate != clip.sample_rate) {
    int from = clip.sample_rate;
    clip = Resample(clip, target_rate);
    clip.resampled_from = from;
  }
  return clip;
}

std::vector<uint8_t> EncodeWav(const AudioClip& clip) {
  std::vector<uint8_t> out;
  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_bytes = n * 2;
  out.reserve(44 + data_bytes);
  for (char c : std::string("RIFF")) out.push_back(static_cast<uint8_t>(c));
  PutU32(&out, 36 + data_bytes);
  for (char c : std::string("WAVEfmt ")) out.push_back(static_cast<uint8_t>(c));
  PutU32(&out, 16);
  PutU16(&out, 1);
  PutU16(&out, 1);
  PutU32(&out, static_cast<uint32_t>(clip.sample_rate));
  PutU32(&out, static_cast<uint32_t>(clip.sample_rate) * 2);
  PutU16(&out, 2);
  PutU16(&out, 16);
  for (char c : std::string("data")) out.push_back(static_cast<uint8_t>(c));
  PutU32(&out, data_bytes);
  for (double s : clip.samples) {
    double v = std::clamp(s, -1.0, 1.0) * 32767.0;
    auto q = static_cast<int16_t>(std::lround(v));
    PutU16(&out, static_cast<uint16_t>(q));
  }
  return out;
}

void WriteWav(const std::string& path, const AudioClip& clip) {
  auto bytes = EncodeWav(clip);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write WAV '" + path + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

AudioClip Resample(const AudioClip& clip, int target_rate) {
  if (target_rate == clip.sample_rate) return clip;
  AudioClip out;
  out.sample_rate = target_rate;
  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const double cutoff = std::min(1.0, ratio);
  const int half_taps = 16;
  const double support = half_taps / cutoff;
  const auto n_out = static_cast<size_t>(std::floor(clip.samples.size() * ratio));
  out.samples.resize(n_out);
  const auto n_in = static_cast<int64_t>(clip.samples.size());
  for (size_t i = 0; i < n_out; ++i) {
    double center = static_cast<double>(i) / ratio;
    auto lo = static_cast<int64_t>(std::ceil(center - support));
    auto hi = static_cast<int64_t>(std::floor(center + support));
    double acc = 0.0;
    for (int64_t k = std::max<int64_t>(lo, 0); k <= std::min(hi, n_in - 1); ++k) {
      double x = (center - k) * cutoff;
      double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(M_PI * x) / (M_PI * x);
      double win = 0.5 + 0.5 * std::cos(M_PI * (center - k) / support);
      acc += clip.samples[static_cast<size_t>(k)] * sinc * win * cutoff;
    }
    out.samples[i] = std::clamp(acc, -1.0, 1.0);
  }
  return out;
}

AudioClip TrimSilence(const AudioClip& clip, double threshold_db, int frame_length, int hop) {
  const auto n = static_cast<int64_t>(clip.samples.size());
  const double threshold = std::pow(10.0, threshold_db / 20.0);
  int64_t first = -1;
  int64_t last = -1;
  for (int64_t start = 0; start < n; start += hop) {
    int64_t end = std::min(n, start + frame_length);
    double energy = 0.0;
    for (int64_t i = start; i < end; ++i) energy += clip.samples[i] * clip.samples[i];
    double rms = std::sqrt(energy / static_cast<double>(std::max<int64_t>(1, end - start)));
    if (rms >= threshold) {
      if (first < 0) first = start;
      last = end;
    }
  }
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.resampled_from = clip.resampled_from;
  if (first < 0) return out;
  out.samples.assign(clip.samples.begin() + first, clip.samples.begin() + last);
  return out;
}

double HzToMel(double hz) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (hz >= min_log_hz) return min_log_mel + std::log(hz / min_log_hz) / logstep;
  return hz / f_sp;
}

double MelToHz(double mel) {
  const double f_sp = 200.0 / 3.0;
  const double min_log_hz = 1000.0;
  const double min_log_mel = min_log_hz / f_sp;
  const double logstep = std::log(6.4) / 27.0;
  if (mel >= min_log_mel) return min_log_hz * std::exp(logstep * (mel - min_log_mel));
  return f_sp * mel;
}

std::vector<double> MelFilterbank(int sample_rate, int n_fft, int n_mels, double fmin,
                                  double fmax) {
  const int n_bins = n_fft / 2 + 1;
  std::vector<double> fft_freqs(n_bins);
  for (int k = 0; k < n_bins; ++k) fft_freqs[k] = static_cast<double>(k) * sample_rate / n_fft;
  const double mel_lo = HzToMel(fmin);
  const double mel_hi = HzToMel(fmax);
  std::vector<double> hz(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    hz[i] = MelToHz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  std::vector<double> fb(static_cast<size_t>(n_mels) * n_bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const double lower_w = hz[m + 1] - hz[m];
    const double upper_w = hz[m + 2] - hz[m + 1];
    const double enorm = 2.0 / (hz[m + 2] - hz[m]);
    for (int k = 0; k < n_bins; ++k) {
      double lower = (fft_freqs[k] - hz[m]) / lower_w;
      double upper = (hz[m + 2] - fft_freqs[k]) / upper_w;
      fb[static_cast<size_t>(m) * n_bins + k] = std::max(0.0, std::min(lower, upper)) * enorm;
    }
  }
  return fb;
}

std::vector<double> PaddedHannWindow(int win_length, int n_fft) {
  std::vector<double> w(n_fft, 0.0);
  const int offset = (n_fft - win_length) / 2;
  for (int i = 0; i < win_length; ++i) {
    w[offset + i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win_length);
  }
  return w;
}

int64_t ReflectIndex(int64_t i, int64_t n) {
  if (n == 1) return 0;
  const int64_t period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

MelExtractor::MelExtractor(const AudioConfig& cfg)
    : cfg_(cfg), n_fft_(cfg.FftSize()), hop_(cfg.HopLength()), n_bins_(cfg.FftSize() / 2 + 1) {
  window_ = PaddedHannWindow(cfg.WinLength(), n_fft_);
  filterbank_ = MelFilterbank(cfg.sample_rate, n_fft_, cfg.n_mels, cfg.fmin, cfg.fmax);
  std::lock_guard<std::mutex> lock(FftwPlannerMutex());
  std::vector<double> in(n_fft_);
  auto* out = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins_));
  plan_ = fftw_plan_dft_r2c_1d(n_fft_, in.data(), out, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(out);
}

MelExtractor::~MelExtractor() {
  std::lock_guard<std::mutex> lock(FftwPlannerMutex());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

MelSpectrogram MelExtractor::ComputeLinear(const AudioClip& clip) const {
  if (clip.sample_rate != cfg_.sample_rate) {
    throw Error("mel: clip rate " + std::to_string(clip.sample_rate) + " != configured " +
                std::to_string(cfg_.sample_rate));
  }
  const auto n = static_cast<int64_t>(clip.samples.size());
  if (n < hop_) throw Error("too short");
  const int frames = CenteredFrameCount(n, hop_);
  const int pad = n_fft_ / 2;
  MelSpectrogram mel;
  mel.frames = frames;
  mel.n_mels = cfg_.n_mels;
  mel.data.assign(static_cast<size_t>(frames) * cfg_.n_mels, 0.0);
  auto plan = static_cast<fftw_plan>(plan_);

#pragma omp parallel
  {
    std::vector<double> buf(n_fft_);
    std::vector<double> mag(n_bins_);
    auto* spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins_));
#pragma omp for schedule(static)
    for (int t = 0; t < frames; ++t) {
      const int64_t start = static_cast<int64_t>(t) * hop_ - pad;
      for (int i = 0; i < n_fft_; ++i) {
        buf[i] = clip.samples[static_cast<size_t>(ReflectIndex(start + i, n))] * window_[i];
      }
      fftw_execute_dft_r2c(plan, buf.data(), spec);
      for (int k = 0; k < n_bins_; ++k) mag[k] = std::hypot(spec[k][0], spec[k][1]);
      for (int m = 0; m < cfg_.n_mels; ++m) {
        const double* row = &filterbank_[static_cast<size_t>(m) * n_bins_];
        double acc = 0.0;
        for (int k = 0; k < n_bins_; ++k) acc += row[k] * mag[k];
        mel.data[static_cast<size_t>(t) * cfg_.n_mels + m] = acc;
      }
    }
    fftw_free(spec);
  }
  return mel;
}

MelSpectrogram MelExtractor::Compute(const AudioClip& clip) const {
  MelSpectrogram mel = ComputeLinear(clip);
  const double eps = cfg_.eps;
  for (double& v : mel.data) v = std::log(std::max(v, eps));
  return mel;
}

void WriteFeatureFile(const std::string& path, int rows, int cols, const std::vector<double>& data) {
  if (static_cast<size_t>(rows) * cols != data.size()) throw Error("feature shape mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write feature file '" + path + "'");
  uint8_t header[8];
  for (int i = 0; i < 4; ++i) {
    header[i] = static_cast<uint8_t>(static_cast<uint32_t>(rows) >> (8 * i));
    header[4 + i] = static_cast<uint8_t>(static_cast<uint32_t>(cols) >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(header), 8);
  std::vector<float> f(data.begin(), data.end());
  out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * 4));
}

std::vector<double> ReadFeatureFile(const std::string& path, int* rows, int* cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open feature file '" + path + "'");
  uint8_t header[8];
  in.read(reinterpret_cast<char*>(header), 8);
  if (in.gcount() != 8) throw Error("truncated feature file '" + path + "'");
  *rows = static_cast<int>(ReadU32(header));
  *cols = static_cast<int>(ReadU32(header + 4));
  std::vector<float> f(static_cast<size_t>(*rows) * *cols);
  in.read(reinterpret_cast<char*>(f.data()), static_cast<std::streamsize>(f.size() * 4));
  if (static_cast<size_t>(in.gcount()) != f.size() * 4) {
    throw Error("truncated feature file '" + path + "'");
  }
  return {f.begin(), f.end()};
}

}  // namespace comix::audio
