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

#ifndef COMIX_AUDIO_H_
#define COMIX_AUDIO_H_

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "comix/config.h"

namespace comix::audio {

struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 22050;
  // Rate found in the file when LoadWav resampled it, else 0.
  int resampled_from = 0;

  double Duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  int64_t frames = 0;

  double Duration() const { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0; }
};

// Reads only the header; throws on non-WAV or corrupt files.
WavInfo ReadWavInfo(const std::string& path);

// Mono (channels averaged), samples in [-1, 1]. With target_rate > 0 and a
// different file rate the clip is resampled and `resampled_from` is set.
AudioClip LoadWav(const std::string& path, int target_rate = 0);

// 16-bit PCM mono; samples are clipped to [-1, 1].
void WriteWav(const std::string& path, const AudioClip& clip);
std::vector<uint8_t> EncodeWav(const AudioClip& clip);

// Windowed-sinc resampler.
AudioClip Resample(const AudioClip& clip, int target_rate);

// Strips leading/trailing audio whose short-time level stays below
// `threshold_db` relative to full scale.
AudioClip TrimSilence(const AudioClip& clip, double threshold_db, int frame_length, int hop);

// Log-compressed mel frames, row-major [frames x n_mels].
struct MelSpectrogram {
  int frames = 0;
  int n_mels = 0;
  std::vector<double> data;

  double& at(int t, int m) { return data[static_cast<size_t>(t) * n_mels + m]; }
  double at(int t, int m) const { return data[static_cast<size_t>(t) * n_mels + m]; }
};

// Mel scale conversions (Slaney: linear below 1 kHz, log above).
double HzToMel(double hz);
double MelToHz(double mel);

// Slaney-normalized triangular filters, row-major [n_mels x (n_fft/2+1)].
std::vector<double> MelFilterbank(int sample_rate, int n_fft, int n_mels, double fmin,
                                  double fmax);

// Periodic Hann window of `win_length`, zero-padded (centered) to `n_fft`.
std::vector<double> PaddedHannWindow(int win_length, int n_fft);

// Number of frames of a centered STFT.
inline int CenteredFrameCount(int64_t n_samples, int hop) {
  return 1 + static_cast<int>(n_samples / hop);
}

// Index into a signal of length n under numpy-style "reflect" padding.
int64_t ReflectIndex(int64_t i, int64_t n);

class MelExtractor {
 public:
  explicit MelExtractor(const AudioConfig& cfg);
  ~MelExtractor();
  MelExtractor(const MelExtractor&) = delete;
  MelExtractor& operator=(const MelExtractor&) = delete;

  // Throws "too short" for clips shorter than one hop and on a sample-rate
  // mismatch.
  MelSpectrogram Compute(const AudioClip& clip) const;

  // Linear mel energies before clamping and log, for tests.
  MelSpectrogram ComputeLinear(const AudioClip& clip) const;

  const AudioConfig& config() const { return cfg_; }
  const std::vector<double>& filterbank() const { return filterbank_; }
  const std::vector<double>& window() const { return window_; }

 private:
  AudioConfig cfg_;
  int n_fft_;
  int hop_;
  int n_bins_;
  std::vector<double> window_;
  std::vector<double> filterbank_;
  void* plan_ = nullptr;
};

// Feature cache: 8-byte header (uint32 rows, uint32 cols, little endian)
// followed by rows*cols float32 values, row-major.
void WriteFeatureFile(const std::string& path, int rows, int cols, const std::vector<double>& data);
std::vector<double> ReadFeatureFile(const std::string& path, int* rows, int* cols);

}  // namespace comix::audio

#endif  // COMIX_AUDIO_H_
