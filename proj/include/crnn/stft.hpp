// Copyright 2026 The crnn-asr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <vector>

#include "crnn/audio.hpp"
#include "crnn/common.hpp"
#include "crnn/error.hpp"

namespace crnn {

enum class Window { kHann, kRect };

// Short-time analysis configuration. The defaults (10 ms frames, 5 ms hop
// at 16 kHz) give frame_len/2 + 1 = 81 frequency bins, the network's
// input width.
struct StftConfig {
  int frame_len = 160;
  int hop = 80;
  Window window = Window::kHann;

  int bins() const { return frame_len / 2 + 1; }

  void validate() const {
    if (frame_len < 2) throw ConfigError("stft: frame_len must be >= 2");
    if (hop < 1 || hop > frame_len)
      throw ConfigError("stft: need 0 < hop <= frame_len");
  }
};

// Time-major log-magnitude spectrogram; row t is one analysis frame.
struct Spectrogram {
  Mat frames;  // T x bins

  int frame_count() const { return static_cast<int>(frames.rows()); }
  int bins() const { return static_cast<int>(frames.cols()); }
};

inline int stft_frame_count(std::size_t samples, const StftConfig& cfg) {
  if (samples < static_cast<std::size_t>(cfg.frame_len)) return 0;
  return static_cast<int>((samples - cfg.frame_len) / cfg.hop) + 1;
}

// Windowed DFT magnitudes compressed as log(1 + |X_k|), keeping bins
// 0..frame_len/2. Plain O(n^2) transform; frames are short and this is a
// one-time cost per utterance.
inline Spectrogram compute_spectrogram(const AudioClip& clip,
                                       const StftConfig& cfg = {}) {
  cfg.validate();
  const int n = cfg.frame_len;
  const int frames = stft_frame_count(clip.samples.size(), cfg);
  if (frames == 0)
    throw TooShortError("clip shorter than one analysis frame (" +
                        std::to_string(clip.samples.size()) + " < " +
                        std::to_string(n) + " samples)");

  std::vector<double> window(n);
  for (int i = 0; i < n; ++i) {
    window[i] = cfg.window == Window::kHann
                    ? 0.5 * (1.0 - std::cos(2.0 * M_PI * i / n))
                    : 1.0;
  }

  const int bins = cfg.bins();
  // Trig tables: twiddle[k][i] = e^{-2 pi i k n / N} split into cos/sin.
  Mat cos_tab(bins, n), sin_tab(bins, n);
  for (int k = 0; k < bins; ++k) {
    for (int i = 0; i < n; ++i) {
      const double angle = -2.0 * M_PI * k * i / n;
      cos_tab(k, i) = std::cos(angle);
      sin_tab(k, i) = std::sin(angle);
    }
  }

  Spectrogram spec;
  spec.frames.resize(frames, bins);
  Vec buf(n);
  for (int t = 0; t < frames; ++t) {
    const std::size_t off = static_cast<std::size_t>(t) * cfg.hop;
    for (int i = 0; i < n; ++i) buf[i] = window[i] * clip.samples[off + i];
    for (int k = 0; k < bins; ++k) {
      const double re = cos_tab.row(k).dot(buf);
      const double im = sin_tab.row(k).dot(buf);
      spec.frames(t, k) = std::log1p(std::sqrt(re * re + im * im));
    }
  }
  return spec;
}

// Per-bin statistics over a training corpus, used to whiten inputs.
struct NormStats {
  Vec mean;
  Vec stddev;  // clamped to >= 1e-8
};

inline NormStats fit_normalization_stats(const std::vector<Spectrogram>& specs) {
  if (specs.empty()) throw DataError("normalization: empty dataset");
  const int bins = specs.front().bins();
  long long total_frames = 0;
  Vec sum = Vec::Zero(bins), sum_sq = Vec::Zero(bins);
  for (const auto& s : specs) {
    if (s.bins() != bins)
      throw ContractError("normalization: inconsistent bin counts");
    total_frames += s.frame_count();
    sum += s.frames.colwise().sum().transpose();
    sum_sq += s.frames.array().square().matrix().colwise().sum().transpose();
  }
  if (total_frames < 2)
    throw DataError("normalization: need at least 2 frames total");

  NormStats stats;
  const double inv = 1.0 / static_cast<double>(total_frames);
  stats.mean = sum * inv;
  Vec var = sum_sq * inv - stats.mean.array().square().matrix();
  stats.stddev = var.array().max(0.0).sqrt().max(1e-8).matrix();
  return stats;
}

inline Spectrogram normalize(const Spectrogram& spec, const NormStats& stats) {
  if (spec.bins() != stats.mean.size())
    throw ContractError("normalize: bin count mismatch");
  Spectrogram out;
  out.frames = (spec.frames.rowwise() - stats.mean.transpose()).array().rowwise() /
               stats.stddev.transpose().array();
  return out;
}

}  // namespace crnn
