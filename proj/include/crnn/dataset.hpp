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
//
// Corpus handling: manifest ingestion, transcript encoding, 8:1:1
// splitting, padded batching and a synthetic two-tone corpus that stands
// in for real speech at desk scale.

#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "crnn/alphabet.hpp"
#include "crnn/audio.hpp"
#include "crnn/common.hpp"
#include "crnn/ctc.hpp"
#include "crnn/error.hpp"
#include "crnn/rng.hpp"
#include "crnn/stft.hpp"

namespace crnn {

struct Utterance {
  AudioClip audio;
  std::string transcript;
};

// ---------------------------------------------------------------------------
// Transcript encoding.

// Casefolds and maps every character: letters, space and apostrophe to
// their symbol indices, anything else to <UNK>. Blank is never produced.
inline std::vector<int> encode_transcript(const std::string& text,
                                          const Alphabet& alphabet) {
  std::vector<int> indices;
  indices.reserve(text.size());
  for (char c : text) indices.push_back(alphabet.index_of(c));
  if (indices.empty())
    throw DataError("transcript encodes to an empty label sequence");
  return indices;
}

// ---------------------------------------------------------------------------
// Manifest: one "wav-path<TAB>transcript" record per line, UTF-8. Relative
// wav paths resolve against the manifest's directory.

inline std::vector<Utterance> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path);
  const std::filesystem::path base =
      std::filesystem::path(path).parent_path();

  std::vector<Utterance> utterances;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": expected wav-path<TAB>transcript");
    std::filesystem::path wav = line.substr(0, tab);
    if (wav.is_relative()) wav = base / wav;
    Utterance utt;
    utt.audio = read_wav(wav.string());
    utt.transcript = line.substr(tab + 1);
    if (utt.transcript.find_first_not_of(" \t\r\n") == std::string::npos)
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": empty transcript");
    utterances.push_back(std::move(utt));
  }
  return utterances;
}

inline void write_manifest(
    const std::string& path,
    const std::vector<std::pair<std::string, std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path);
  for (const auto& [wav, transcript] : rows)
    out << wav << '\t' << transcript << "\n";
}

// ---------------------------------------------------------------------------
// 8:1:1 split.

struct SplitSpec {
  int train_parts = 8;
  int dev_parts = 1;
  int test_parts = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (train_parts < 1 || dev_parts < 0 || test_parts < 0)
      throw ConfigError("split: parts must be positive");
  }
  int total_parts() const { return train_parts + dev_parts + test_parts; }
};

struct DatasetSplit {
  std::vector<Utterance> train, dev, test;
};

// Seeded shuffle, then dev and test take floor(n * part / total) items
// each and train keeps the remainder.
inline DatasetSplit split_dataset(std::vector<Utterance> utterances,
                                  const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = utterances.size();
  if (n < static_cast<std::size_t>(spec.total_parts()))
    throw DataError("split: need at least " +
                    std::to_string(spec.total_parts()) + " utterances, got " +
                    std::to_string(n));
  Rng rng(mix_seed(spec.seed, 0x5917));
  rng.shuffle(utterances);

  const std::size_t n_dev = n * spec.dev_parts / spec.total_parts();
  const std::size_t n_test = n * spec.test_parts / spec.total_parts();
  DatasetSplit split;
  split.dev.assign(utterances.begin(), utterances.begin() + n_dev);
  split.test.assign(utterances.begin() + n_dev,
                    utterances.begin() + n_dev + n_test);
  split.train.assign(utterances.begin() + n_dev + n_test, utterances.end());
  return split;
}

// ---------------------------------------------------------------------------
// Batching.

struct Batch {
  std::vector<Mat> features;        // each padded to T_max x bins with zeros
  std::vector<int> frame_lengths;   // true frame counts
  std::vector<std::vector<int>> labels;
  std::vector<int> label_lengths;
  int max_frames = 0;

  int size() const { return static_cast<int>(features.size()); }
};

// Maps spectrogram frame count to the frame count seen by the CTC loss
// (after any convolution striding); identity by default.
using FrameReduction = std::function<int(int)>;

// Batches precomputed feature sequences. Utterances whose label cannot be
// aligned within their (reduced) frame count are skipped with a warning.
inline std::vector<Batch> make_batches_from_features(
    const std::vector<Mat>& features,
    const std::vector<std::vector<int>>& labels, int batch_size,
    std::uint64_t shuffle_seed, const FrameReduction& reduce_frames = {},
    int* skipped = nullptr) {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (features.size() != labels.size())
    throw ContractError("batching: features/labels size mismatch");

  std::vector<int> order;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const int frames = static_cast<int>(features[i].rows());
    int reduced = frames;
    if (reduce_frames) {
      try {
        reduced = reduce_frames(frames);
      } catch (const TooShortError&) {
        reduced = 0;
      }
    }
    if (reduced < min_frames_for_labels(labels[i])) {
      std::fprintf(stderr,
                   "[data] skipping utterance %zu: %d reduced frames cannot "
                   "align %zu labels\n",
                   i, reduced, labels[i].size());
      if (skipped != nullptr) ++*skipped;
      continue;
    }
    order.push_back(static_cast<int>(i));
  }

  Rng rng(mix_seed(shuffle_seed, 0xBA7C4));
  rng.shuffle(order);

  std::vector<Batch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    Batch batch;
    int t_max = 0;
    for (std::size_t i = start; i < end; ++i)
      t_max = std::max(t_max, static_cast<int>(features[order[i]].rows()));
    batch.max_frames = t_max;
    for (std::size_t i = start; i < end; ++i) {
      const Mat& feat = features[order[i]];
      Mat padded = Mat::Zero(t_max, feat.cols());
      padded.topRows(feat.rows()) = feat;
      batch.features.push_back(std::move(padded));
      batch.frame_lengths.push_back(static_cast<int>(feat.rows()));
      batch.labels.push_back(labels[order[i]]);
      batch.label_lengths.push_back(static_cast<int>(labels[order[i]].size()));
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

// Spec-level convenience: computes spectrograms through the frontend
// configuration, then batches.
inline std::vector<Batch> make_batches(const std::vector<Utterance>& utts,
                                       const StftConfig& stft, int batch_size,
                                       std::uint64_t shuffle_seed,
                                       const Alphabet& alphabet,
                                       const FrameReduction& reduce_frames = {},
                                       int* skipped = nullptr) {
  std::vector<Mat> features;
  std::vector<std::vector<int>> labels;
  for (const auto& utt : utts) {
    features.push_back(compute_spectrogram(utt.audio, stft).frames);
    labels.push_back(encode_transcript(utt.transcript, alphabet));
  }
  return make_batches_from_features(features, labels, batch_size,
                                    shuffle_seed, reduce_frames, skipped);
}

// ---------------------------------------------------------------------------
// Synthetic two-tone corpus. Every non-blank symbol owns a distinct pair
// of tone frequencies on exact 100 Hz bin centers; an utterance is the
// concatenation of per-character segments plus Gaussian noise.

struct SynthSpec {
  int count = 300;
  int min_chars = 3;
  int max_chars = 8;
  int char_duration_ms = 100;
  double noise_amplitude = 0.05;
  double space_probability = 0.15;
  int sample_rate_hz = 16000;
  std::uint64_t seed = 0;

  void validate() const {
    if (count < 1) throw ConfigError("synth: count must be >= 1");
    if (min_chars < 1 || max_chars < min_chars)
      throw ConfigError("synth: need 1 <= min_chars <= max_chars");
    if (char_duration_ms < 10)
      throw ConfigError("synth: char_duration_ms must be >= 10");
    if (noise_amplitude < 0.0)
      throw ConfigError("synth: noise_amplitude must be >= 0");
    if (space_probability < 0.0 || space_probability >= 1.0)
      throw ConfigError("synth: space_probability must be in [0, 1)");
    if (sample_rate_hz <= 2 * 5400)
      throw ConfigError("synth: sample rate puts tones above Nyquist");
  }
};

// (low, high) tone frequencies in Hz for a non-blank symbol index. Six
// low slots crossed with five high slots give every symbol a unique pair
// on exact bin centers, spaced one empty bin apart so neighbouring
// symbols stay spectrally confusable under window leakage and noise.
inline std::pair<double, double> synth_tone_pair(int symbol_index) {
  if (symbol_index < 0 || symbol_index >= 29)
    throw ContractError("synth: no tone pair for symbol " +
                        std::to_string(symbol_index));
  const double low = 300.0 + 200.0 * (symbol_index % 6);
  const double high = 3000.0 + 200.0 * (symbol_index / 6);
  return {low, high};
}

// Audio for one character: two tones with per-segment random phase and
// amplitude jitter, meant to mimic speaker variation. `gain` scales the
// tones (not the channel noise) and is drawn once per utterance.
inline void synth_append_character(std::vector<double>& samples, int symbol,
                                   const SynthSpec& spec, Rng& rng,
                                   double gain = 1.0) {
  const auto [low, high] = synth_tone_pair(symbol);
  const int n = spec.char_duration_ms * spec.sample_rate_hz / 1000;
  const double amp_low = 0.3 * gain * rng.uniform(0.85, 1.15);
  const double amp_high = 0.3 * gain * rng.uniform(0.85, 1.15);
  const double phase_low = rng.uniform(0.0, 2.0 * M_PI);
  const double phase_high = rng.uniform(0.0, 2.0 * M_PI);
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / spec.sample_rate_hz;
    double s = amp_low * std::sin(2.0 * M_PI * low * t + phase_low) +
               amp_high * std::sin(2.0 * M_PI * high * t + phase_high);
    s += spec.noise_amplitude * rng.gaussian();
    samples.push_back(std::clamp(s, -1.0, 1.0));
  }
}

inline std::string synth_random_text(const SynthSpec& spec, Rng& rng) {
  const int len =
      spec.min_chars +
      static_cast<int>(rng.below(spec.max_chars - spec.min_chars + 1));
  std::string text;
  for (int i = 0; i < len; ++i) {
    const bool space_allowed =
        i > 0 && i + 1 < len && !text.empty() && text.back() != ' ';
    if (space_allowed && rng.uniform() < spec.space_probability)
      text.push_back(' ');
    else
      text.push_back(static_cast<char>('a' + rng.below(26)));
  }
  return text;
}

inline std::vector<Utterance> generate_synthetic(const SynthSpec& spec) {
  spec.validate();
  const Alphabet& alphabet = default_alphabet();
  Rng rng(mix_seed(spec.seed, 0x707E5));
  std::vector<Utterance> utterances;
  utterances.reserve(spec.count);
  for (int u = 0; u < spec.count; ++u) {
    Utterance utt;
    utt.transcript = synth_random_text(spec, rng);
    utt.audio.sample_rate_hz = spec.sample_rate_hz;
    utt.audio.samples.reserve(utt.transcript.size() *
                              spec.char_duration_ms * spec.sample_rate_hz /
                              1000);
    for (char c : utt.transcript)
      synth_append_character(utt.audio.samples, alphabet.index_of(c), spec,
                             rng);
    utterances.push_back(std::move(utt));
  }
  return utterances;
}

}  // namespace crnn
