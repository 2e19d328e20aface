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
// The training loop: Nesterov SGD over shuffled CTC batches with per-epoch
// validation cost (the CFV), best-checkpoint tracking and full determinism
// for a given (config, corpus, seed).

#pragma once

#include <chrono>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "crnn/beam.hpp"
#include "crnn/common.hpp"
#include "crnn/ctc.hpp"
#include "crnn/dataset.hpp"
#include "crnn/error.hpp"
#include "crnn/metrics.hpp"
#include "crnn/model.hpp"
#include "crnn/optimizer.hpp"
#include "crnn/stft.hpp"

namespace crnn {

struct EpochRecord {
  int epoch = 0;          // 1-based
  double train_loss = 0;  // mean per-utterance CTC loss over the epoch
  double val_cfv = 0;     // mean per-utterance CTC loss on the dev split
  double wall_seconds = 0;  // informational; never written to result files
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
};

// Spectrograms computed once, whitened with train-split statistics, and
// transcripts encoded; shared by every experiment on the same corpus.
struct PreparedData {
  std::vector<Mat> train_features, dev_features, test_features;
  std::vector<std::vector<int>> train_labels, dev_labels, test_labels;
  std::vector<std::string> train_texts, dev_texts, test_texts;
  NormStats norm;
};

inline PreparedData prepare_data(const DatasetSplit& split,
                                 const StftConfig& stft,
                                 const Alphabet& alphabet) {
  PreparedData data;
  std::vector<Spectrogram> train_specs;
  for (const auto& utt : split.train)
    train_specs.push_back(compute_spectrogram(utt.audio, stft));
  data.norm = fit_normalization_stats(train_specs);

  const auto fill = [&](const std::vector<Utterance>& utts,
                        const std::vector<Spectrogram>* precomputed,
                        std::vector<Mat>& features,
                        std::vector<std::vector<int>>& labels,
                        std::vector<std::string>& texts) {
    for (std::size_t i = 0; i < utts.size(); ++i) {
      const Spectrogram spec = precomputed != nullptr
                                   ? (*precomputed)[i]
                                   : compute_spectrogram(utts[i].audio, stft);
      features.push_back(normalize(spec, data.norm).frames);
      labels.push_back(encode_transcript(utts[i].transcript, alphabet));
      texts.push_back(utts[i].transcript);
    }
  };
  fill(split.train, &train_specs, data.train_features, data.train_labels,
       data.train_texts);
  fill(split.dev, nullptr, data.dev_features, data.dev_labels,
       data.dev_texts);
  fill(split.test, nullptr, data.test_features, data.test_labels,
       data.test_texts);
  return data;
}

struct TrainResult {
  TrainHistory history;
  CrnnModel model;  // parameters after the final epoch
  Vec best_params;
  double best_cfv = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int skipped_utterances = 0;
  NesterovState optimizer;
  std::string dropout_rng_state;
};

// Indices of utterances whose labels can be aligned within their reduced
// frame count under this model configuration.
inline std::vector<int> feasible_indices(
    const CrnnConfig& config, const std::vector<Mat>& features,
    const std::vector<std::vector<int>>& labels, const char* split_name,
    int* skipped) {
  std::vector<int> keep;
  for (std::size_t i = 0; i < features.size(); ++i) {
    int reduced = 0;
    try {
      reduced = config.reduced_length(static_cast<int>(features[i].rows()));
    } catch (const TooShortError&) {
      reduced = 0;
    }
    if (reduced < min_frames_for_labels(labels[i])) {
      std::fprintf(stderr,
                   "[train] skipping %s utterance %zu: label of %zu cannot "
                   "align in %d reduced frames\n",
                   split_name, i, labels[i].size(), reduced);
      if (skipped != nullptr) ++*skipped;
      continue;
    }
    keep.push_back(static_cast<int>(i));
  }
  return keep;
}

inline double mean_ctc_loss(const CrnnModel& model,
                            const std::vector<Mat>& features,
                            const std::vector<std::vector<int>>& labels,
                            const std::vector<int>& indices, int blank) {
  if (indices.empty()) throw DataError("validation split is empty");
  double total = 0.0;
  Rng rng(0);  // inference path never consumes randomness
  for (int i : indices) {
    const Mat log_probs = crnn_forward(model, features[i], false, rng);
    total += ctc_loss(log_probs, labels[i], blank).first;
  }
  return total / static_cast<double>(indices.size());
}

inline TrainResult run_training(const CrnnConfig& config,
                                const PreparedData& data,
                                const TrainSchedule& schedule,
                                std::uint64_t seed, bool verbose = false) {
  config.validate();
  schedule.validate();
  const Alphabet& alphabet = default_alphabet();
  const int blank = alphabet.blank_index();

  TrainResult result;
  result.model = build_crnn(config, seed);
  Vec params = result.model.flatten_params();
  NesterovState state;

  const std::vector<int> train_idx =
      feasible_indices(config, data.train_features, data.train_labels,
                       "train", &result.skipped_utterances);
  const std::vector<int> dev_idx =
      feasible_indices(config, data.dev_features, data.dev_labels, "dev",
                       &result.skipped_utterances);
  if (train_idx.empty()) throw DataError("no trainable utterances remain");

  Rng dropout_rng(mix_seed(seed, 0xD209));

  for (int epoch = 1; epoch <= schedule.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();

    // Shuffled batch order, deterministic in (seed, epoch).
    std::vector<int> order = train_idx;
    Rng shuffle_rng(mix_seed(seed, 0x1000 + epoch));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    int items = 0;
    for (std::size_t start = 0; start < order.size();
         start += schedule.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + schedule.batch_size);
      Vec grads = Vec::Zero(params.size());
      int in_batch = 0;
      for (std::size_t k = start; k < end; ++k) {
        const int i = order[k];
        CrnnForwardCache cache;
        const Mat log_probs = crnn_forward(result.model, data.train_features[i],
                                           true, dropout_rng, &cache);
        const auto [loss, ctc_grad] =
            ctc_loss(log_probs, data.train_labels[i], blank);
        grads += crnn_backward(result.model, cache, ctc_grad);
        epoch_loss += loss;
        ++in_batch;
        ++items;
      }
      if (in_batch == 0) continue;
      grads /= static_cast<double>(in_batch);
      clip_gradients(grads, schedule.clip_norm);
      try {
        nesterov_step(params, grads, state, schedule.learning_rate,
                      schedule.momentum);
      } catch (const NumericError& e) {
        std::fprintf(stderr, "[train] %s\n", e.what());
        continue;  // step skipped, parameters unchanged
      }
      result.model.load_params(params);
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = items > 0 ? epoch_loss / items : 0.0;
    record.val_cfv = mean_ctc_loss(result.model, data.dev_features,
                                   data.dev_labels, dev_idx, blank);
    record.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                      epoch_start)
            .count();
    if (!std::isfinite(record.val_cfv) || !std::isfinite(record.train_loss))
      throw NumericError("training diverged at epoch " +
                         std::to_string(epoch) + " (non-finite CFV)");
    result.history.epochs.push_back(record);

    if (record.val_cfv < result.best_cfv) {
      result.best_cfv = record.val_cfv;
      result.best_epoch = epoch;
      result.best_params = params;
    }
    if (verbose) {
      std::fprintf(stderr,
                   "[train] epoch %3d  train %.4f  val CFV %.4f  (%.1fs)\n",
                   epoch, record.train_loss, record.val_cfv,
                   record.wall_seconds);
    }
  }

  result.optimizer = state;
  result.dropout_rng_state = dropout_rng.save_state();
  return result;
}

// ---------------------------------------------------------------------------
// Scoring a trained model on a split.

enum class DecoderKind { kGreedy, kBeam };

struct DecodeSettings {
  DecoderKind kind = DecoderKind::kGreedy;
  BeamOptions beam;
};

struct EvalScores {
  double wer = 0.0;
  double cer = 0.0;
  int utterances = 0;
};

inline std::string decode_features(const CrnnModel& model, const Mat& features,
                                   const DecodeSettings& settings,
                                   const Alphabet& alphabet) {
  Rng rng(0);
  const Mat log_probs = crnn_forward(model, features, false, rng);
  if (settings.kind == DecoderKind::kGreedy)
    return greedy_decode(log_probs, alphabet);
  return beam_decode(log_probs, settings.beam, alphabet);
}

inline EvalScores evaluate_model(const CrnnModel& model,
                                 const std::vector<Mat>& features,
                                 const std::vector<std::string>& texts,
                                 const DecodeSettings& settings = {}) {
  if (features.size() != texts.size())
    throw ContractError("evaluate: features/texts size mismatch");
  if (features.empty()) throw DataError("evaluate: empty split");
  const Alphabet& alphabet = default_alphabet();
  ErrorRateAccumulator words, chars;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const std::string hyp =
        decode_features(model, features[i], settings, alphabet);
    words.add_words(texts[i], hyp);
    chars.add_chars(texts[i], hyp);
  }
  EvalScores scores;
  scores.wer = words.rate();
  scores.cer = chars.rate();
  scores.utterances = static_cast<int>(features.size());
  return scores;
}

}  // namespace crnn
