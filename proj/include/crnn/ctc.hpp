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
// Connectionist temporal classification: log-space forward/backward over
// the blank-extended label sequence, exact gradients over the input
// log-probabilities, and greedy best-path decoding.

#pragma once

#include <string>
#include <vector>

#include "crnn/alphabet.hpp"
#include "crnn/common.hpp"
#include "crnn/error.hpp"

namespace crnn {

// Fewest frames that admit any alignment: one per label plus one blank
// between each adjacent repeated pair.
inline int min_frames_for_labels(const std::vector<int>& labels) {
  int needed = static_cast<int>(labels.size());
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] == labels[i - 1]) ++needed;
  return needed;
}

// Forward/backward lattice over l' = blank-extended labels. alpha(t, s)
// and beta(t, s) both include the emission at t, so for every t
//   logsumexp_s(alpha(t,s) + beta(t,s) - log_probs(t, l'_s))
// equals the sequence log-likelihood.
struct CtcLattice {
  std::vector<int> extended_labels;  // length 2|l|+1
  Mat alpha;                         // T x (2|l|+1)
  Mat beta;                          // T x (2|l|+1)
  double log_likelihood = kLogZero;
};

inline CtcLattice ctc_lattice(const Mat& log_probs,
                              const std::vector<int>& labels,
                              int blank_index) {
  const int t_len = static_cast<int>(log_probs.rows());
  const int symbols = static_cast<int>(log_probs.cols());
  if (t_len < 1) throw ContractError("ctc: empty input");
  for (int l : labels) {
    if (l == blank_index)
      throw ContractError("ctc: labels must not contain the blank");
    if (l < 0 || l >= symbols)
      throw ContractError("ctc: label index out of range");
  }
  const int needed = min_frames_for_labels(labels);
  if (t_len < needed) {
    throw InfeasibleAlignmentError(
        "ctc: " + std::to_string(t_len) + " frames cannot align a label of " +
        std::to_string(labels.size()) + " symbols needing " +
        std::to_string(needed));
  }

  CtcLattice lat;
  const int ext_len = 2 * static_cast<int>(labels.size()) + 1;
  lat.extended_labels.resize(ext_len, blank_index);
  for (std::size_t i = 0; i < labels.size(); ++i)
    lat.extended_labels[2 * i + 1] = labels[i];
  const auto& ext = lat.extended_labels;

  lat.alpha = Mat::Constant(t_len, ext_len, kLogZero);
  lat.alpha(0, 0) = log_probs(0, blank_index);
  if (ext_len > 1) lat.alpha(0, 1) = log_probs(0, ext[1]);
  for (int t = 1; t < t_len; ++t) {
    for (int s = 0; s < ext_len; ++s) {
      double a = lat.alpha(t - 1, s);
      if (s >= 1) a = log_sum_exp(a, lat.alpha(t - 1, s - 1));
      if (s >= 2 && ext[s] != blank_index && ext[s] != ext[s - 2])
        a = log_sum_exp(a, lat.alpha(t - 1, s - 2));
      lat.alpha(t, s) = a == kLogZero ? kLogZero : a + log_probs(t, ext[s]);
    }
  }

  lat.beta = Mat::Constant(t_len, ext_len, kLogZero);
  lat.beta(t_len - 1, ext_len - 1) = log_probs(t_len - 1, ext[ext_len - 1]);
  if (ext_len > 1)
    lat.beta(t_len - 1, ext_len - 2) = log_probs(t_len - 1, ext[ext_len - 2]);
  for (int t = t_len - 2; t >= 0; --t) {
    for (int s = 0; s < ext_len; ++s) {
      double b = lat.beta(t + 1, s);
      if (s + 1 < ext_len) b = log_sum_exp(b, lat.beta(t + 1, s + 1));
      if (s + 2 < ext_len && ext[s + 2] != blank_index && ext[s + 2] != ext[s])
        b = log_sum_exp(b, lat.beta(t + 1, s + 2));
      lat.beta(t, s) = b == kLogZero ? kLogZero : b + log_probs(t, ext[s]);
    }
  }

  lat.log_likelihood = lat.alpha(t_len - 1, ext_len - 1);
  if (ext_len > 1)
    lat.log_likelihood =
        log_sum_exp(lat.log_likelihood, lat.alpha(t_len - 1, ext_len - 2));
  return lat;
}

// Loss -log p(labels | log_probs) and its exact gradient over the
// log-probability rows. The negated gradient row is the CTC posterior
// over symbols at that frame and sums to one.
inline std::pair<double, Mat> ctc_loss(const Mat& log_probs,
                                       const std::vector<int>& labels,
                                       int blank_index) {
  const CtcLattice lat = ctc_lattice(log_probs, labels, blank_index);
  if (lat.log_likelihood == kLogZero)
    throw NumericError("ctc: zero total path probability");

  const int t_len = static_cast<int>(log_probs.rows());
  const int symbols = static_cast<int>(log_probs.cols());
  const int ext_len = static_cast<int>(lat.extended_labels.size());

  Mat grad = Mat::Zero(t_len, symbols);
  std::vector<double> acc(symbols);
  for (int t = 0; t < t_len; ++t) {
    std::fill(acc.begin(), acc.end(), kLogZero);
    for (int s = 0; s < ext_len; ++s) {
      const double a = lat.alpha(t, s);
      const double b = lat.beta(t, s);
      if (a == kLogZero || b == kLogZero) continue;
      const int k = lat.extended_labels[s];
      acc[k] = log_sum_exp(acc[k], a + b - log_probs(t, k));
    }
    for (int k = 0; k < symbols; ++k) {
      if (acc[k] != kLogZero)
        grad(t, k) = -std::exp(acc[k] - lat.log_likelihood);
    }
  }
  return {-lat.log_likelihood, grad};
}

// Best path: per-frame argmax, collapse repeats, drop blanks.
inline std::vector<int> greedy_decode_indices(const Mat& log_probs,
                                              int blank_index) {
  std::vector<int> out;
  int prev = -1;
  for (int t = 0; t < log_probs.rows(); ++t) {
    int best = 0;
    log_probs.row(t).maxCoeff(&best);
    if (best != prev && best != blank_index) out.push_back(best);
    prev = best;
  }
  return out;
}

inline std::string greedy_decode(const Mat& log_probs,
                                 const Alphabet& alphabet) {
  return alphabet.decode(
      greedy_decode_indices(log_probs, alphabet.blank_index()));
}

}  // namespace crnn
