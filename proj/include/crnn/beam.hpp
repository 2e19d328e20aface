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
// Prefix beam search over CTC frame posteriors, tracking blank and
// non-blank probability mass per prefix, with optional shallow fusion of
// a character n-gram language model.

#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "crnn/alphabet.hpp"
#include "crnn/common.hpp"
#include "crnn/ctc.hpp"
#include "crnn/error.hpp"
#include "crnn/lm.hpp"

namespace crnn {

struct BeamHypothesis {
  std::vector<int> prefix;
  double log_p_blank = kLogZero;     // mass of paths ending in blank
  double log_p_nonblank = kLogZero;  // mass of paths ending in the last symbol
  double lm_log_prob = 0.0;

  double log_p_total() const { return log_sum_exp(log_p_blank, log_p_nonblank); }

  // Ranking score: log p_ctc + lm_weight * log p_lm + bonus * |prefix|.
  double score(double lm_weight, double insertion_bonus) const {
    return log_p_total() + lm_weight * lm_log_prob +
           insertion_bonus * static_cast<double>(prefix.size());
  }
};

struct BeamOptions {
  int beam_width = 16;
  double lm_weight = 0.0;       // alpha
  double insertion_bonus = 0.0; // beta
  const CharNGramLM* lm = nullptr;
};

inline std::vector<int> beam_decode_indices(const Mat& log_probs,
                                            const BeamOptions& opts,
                                            const Alphabet& alphabet) {
  if (opts.beam_width < 1)
    throw ConfigError("beam: beam_width must be >= 1");
  if (opts.lm_weight < 0.0 || opts.insertion_bonus < 0.0)
    throw ConfigError("beam: lm_weight and insertion_bonus must be >= 0");
  if (static_cast<int>(log_probs.cols()) != alphabet.size())
    throw ContractError("beam: log-prob width != alphabet size");
  const int blank = alphabet.blank_index();

  std::map<std::vector<int>, BeamHypothesis> beams;
  BeamHypothesis root;
  root.log_p_blank = 0.0;  // empty path, probability one
  beams.emplace(root.prefix, root);

  for (int t = 0; t < log_probs.rows(); ++t) {
    std::map<std::vector<int>, BeamHypothesis> next;

    const auto reach = [&](const std::vector<int>& prefix,
                           double lm_log_prob) -> BeamHypothesis& {
      auto [it, inserted] = next.try_emplace(prefix);
      if (inserted) {
        it->second.prefix = prefix;
        it->second.lm_log_prob = lm_log_prob;
      }
      return it->second;
    };

    for (const auto& [prefix, hyp] : beams) {
      const double total = hyp.log_p_total();
      if (total == kLogZero) continue;

      // Stay on this prefix: emit blank, or repeat its last symbol.
      BeamHypothesis& same = reach(prefix, hyp.lm_log_prob);
      same.log_p_blank =
          log_sum_exp(same.log_p_blank, log_probs(t, blank) + total);
      if (!prefix.empty()) {
        same.log_p_nonblank =
            log_sum_exp(same.log_p_nonblank,
                        log_probs(t, prefix.back()) + hyp.log_p_nonblank);
      }

      // Extend with each non-blank symbol.
      for (int sym = 0; sym < alphabet.size(); ++sym) {
        if (sym == blank) continue;
        const double emit = log_probs(t, sym);
        if (emit == kLogZero) continue;
        // A repeated symbol needs an intervening blank; mass ending in the
        // same symbol collapses instead of extending.
        const double source = (!prefix.empty() && sym == prefix.back())
                                  ? hyp.log_p_blank
                                  : total;
        if (source == kLogZero) continue;

        std::vector<int> extended = prefix;
        extended.push_back(sym);
        double lm_log_prob = hyp.lm_log_prob;
        if (opts.lm != nullptr)
          lm_log_prob += opts.lm->cond_log_prob(prefix, sym);
        BeamHypothesis& ext = reach(extended, lm_log_prob);
        ext.log_p_nonblank = log_sum_exp(ext.log_p_nonblank, emit + source);
      }
    }

    // Keep the best beam_width prefixes; ties resolve lexicographically
    // via the stable prefix ordering of std::map.
    std::vector<BeamHypothesis> ranked;
    ranked.reserve(next.size());
    for (auto& [prefix, hyp] : next) {
      if (hyp.log_p_total() != kLogZero) ranked.push_back(std::move(hyp));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [&](const BeamHypothesis& a, const BeamHypothesis& b) {
                       return a.score(opts.lm_weight, opts.insertion_bonus) >
                              b.score(opts.lm_weight, opts.insertion_bonus);
                     });
    if (static_cast<int>(ranked.size()) > opts.beam_width)
      ranked.resize(opts.beam_width);

    beams.clear();
    for (auto& hyp : ranked) beams.emplace(hyp.prefix, std::move(hyp));
    if (beams.empty())
      throw NumericError("beam: all hypotheses have zero probability");
  }

  const BeamHypothesis* best = nullptr;
  for (const auto& [prefix, hyp] : beams) {
    if (best == nullptr ||
        hyp.score(opts.lm_weight, opts.insertion_bonus) >
            best->score(opts.lm_weight, opts.insertion_bonus))
      best = &hyp;
  }
  return best->prefix;
}

inline std::string beam_decode(const Mat& log_probs, const BeamOptions& opts,
                               const Alphabet& alphabet = default_alphabet()) {
  return alphabet.decode(beam_decode_indices(log_probs, opts, alphabet));
}

}  // namespace crnn
