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

#include <algorithm>
#include <cctype>
#include <string>
#include <vector>

#include "crnn/error.hpp"

namespace crnn {

// Breakdown of one optimal edit alignment. S+I+D is the minimal edit
// distance; the split among the three is the substitution-first optimum.
struct EditStats {
  int substitutions = 0;
  int insertions = 0;
  int deletions = 0;
  int ref_len = 0;

  int distance() const { return substitutions + insertions + deletions; }
  double error_rate() const {
    return static_cast<double>(distance()) / static_cast<double>(ref_len);
  }
};

// Unit-cost Levenshtein distance with an S/I/D breakdown. Ties between
// alignments of equal cost are resolved preferring substitution, then
// deletion, then insertion.
template <typename Token>
EditStats levenshtein(const std::vector<Token>& ref,
                      const std::vector<Token>& hyp) {
  if (ref.empty()) throw DataError("levenshtein: empty reference");

  struct Cell {
    int cost;
    int sub, ins, del;
  };
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<Cell> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j)
    prev[j] = {static_cast<int>(j), 0, static_cast<int>(j), 0};

  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = {static_cast<int>(i), 0, 0, static_cast<int>(i)};
    for (std::size_t j = 1; j <= m; ++j) {
      const bool match = ref[i - 1] == hyp[j - 1];
      Cell diag = prev[j - 1];
      diag.cost += match ? 0 : 1;
      if (!match) diag.sub += 1;
      Cell del = prev[j];
      del.cost += 1;
      del.del += 1;
      Cell ins = cur[j - 1];
      ins.cost += 1;
      ins.ins += 1;

      Cell best = diag;
      if (del.cost < best.cost) best = del;
      if (ins.cost < best.cost) best = ins;
      cur[j] = best;
    }
    std::swap(prev, cur);
  }

  EditStats stats;
  stats.substitutions = prev[m].sub;
  stats.insertions = prev[m].ins;
  stats.deletions = prev[m].del;
  stats.ref_len = static_cast<int>(n);
  return stats;
}

inline std::string casefold(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

// Split on runs of whitespace, casefolding first.
inline std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : casefold(text)) {
    if (std::isspace(c)) {
      if (!cur.empty()) {
        words.push_back(cur);
        cur.clear();
      }
    } else {
      cur.push_back(static_cast<char>(c));
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

// Character tokens after casefolding and collapsing whitespace runs to a
// single space.
inline std::vector<char> tokenize_chars(const std::string& text) {
  std::vector<char> chars;
  bool pending_space = false;
  for (unsigned char c : casefold(text)) {
    if (std::isspace(c)) {
      if (!chars.empty()) pending_space = true;
    } else {
      if (pending_space) {
        chars.push_back(' ');
        pending_space = false;
      }
      chars.push_back(static_cast<char>(c));
    }
  }
  return chars;
}

inline EditStats word_edit_stats(const std::string& ref_text,
                                 const std::string& hyp_text) {
  return levenshtein(tokenize_words(ref_text), tokenize_words(hyp_text));
}

// (S+I+D) / |ref words|. May exceed 1 when the hypothesis inserts words.
inline double wer(const std::string& ref_text, const std::string& hyp_text) {
  return word_edit_stats(ref_text, hyp_text).error_rate();
}

inline double word_accuracy(const std::string& ref_text,
                            const std::string& hyp_text) {
  return 1.0 - wer(ref_text, hyp_text);
}

inline double cer(const std::string& ref_text, const std::string& hyp_text) {
  return levenshtein(tokenize_chars(ref_text), tokenize_chars(hyp_text))
      .error_rate();
}

// Corpus-level accumulation: total edits over total reference length.
class ErrorRateAccumulator {
 public:
  void add(const EditStats& stats) {
    edits_ += stats.distance();
    ref_len_ += stats.ref_len;
  }
  void add_words(const std::string& ref, const std::string& hyp) {
    add(word_edit_stats(ref, hyp));
  }
  void add_chars(const std::string& ref, const std::string& hyp) {
    add(levenshtein(tokenize_chars(ref), tokenize_chars(hyp)));
  }
  double rate() const {
    if (ref_len_ == 0) throw DataError("error rate over empty reference set");
    return static_cast<double>(edits_) / static_cast<double>(ref_len_);
  }
  long long reference_length() const { return ref_len_; }

 private:
  long long edits_ = 0;
  long long ref_len_ = 0;
};

}  // namespace crnn
