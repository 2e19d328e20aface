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
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "crnn/alphabet.hpp"
#include "crnn/error.hpp"

namespace crnn {

// Add-k smoothed character n-gram model over the 30-symbol alphabet,
// backing off to shorter contexts when a context was never observed.
// Contexts are stored as strings of printable symbol codes so the
// serialized form is directly readable.
class CharNGramLM {
 public:
  CharNGramLM() = default;

  static CharNGramLM train(const std::vector<std::string>& transcripts,
                           int order, double add_k,
                           const Alphabet& alphabet = default_alphabet()) {
    if (order < 1) throw ConfigError("lm: order must be >= 1");
    if (add_k <= 0.0) throw ConfigError("lm: add_k must be > 0");
    if (transcripts.empty()) throw DataError("lm: empty training corpus");

    // Raw counts per context length 0..order-1.
    std::map<std::string, std::array<long long, Alphabet::kSize>> counts;
    long long total_chars = 0;
    for (const std::string& text : transcripts) {
      std::string coded;
      coded.reserve(text.size());
      for (char c : text) coded.push_back(alphabet.code_char(alphabet.index_of(c)));
      total_chars += static_cast<long long>(coded.size());
      for (std::size_t i = 0; i < coded.size(); ++i) {
        const int next = alphabet.index_of_code_char(coded[i]);
        const int max_ctx = std::min<std::size_t>(order - 1, i);
        for (int len = 0; len <= max_ctx; ++len) {
          auto& row = counts[coded.substr(i - len, len)];
          row[next] += 1;
        }
      }
    }
    if (total_chars == 0) throw DataError("lm: corpus contains no characters");

    CharNGramLM lm;
    lm.order_ = order;
    for (const auto& [context, row] : counts) {
      long long total = 0;
      for (long long c : row) total += c;
      std::array<double, Alphabet::kSize>& probs = lm.table_[context];
      const double denom =
          static_cast<double>(total) + add_k * Alphabet::kSize;
      for (int k = 0; k < Alphabet::kSize; ++k)
        probs[k] = std::log((static_cast<double>(row[k]) + add_k) / denom);
    }
    return lm;
  }

  int order() const { return order_; }

  // log p(next | previous symbols); unseen contexts back off to their
  // longest observed suffix; the empty context always exists.
  double cond_log_prob(const std::vector<int>& previous, int next) const {
    if (order_ < 1) throw ContractError("lm: not trained");
    const Alphabet& alphabet = default_alphabet();
    const int ctx_len =
        std::min<std::size_t>(order_ - 1, previous.size());
    std::string context;
    for (int i = static_cast<int>(previous.size()) - ctx_len;
         i < static_cast<int>(previous.size()); ++i)
      context.push_back(alphabet.code_char(previous[i]));
    for (;;) {
      const auto it = table_.find(context);
      if (it != table_.end()) return it->second[next];
      if (context.empty())
        throw ContractError("lm: missing empty-context distribution");
      context.erase(context.begin());
    }
  }

  // Sum of conditional log-probabilities over the text; characters
  // outside the alphabet score as <UNK>. Empty text scores 0.
  double score(const std::string& text,
               const Alphabet& alphabet = default_alphabet()) const {
    std::vector<int> indices;
    indices.reserve(text.size());
    for (char c : text) indices.push_back(alphabet.index_of(c));
    double total = 0.0;
    std::vector<int> prefix;
    for (int idx : indices) {
      total += cond_log_prob(prefix, idx);
      prefix.push_back(idx);
    }
    return total;
  }

  // One line per (context, symbol, log-prob), tab separated and sorted;
  // doubles carry full precision so save/load round-trips scores exactly.
  void save(std::ostream& out) const {
    out << "# crnn char-ngram lm v1 order=" << order_ << "\n";
    std::vector<std::string> lines;
    char buf[64];
    for (const auto& [context, probs] : table_) {
      for (int k = 0; k < Alphabet::kSize; ++k) {
        std::snprintf(buf, sizeof buf, "%.17g", probs[k]);
        lines.push_back(context + '\t' +
                        default_alphabet().code_char(k) + '\t' + buf);
      }
    }
    std::sort(lines.begin(), lines.end());
    for (const auto& line : lines) out << line << "\n";
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("lm: cannot write " + path);
    save(out);
    if (!out) throw DataError("lm: short write to " + path);
  }

  static CharNGramLM load(std::istream& in) {
    std::string header;
    if (!std::getline(in, header)) throw ParseError("lm: empty file");
    CharNGramLM lm;
    const std::string tag = "order=";
    const auto pos = header.find(tag);
    if (header.rfind("# crnn char-ngram lm", 0) != 0 ||
        pos == std::string::npos)
      throw ParseError("lm: bad header line");
    lm.order_ = std::stoi(header.substr(pos + tag.size()));

    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto tab1 = line.find('\t');
      const auto tab2 = line.find('\t', tab1 + 1);
      if (tab1 == std::string::npos || tab2 == std::string::npos ||
          tab2 != tab1 + 2)
        throw ParseError("lm: malformed line: " + line);
      const std::string context = line.substr(0, tab1);
      const int sym = default_alphabet().index_of_code_char(line[tab1 + 1]);
      const double logp = std::stod(line.substr(tab2 + 1));
      auto [it, inserted] = lm.table_.try_emplace(context);
      if (inserted) it->second.fill(0.0);
      it->second[sym] = logp;
    }
    if (lm.table_.find("") == lm.table_.end())
      throw ParseError("lm: file lacks the empty-context distribution");
    return lm;
  }

  static CharNGramLM load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("lm: cannot open " + path);
    return load(in);
  }

  std::size_t context_count() const { return table_.size(); }

 private:
  int order_ = 0;
  std::map<std::string, std::array<double, Alphabet::kSize>> table_;
};

}  // namespace crnn
