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

#include <cctype>
#include <string>
#include <vector>

#include "crnn/error.hpp"

namespace crnn {

// The 30-symbol character target set: 26 letters, space, apostrophe,
// <UNK> and the CTC blank, in that order.
class Alphabet {
 public:
  static constexpr int kSize = 30;

  int size() const { return kSize; }
  int space_index() const { return 26; }
  int apostrophe_index() const { return 27; }
  int unk_index() const { return 28; }
  int blank_index() const { return 29; }

  // Maps a character to its symbol index; unknown characters map to
  // <UNK>. Uppercase letters are folded.
  int index_of(char c) const {
    const unsigned char u = static_cast<unsigned char>(c);
    const int folded = std::tolower(u);
    if (folded >= 'a' && folded <= 'z') return folded - 'a';
    if (folded == ' ') return space_index();
    if (folded == '\'') return apostrophe_index();
    return unk_index();
  }

  std::string symbol_text(int index) const {
    if (index >= 0 && index < 26) return std::string(1, static_cast<char>('a' + index));
    if (index == space_index()) return " ";
    if (index == apostrophe_index()) return "'";
    if (index == unk_index()) return "<UNK>";
    if (index == blank_index()) return "<blank>";
    throw ContractError("alphabet: index " + std::to_string(index) +
                        " out of range");
  }

  // Single printable character per symbol, for diff-friendly text formats.
  char code_char(int index) const {
    if (index >= 0 && index < 26) return static_cast<char>('a' + index);
    if (index == space_index()) return '_';
    if (index == apostrophe_index()) return '\'';
    if (index == unk_index()) return '#';
    if (index == blank_index()) return '%';
    throw ContractError("alphabet: index out of range");
  }

  int index_of_code_char(char c) const {
    if (c >= 'a' && c <= 'z') return c - 'a';
    if (c == '_') return space_index();
    if (c == '\'') return apostrophe_index();
    if (c == '#') return unk_index();
    if (c == '%') return blank_index();
    throw ParseError(std::string("alphabet: unknown code character '") + c +
                     "'");
  }

  std::string decode(const std::vector<int>& indices) const {
    std::string out;
    for (int i : indices) out += symbol_text(i);
    return out;
  }
};

inline const Alphabet& default_alphabet() {
  static const Alphabet alphabet;
  return alphabet;
}

}  // namespace crnn
