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
// Key/value configuration files: one `key = value` per line, `#` starts a
// comment. Keys are dotted (model.filters, train.lr, synth.count, ...).

#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "crnn/dataset.hpp"
#include "crnn/error.hpp"
#include "crnn/model.hpp"
#include "crnn/optimizer.hpp"
#include "crnn/stft.hpp"

namespace crnn {

class Config {
 public:
  Config() = default;

  static Config parse(std::istream& in, const std::string& origin = "<config>") {
    Config config;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": expected key = value");
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(line_no) +
                          ": empty key");
      config.entries_[key] = value;
    }
    return config;
  }

  static Config load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse(in, path);
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
  }

  int get_int(const std::string& key, int fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      std::size_t used = 0;
      const int v = std::stoi(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": '" + it->second +
                        "' is not an integer");
    }
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key " + key + ": '" + it->second +
                        "' is not a number");
    }
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    throw ConfigError("config key " + key + ": '" + it->second +
                      "' is not a boolean");
  }

  void set(const std::string& key, const std::string& value) {
    entries_[key] = value;
  }

  const std::map<std::string, std::string>& entries() const { return entries_; }

  // Rejects keys outside the known schema so typos fail loudly.
  void validate_keys(const std::set<std::string>& known) const {
    for (const auto& [key, value] : entries_) {
      if (known.count(key) == 0)
        throw ConfigError("unknown config key '" + key + "'");
    }
  }

 private:
  static std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
  }

  std::map<std::string, std::string> entries_;
};

// The full schema understood by the tools.
inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "model.filters", "model.kernel", "model.stride", "model.padding",
      "model.cel_activation", "model.use_cel", "model.gru_layers",
      "model.gru_hidden", "model.dropout", "model.input_bins",
      "model.alphabet_size",
      "train.lr", "train.momentum", "train.clip_norm", "train.epochs",
      "train.batch_size",
      "stft.frame_len", "stft.hop", "stft.window",
      "split.train_parts", "split.dev_parts", "split.test_parts",
      "synth.count", "synth.min_chars", "synth.max_chars",
      "synth.char_duration_ms", "synth.noise_amplitude",
      "synth.space_probability", "synth.sample_rate_hz",
      "decode.beam_width", "decode.lm_order", "decode.lm_add_k",
      "decode.lm_weight", "decode.insertion_bonus",
  };
  return keys;
}

inline CrnnConfig crnn_config_from(const Config& config) {
  CrnnConfig c;
  c.filters = config.get_int("model.filters", c.filters);
  c.kernel = config.get_int("model.kernel", c.kernel);
  c.stride = config.get_int("model.stride", c.stride);
  c.padding =
      padding_from_string(config.get_string("model.padding", "valid"));
  c.cel_activation = activation_from_string(
      config.get_string("model.cel_activation", "linear"));
  c.use_cel = config.get_bool("model.use_cel", c.use_cel);
  c.gru_layers = config.get_int("model.gru_layers", c.gru_layers);
  c.gru_hidden = config.get_int("model.gru_hidden", c.gru_hidden);
  c.dropout = config.get_double("model.dropout", c.dropout);
  c.input_bins = config.get_int("model.input_bins", c.input_bins);
  c.alphabet_size = config.get_int("model.alphabet_size", c.alphabet_size);
  c.validate();
  return c;
}

inline TrainSchedule schedule_from(const Config& config) {
  TrainSchedule s;
  s.learning_rate = config.get_double("train.lr", s.learning_rate);
  s.momentum = config.get_double("train.momentum", s.momentum);
  s.clip_norm = config.get_double("train.clip_norm", s.clip_norm);
  s.epochs = config.get_int("train.epochs", s.epochs);
  s.batch_size = config.get_int("train.batch_size", s.batch_size);
  s.validate();
  return s;
}

inline StftConfig stft_config_from(const Config& config) {
  StftConfig s;
  s.frame_len = config.get_int("stft.frame_len", s.frame_len);
  s.hop = config.get_int("stft.hop", s.hop);
  const std::string window = config.get_string("stft.window", "hann");
  if (window == "hann")
    s.window = Window::kHann;
  else if (window == "rect")
    s.window = Window::kRect;
  else
    throw ConfigError("unknown stft.window '" + window + "'");
  s.validate();
  return s;
}

inline SynthSpec synth_spec_from(const Config& config, std::uint64_t seed) {
  SynthSpec s;
  s.count = config.get_int("synth.count", s.count);
  s.min_chars = config.get_int("synth.min_chars", s.min_chars);
  s.max_chars = config.get_int("synth.max_chars", s.max_chars);
  s.char_duration_ms =
      config.get_int("synth.char_duration_ms", s.char_duration_ms);
  s.noise_amplitude =
      config.get_double("synth.noise_amplitude", s.noise_amplitude);
  s.space_probability =
      config.get_double("synth.space_probability", s.space_probability);
  s.sample_rate_hz = config.get_int("synth.sample_rate_hz", s.sample_rate_hz);
  s.seed = seed;
  s.validate();
  return s;
}

inline SplitSpec split_spec_from(const Config& config, std::uint64_t seed) {
  SplitSpec s;
  s.train_parts = config.get_int("split.train_parts", s.train_parts);
  s.dev_parts = config.get_int("split.dev_parts", s.dev_parts);
  s.test_parts = config.get_int("split.test_parts", s.test_parts);
  s.seed = seed;
  s.validate();
  return s;
}

}  // namespace crnn
