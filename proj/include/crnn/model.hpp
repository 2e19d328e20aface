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
// Model assembly: the CRNN acoustic model (conv embedding -> bidirectional
// GRU stack -> dense softmax), the single-window CSE classifier, parameter
// accounting and binary checkpoints.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "crnn/common.hpp"
#include "crnn/error.hpp"
#include "crnn/gradcheck.hpp"
#include "crnn/layers.hpp"
#include "crnn/optimizer.hpp"
#include "crnn/rng.hpp"
#include "crnn/stft.hpp"

namespace crnn {

// ---------------------------------------------------------------------------
// CRNN configuration and construction.

struct CrnnConfig {
  int filters = 200;
  int kernel = 11;
  int stride = 2;
  Padding padding = Padding::kValid;
  Activation cel_activation = Activation::kLinear;
  bool use_cel = true;
  int gru_layers = 4;
  int gru_hidden = 256;
  double dropout = 0.25;
  int input_bins = 81;
  int alphabet_size = 30;

  void validate() const {
    if (use_cel && (filters < 1 || kernel < 1 || stride < 1))
      throw ConfigError("model: filters, kernel, stride must be >= 1");
    if (gru_layers < 0) throw ConfigError("model: gru_layers must be >= 0");
    if (gru_layers > 0 && gru_hidden < 1)
      throw ConfigError("model: gru_hidden must be >= 1");
    if (dropout < 0.0 || dropout >= 1.0)
      throw ConfigError("model: dropout must be in [0, 1)");
    if (input_bins < 1 || alphabet_size < 2)
      throw ConfigError("model: bad input/output widths");
  }

  // Frames entering the GRU stack for an utterance of `frames` spectrogram
  // frames. Without the conv layer every frame is consumed directly.
  int reduced_length(int frames) const {
    return use_cel ? conv_output_length(frames, kernel, stride, padding)
                   : frames;
  }
};

struct CrnnModel {
  CrnnConfig config;
  ConvEmbeddingLayer cel;       // present iff config.use_cel
  std::vector<GruLayer> grus;
  DenseLayer dense;

  std::int64_t parameter_count() const {
    std::int64_t total = config.use_cel ? cel.parameter_count() : 0;
    for (const auto& gru : grus) total += gru.parameter_count();
    return total + dense.parameter_count();
  }

  // Per-layer breakdown, in flat-vector order.
  std::vector<std::pair<std::string, std::int64_t>> itemized_counts() const {
    std::vector<std::pair<std::string, std::int64_t>> items;
    if (config.use_cel) items.emplace_back("cel", cel.parameter_count());
    for (std::size_t i = 0; i < grus.size(); ++i)
      items.emplace_back("bigru" + std::to_string(i),
                         grus[i].parameter_count());
    items.emplace_back("dense", dense.parameter_count());
    return items;
  }

  Vec flatten_params() const {
    FlatWriter w;
    if (config.use_cel) {
      w.add(cel.weights);
      w.add(cel.bias);
    }
    for (const auto& gru : grus) {
      for (const GruDirection* d : {&gru.forward, &gru.backward}) {
        w.add(d->w_input);
        w.add(d->u_zr);
        w.add(d->u_c);
        w.add(d->bias);
      }
    }
    w.add(dense.weights);
    w.add(dense.bias);
    return w.take();
  }

  void load_params(const Vec& flat) {
    FlatReader r(flat);
    if (config.use_cel) {
      r.get(cel.weights);
      r.get(cel.bias);
    }
    for (auto& gru : grus) {
      for (GruDirection* d : {&gru.forward, &gru.backward}) {
        r.get(d->w_input);
        r.get(d->u_zr);
        r.get(d->u_c);
        r.get(d->bias);
      }
    }
    r.get(dense.weights);
    r.get(dense.bias);
    if (!r.exhausted())
      throw ContractError("model: flat parameter vector too long");
  }
};

// Wires input_bins -> [CEL] -> gru stack -> dense softmax. Deterministic
// for a given seed.
inline CrnnModel build_crnn(const CrnnConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0xC0DE));
  CrnnModel model;
  model.config = config;

  int width = config.input_bins;
  if (config.use_cel) {
    model.cel = make_conv_layer(config.filters, config.kernel,
                                config.input_bins, config.stride,
                                config.padding, config.cel_activation, rng);
    width = config.filters;
  }
  for (int i = 0; i < config.gru_layers; ++i) {
    model.grus.push_back(make_gru_layer(width, config.gru_hidden, rng));
    width = 2 * config.gru_hidden;
  }
  model.dense = make_dense_layer(width, config.alphabet_size, rng);
  return model;
}

// ---------------------------------------------------------------------------
// Forward / backward through the whole stack.

struct CrnnForwardCache {
  ConvCache conv;
  std::vector<GruCache> grus;
  std::vector<Mat> dropout_masks;  // one per GRU layer output
  DenseCache dense;
  bool training = false;
  int input_rows = 0;
};

// Input is a (possibly normalized) T x input_bins feature sequence;
// output is T' x alphabet_size log-probability rows (log-softmax).
inline Mat crnn_forward(const CrnnModel& model, const FeatureSeq& input,
                        bool training, Rng& rng,
                        CrnnForwardCache* cache = nullptr) {
  CrnnForwardCache local;
  CrnnForwardCache* c = cache != nullptr ? cache : &local;
  c->training = training;
  c->input_rows = static_cast<int>(input.rows());
  c->grus.resize(model.grus.size());
  c->dropout_masks.resize(model.grus.size());

  FeatureSeq h = model.config.use_cel
                     ? conv1d_forward(input, model.cel, &c->conv)
                     : input;
  for (std::size_t i = 0; i < model.grus.size(); ++i) {
    h = bigru_forward(h, model.grus[i], &c->grus[i]);
    h = dropout_apply(h, model.config.dropout, rng, training,
                      &c->dropout_masks[i]);
  }
  dense_softmax_forward(h, model.dense, &c->dense);
  return c->dense.log_probs;
}

// Full-chain gradients as a flat vector in the canonical parameter order.
// `grad_log_probs` is the loss gradient over the returned log-probability
// rows (e.g. from ctc_loss). With freeze_cel the conv entries are zeroed
// but keep their slots.
inline Vec crnn_backward(const CrnnModel& model, const CrnnForwardCache& cache,
                         const Mat& grad_log_probs, bool freeze_cel = false) {
  if (grad_log_probs.rows() != cache.dense.log_probs.rows() ||
      grad_log_probs.cols() != cache.dense.log_probs.cols())
    throw ContractError("crnn backward: gradient shape mismatch");

  const Mat grad_logits =
      logit_grad_from_logprob_grad(grad_log_probs, cache.dense.probs);
  DenseGrads dense_grads;
  Mat upstream = dense_backward(model.dense, cache.dense, grad_logits,
                                &dense_grads);

  std::vector<GruGrads> gru_grads(model.grus.size());
  for (int i = static_cast<int>(model.grus.size()) - 1; i >= 0; --i) {
    upstream = upstream.cwiseProduct(cache.dropout_masks[i]);
    upstream =
        bigru_backward(model.grus[i], cache.grus[i], upstream, &gru_grads[i]);
  }

  FlatWriter w;
  if (model.config.use_cel) {
    ConvGrads conv_grads;
    conv_grads.weights = Mat::Zero(model.cel.weights.rows(),
                                   model.cel.weights.cols());
    conv_grads.bias = Vec::Zero(model.cel.bias.size());
    if (!freeze_cel)
      conv1d_backward(model.cel, cache.conv, upstream, &conv_grads);
    w.add(conv_grads.weights);
    w.add(conv_grads.bias);
  }
  for (const auto& g : gru_grads) {
    for (const GruDirGrads* d : {&g.forward, &g.backward}) {
      w.add(d->w_input);
      w.add(d->u_zr);
      w.add(d->u_c);
      w.add(d->bias);
    }
  }
  w.add(dense_grads.weights);
  w.add(dense_grads.bias);
  return w.take();
}

inline std::int64_t count_params(const CrnnModel& model) {
  return model.parameter_count();
}

// ---------------------------------------------------------------------------
// CSE: a standalone single-window character classifier. The convolution
// kernel spans the whole study window, so one window yields one hidden
// vector; the conv weight matrix is the embedding matrix with one row per
// filter and window-frames * bins columns.

struct CseConfig {
  int study_window = 5;  // frames
  int filters = 64;
  int input_bins = 81;
  int output_size = 30;
  Activation activation = Activation::kLinear;

  void validate() const {
    if (study_window < 1 || filters < 1 || input_bins < 1 || output_size < 2)
      throw ConfigError("cse: all dimensions must be positive");
  }
};

struct CseModel {
  CseConfig config;
  ConvEmbeddingLayer conv;  // kernel == study_window, stride 1
  DenseLayer dense;

  std::int64_t parameter_count() const {
    return conv.parameter_count() + dense.parameter_count();
  }

  Vec flatten_params() const {
    FlatWriter w;
    w.add(conv.weights);
    w.add(conv.bias);
    w.add(dense.weights);
    w.add(dense.bias);
    return w.take();
  }

  void load_params(const Vec& flat) {
    FlatReader r(flat);
    r.get(conv.weights);
    r.get(conv.bias);
    r.get(dense.weights);
    r.get(dense.bias);
    if (!r.exhausted()) throw ContractError("cse: flat vector too long");
  }
};

inline CseModel build_cse(const CseConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(mix_seed(seed, 0x0C5E));
  CseModel model;
  model.config = config;
  model.conv =
      make_conv_layer(config.filters, config.study_window, config.input_bins,
                      1, Padding::kValid, config.activation, rng);
  model.dense = make_dense_layer(config.filters, config.output_size, rng);
  return model;
}

// The learned embedding table: filters x (study_window * bins).
inline const Mat& embedding_matrix(const CseModel& model) {
  return model.conv.weights;
}

struct CseForwardCache {
  ConvCache conv;
  DenseCache dense;
};

// One study window (exactly study_window x bins frames) to a probability
// distribution over the output classes.
inline Vec cse_forward(const CseModel& model, const FeatureSeq& window,
                       CseForwardCache* cache = nullptr) {
  if (static_cast<int>(window.rows()) < model.config.study_window)
    throw TooShortError("cse: window has fewer frames than the study window");
  if (static_cast<int>(window.rows()) != model.config.study_window)
    throw ContractError("cse: window must match the study window exactly");
  CseForwardCache local;
  CseForwardCache* c = cache != nullptr ? cache : &local;
  const FeatureSeq hidden = conv1d_forward(window, model.conv, &c->conv);
  const Mat probs = dense_softmax_forward(hidden, model.dense, &c->dense);
  return probs.row(0).transpose();
}

// Gradient of a scalar loss given its gradient over the logits row.
inline Vec cse_backward(const CseModel& model, const CseForwardCache& cache,
                        const Vec& grad_logits) {
  Mat grad_row = Mat::Zero(1, grad_logits.size());
  grad_row.row(0) = grad_logits.transpose();
  DenseGrads dense_grads;
  const Mat upstream =
      dense_backward(model.dense, cache.dense, grad_row, &dense_grads);
  ConvGrads conv_grads;
  conv1d_backward(model.conv, cache.conv, upstream, &conv_grads);
  FlatWriter w;
  w.add(conv_grads.weights);
  w.add(conv_grads.bias);
  w.add(dense_grads.weights);
  w.add(dense_grads.bias);
  return w.take();
}

// ---------------------------------------------------------------------------
// Config <-> key/value echo (stored inside checkpoints and CSVs).

inline std::string to_string(Activation a) {
  return a == Activation::kLinear ? "linear" : "relu";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + s + "'");
}

inline std::map<std::string, std::string> crnn_config_to_kv(
    const CrnnConfig& c) {
  char dropout[32];
  std::snprintf(dropout, sizeof dropout, "%.17g", c.dropout);
  return {
      {"model.filters", std::to_string(c.filters)},
      {"model.kernel", std::to_string(c.kernel)},
      {"model.stride", std::to_string(c.stride)},
      {"model.padding", to_string(c.padding)},
      {"model.cel_activation", to_string(c.cel_activation)},
      {"model.use_cel", c.use_cel ? "true" : "false"},
      {"model.gru_layers", std::to_string(c.gru_layers)},
      {"model.gru_hidden", std::to_string(c.gru_hidden)},
      {"model.dropout", dropout},
      {"model.input_bins", std::to_string(c.input_bins)},
      {"model.alphabet_size", std::to_string(c.alphabet_size)},
  };
}

inline CrnnConfig crnn_config_from_kv(
    const std::map<std::string, std::string>& kv) {
  CrnnConfig c;
  const auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw ConfigError("checkpoint config missing " + key);
    return it->second;
  };
  c.filters = std::stoi(get("model.filters"));
  c.kernel = std::stoi(get("model.kernel"));
  c.stride = std::stoi(get("model.stride"));
  c.padding = padding_from_string(get("model.padding"));
  c.cel_activation = activation_from_string(get("model.cel_activation"));
  c.use_cel = get("model.use_cel") == "true";
  c.gru_layers = std::stoi(get("model.gru_layers"));
  c.gru_hidden = std::stoi(get("model.gru_hidden"));
  c.dropout = std::stod(get("model.dropout"));
  c.input_bins = std::stoi(get("model.input_bins"));
  c.alphabet_size = std::stoi(get("model.alphabet_size"));
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoints. Binary, little-endian 64-bit reals, explicit section
// layout, version byte, trailing sentinel; loading a truncated or
// mismatched file fails rather than returning a half-read model.

struct Checkpoint {
  std::map<std::string, std::string> config_kv;
  Vec params;
  NesterovState optimizer;
  NormStats norm;  // empty vectors when absent
  int epoch = 0;
  std::string rng_state;
};

namespace ckpt_detail {

constexpr char kMagic[8] = {'C', 'R', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint32_t kSentinel = 0x444E4523;  // "#END"

inline void write_u32(std::ostream& out, std::uint32_t v) {
  char buf[4];
  for (int i = 0; i < 4; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 4);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline void write_f64(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, 8);
  write_u64(out, bits);
}

inline void write_vec(std::ostream& out, const Vec& v) {
  write_u64(out, static_cast<std::uint64_t>(v.size()));
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(v.size() * 8));
  } else {
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f64(out, v[i]);
  }
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw DataError("checkpoint: truncated file");
  return static_cast<std::uint32_t>(buf[0]) | (buf[1] << 8) | (buf[2] << 16) |
         (static_cast<std::uint32_t>(buf[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  in.read(reinterpret_cast<char*>(buf), 8);
  if (!in) throw DataError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | buf[i];
  return v;
}

inline double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double d;
  std::memcpy(&d, &bits, 8);
  return d;
}

inline Vec read_vec(std::istream& in) {
  const std::uint64_t n = read_u64(in);
  if (n > (1ULL << 32)) throw DataError("checkpoint: absurd vector length");
  Vec v(static_cast<Eigen::Index>(n));
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * 8));
    if (!in) throw DataError("checkpoint: truncated file");
  } else {
    for (std::uint64_t i = 0; i < n; ++i)
      v[static_cast<Eigen::Index>(i)] = read_f64(in);
  }
  return v;
}

inline std::string read_str(std::istream& in) {
  const std::uint32_t n = read_u32(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw DataError("checkpoint: truncated file");
  return s;
}

}  // namespace ckpt_detail

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  using namespace ckpt_detail;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path);

  out.write(kMagic, 8);
  out.put(static_cast<char>(kVersion));
  write_u32(out, static_cast<std::uint32_t>(ckpt.config_kv.size()));
  for (const auto& [key, value] : ckpt.config_kv) {
    write_str(out, key);
    write_str(out, value);
  }
  write_vec(out, ckpt.params);
  write_vec(out, ckpt.optimizer.velocity);
  write_u64(out, static_cast<std::uint64_t>(ckpt.optimizer.step_count));
  write_vec(out, ckpt.norm.mean);
  write_vec(out, ckpt.norm.stddev);
  write_u32(out, static_cast<std::uint32_t>(ckpt.epoch));
  write_str(out, ckpt.rng_state);
  write_u32(out, kSentinel);
  if (!out) throw DataError("checkpoint: short write to " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace ckpt_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path);

  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw DataError("checkpoint: bad magic in " + path);
  const int version = in.get();
  if (version != kVersion)
    throw DataError("checkpoint: unsupported version " +
                    std::to_string(version));

  Checkpoint ckpt;
  const std::uint32_t entries = read_u32(in);
  for (std::uint32_t i = 0; i < entries; ++i) {
    std::string key = read_str(in);
    std::string value = read_str(in);
    ckpt.config_kv.emplace(std::move(key), std::move(value));
  }
  ckpt.params = read_vec(in);
  ckpt.optimizer.velocity = read_vec(in);
  ckpt.optimizer.step_count = static_cast<long>(read_u64(in));
  ckpt.norm.mean = read_vec(in);
  ckpt.norm.stddev = read_vec(in);
  ckpt.epoch = static_cast<int>(read_u32(in));
  ckpt.rng_state = read_str(in);
  if (read_u32(in) != kSentinel)
    throw DataError("checkpoint: missing end sentinel (corrupt file?)");
  return ckpt;
}

// Rebuilds a model from a checkpoint's config echo and parameters.
inline CrnnModel model_from_checkpoint(const Checkpoint& ckpt) {
  CrnnModel model = build_crnn(crnn_config_from_kv(ckpt.config_kv), 0);
  if (model.parameter_count() != ckpt.params.size())
    throw DataError("checkpoint: parameter count mismatch");
  model.load_params(ckpt.params);
  return model;
}

}  // namespace crnn
