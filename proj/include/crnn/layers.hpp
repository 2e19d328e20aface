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
// Differentiable building blocks: 1-D convolutional embedding over
// spectrogram frames, bidirectional GRU, dense+softmax readout and
// inverted dropout. Every backward pass here is hand-derived; see
// gradcheck.hpp for the finite-difference harness that keeps them honest.

#pragma once

#include <cmath>
#include <string>

#include "crnn/common.hpp"
#include "crnn/error.hpp"
#include "crnn/rng.hpp"

namespace crnn {

enum class Padding { kValid, kSame };
enum class Activation { kLinear, kRelu };

inline std::string to_string(Padding p) {
  return p == Padding::kValid ? "valid" : "same";
}

inline Padding padding_from_string(const std::string& s) {
  if (s == "valid") return Padding::kValid;
  if (s == "same") return Padding::kSame;
  throw ConfigError("unknown padding mode '" + s + "'");
}

// ---------------------------------------------------------------------------
// Convolutional embedding layer.
//
// One application of a filter spans `kernel` consecutive frames of all
// `input_bins` bins; the weight matrix therefore has one row per filter
// and kernel*input_bins columns. That matrix, read row by row, is the
// embedding table this layer learns: its depth equals the filter count.

struct ConvEmbeddingLayer {
  Mat weights;  // filters x (kernel * input_bins)
  Vec bias;     // filters
  int kernel = 11;
  int stride = 2;
  int input_bins = 81;
  Padding padding = Padding::kValid;
  Activation activation = Activation::kLinear;

  int filters() const { return static_cast<int>(weights.rows()); }
  std::int64_t parameter_count() const {
    return static_cast<std::int64_t>(weights.size()) + bias.size();
  }
};

inline int conv_output_length(int input_len, int kernel, int stride,
                              Padding padding) {
  if (padding == Padding::kSame) return (input_len + stride - 1) / stride;
  if (input_len < kernel) {
    throw TooShortError("conv: input of " + std::to_string(input_len) +
                        " frames is shorter than kernel " +
                        std::to_string(kernel));
  }
  return (input_len - kernel) / stride + 1;
}

struct ConvCache {
  Mat patches;         // T' x (kernel * bins)
  Mat pre_activation;  // T' x filters
  int input_rows = 0;
  int left_pad = 0;
};

struct ConvGrads {
  Mat weights;
  Vec bias;
};

inline FeatureSeq conv1d_forward(const FeatureSeq& input,
                                 const ConvEmbeddingLayer& layer,
                                 ConvCache* cache = nullptr) {
  const int t_in = static_cast<int>(input.rows());
  const int bins = layer.input_bins;
  const int kernel = layer.kernel;
  if (static_cast<int>(input.cols()) != bins)
    throw ContractError("conv: input width " + std::to_string(input.cols()) +
                        " != configured bins " + std::to_string(bins));

  const int t_out = conv_output_length(t_in, kernel, layer.stride, layer.padding);
  int left_pad = 0;
  if (layer.padding == Padding::kSame) {
    const int total =
        std::max(0, (t_out - 1) * layer.stride + kernel - t_in);
    left_pad = total / 2;
  }

  Mat patches(t_out, kernel * bins);
  for (int t = 0; t < t_out; ++t) {
    const int start = t * layer.stride - left_pad;
    for (int k = 0; k < kernel; ++k) {
      const int row = start + k;
      if (row < 0 || row >= t_in) {
        patches.row(t).segment(k * bins, bins).setZero();
      } else {
        patches.row(t).segment(k * bins, bins) = input.row(row);
      }
    }
  }

  Mat pre = patches * layer.weights.transpose();
  pre.rowwise() += layer.bias.transpose();

  FeatureSeq out = layer.activation == Activation::kRelu
                       ? pre.cwiseMax(0.0).eval()
                       : pre;
  if (cache != nullptr) {
    cache->patches = std::move(patches);
    cache->pre_activation = std::move(pre);
    cache->input_rows = t_in;
    cache->left_pad = left_pad;
  }
  return out;
}

// Adjoint of conv1d_forward. Returns the input gradient; parameter
// gradients are accumulated into `grads` (which must be pre-sized or
// empty; empty means allocate-and-zero).
inline FeatureSeq conv1d_backward(const ConvEmbeddingLayer& layer,
                                  const ConvCache& cache,
                                  const FeatureSeq& grad_out,
                                  ConvGrads* grads) {
  if (grad_out.rows() != cache.patches.rows() ||
      grad_out.cols() != layer.filters())
    throw ContractError("conv backward: gradient shape mismatch");

  Mat grad_pre = grad_out;
  if (layer.activation == Activation::kRelu) {
    grad_pre = (cache.pre_activation.array() > 0.0)
                   .select(grad_out, Mat::Zero(grad_out.rows(), grad_out.cols()));
  }

  if (grads != nullptr) {
    if (grads->weights.size() == 0) {
      grads->weights = Mat::Zero(layer.weights.rows(), layer.weights.cols());
      grads->bias = Vec::Zero(layer.bias.size());
    }
    grads->weights += grad_pre.transpose() * cache.patches;
    grads->bias += grad_pre.colwise().sum().transpose();
  }

  const int bins = layer.input_bins;
  Mat grad_patches = grad_pre * layer.weights;  // T' x (K*bins)
  FeatureSeq grad_input = Mat::Zero(cache.input_rows, bins);
  for (int t = 0; t < grad_patches.rows(); ++t) {
    const int start = t * layer.stride - cache.left_pad;
    for (int k = 0; k < layer.kernel; ++k) {
      const int row = start + k;
      if (row >= 0 && row < cache.input_rows)
        grad_input.row(row) += grad_patches.row(t).segment(k * bins, bins);
    }
  }
  return grad_input;
}

// ---------------------------------------------------------------------------
// Bidirectional GRU.
//
// Per direction and time step, with h_0 = 0:
//   z = sigmoid(x W_z + h U_z + b_z)
//   r = sigmoid(x W_r + h U_r + b_r)
//   c = tanh(x W_c + (r .* h) U_c + b_c)
//   h' = (1 - z) .* h + z .* c
// Gates are packed [z | r | c] along columns. The candidate's recurrent
// term applies the reset gate to the previous state before the matmul.

struct GruDirection {
  Mat w_input;  // D x 3H
  Mat u_zr;     // H x 2H
  Mat u_c;      // H x H
  Vec bias;     // 3H
};

struct GruLayer {
  GruDirection forward, backward;
  int input_size = 0;
  int hidden_size = 0;

  std::int64_t parameter_count() const {
    const std::int64_t per_dir = static_cast<std::int64_t>(forward.w_input.size()) +
                                 forward.u_zr.size() + forward.u_c.size() +
                                 forward.bias.size();
    return 2 * per_dir;
  }
};

struct GruDirCache {
  Mat x;        // T x D, in this direction's time order
  Mat z, r, c;  // T x H gate values
  Mat h;        // T x H hidden states
};

struct GruCache {
  GruDirCache fwd;
  GruDirCache bwd;  // time-reversed run
};

struct GruDirGrads {
  Mat w_input;
  Mat u_zr;
  Mat u_c;
  Vec bias;
};

struct GruGrads {
  GruDirGrads forward, backward;
};

namespace gru_detail {

inline void sigmoid_inplace(Eigen::Ref<Eigen::RowVectorXd> v) {
  v = (1.0 / (1.0 + (-v.array()).exp())).matrix();
}

// One direction over `x` (already in the direction's time order).
inline void run_direction(const Mat& x, const GruDirection& dir, int hidden,
                          GruDirCache* cache) {
  const int t_len = static_cast<int>(x.rows());
  Mat pre_in = x * dir.w_input;
  pre_in.rowwise() += dir.bias.transpose();

  cache->x = x;
  cache->z.resize(t_len, hidden);
  cache->r.resize(t_len, hidden);
  cache->c.resize(t_len, hidden);
  cache->h.resize(t_len, hidden);

  Eigen::RowVectorXd h_prev = Eigen::RowVectorXd::Zero(hidden);
  Eigen::RowVectorXd zr(2 * hidden), cand(hidden);
  for (int t = 0; t < t_len; ++t) {
    zr = pre_in.row(t).head(2 * hidden) + h_prev * dir.u_zr;
    sigmoid_inplace(zr);
    const auto z = zr.head(hidden);
    const auto r = zr.tail(hidden);
    cand = pre_in.row(t).tail(hidden) +
           (r.array() * h_prev.array()).matrix() * dir.u_c;
    cand = cand.array().tanh().matrix();
    cache->z.row(t) = z;
    cache->r.row(t) = r;
    cache->c.row(t) = cand;
    cache->h.row(t) = ((1.0 - z.array()) * h_prev.array() +
                       z.array() * cand.array())
                          .matrix();
    h_prev = cache->h.row(t);
  }
}

// Backpropagation through one direction. `grad_h` holds dLoss/dh_t for
// every step in this direction's time order; returns dLoss/dx.
inline Mat back_direction(const GruDirection& dir, const GruDirCache& cache,
                          const Mat& grad_h, GruDirGrads* grads) {
  const int t_len = static_cast<int>(cache.h.rows());
  const int hidden = static_cast<int>(cache.h.cols());

  if (grads->w_input.size() == 0) {
    grads->w_input = Mat::Zero(dir.w_input.rows(), dir.w_input.cols());
    grads->u_zr = Mat::Zero(dir.u_zr.rows(), dir.u_zr.cols());
    grads->u_c = Mat::Zero(dir.u_c.rows(), dir.u_c.cols());
    grads->bias = Vec::Zero(dir.bias.size());
  }

  Mat grad_pre(t_len, 3 * hidden);  // d loss / d pre-activations
  Eigen::RowVectorXd dh = Eigen::RowVectorXd::Zero(hidden);
  Eigen::RowVectorXd h_prev(hidden), dz(hidden), dc(hidden), dr(hidden),
      dh_prev(hidden), d_rh(hidden), dz_pre(hidden), dr_pre(hidden),
      dc_pre(hidden);

  for (int t = t_len - 1; t >= 0; --t) {
    dh += grad_h.row(t);
    if (t > 0)
      h_prev = cache.h.row(t - 1);
    else
      h_prev.setZero();
    const auto z = cache.z.row(t).array();
    const auto r = cache.r.row(t).array();
    const auto c = cache.c.row(t).array();

    dz = (dh.array() * (c - h_prev.array())).matrix();
    dc = (dh.array() * z).matrix();
    dh_prev = (dh.array() * (1.0 - z)).matrix();

    dc_pre = (dc.array() * (1.0 - c * c)).matrix();
    d_rh = dc_pre * dir.u_c.transpose();
    grads->u_c += (r * h_prev.array()).matrix().transpose() * dc_pre;
    dr = (d_rh.array() * h_prev.array()).matrix();
    dh_prev += (d_rh.array() * r).matrix();

    dz_pre = (dz.array() * z * (1.0 - z)).matrix();
    dr_pre = (dr.array() * r * (1.0 - r)).matrix();
    grads->u_zr.leftCols(hidden) += h_prev.transpose() * dz_pre;
    grads->u_zr.rightCols(hidden) += h_prev.transpose() * dr_pre;
    dh_prev += dz_pre * dir.u_zr.leftCols(hidden).transpose();
    dh_prev += dr_pre * dir.u_zr.rightCols(hidden).transpose();

    grad_pre.row(t).head(hidden) = dz_pre;
    grad_pre.row(t).segment(hidden, hidden) = dr_pre;
    grad_pre.row(t).tail(hidden) = dc_pre;

    dh = dh_prev;
  }

  grads->w_input += cache.x.transpose() * grad_pre;
  grads->bias += grad_pre.colwise().sum().transpose();
  return grad_pre * dir.w_input.transpose();
}

}  // namespace gru_detail

// Output is the per-step concatenation [forward H | backward H].
inline FeatureSeq bigru_forward(const FeatureSeq& input, const GruLayer& layer,
                                GruCache* cache = nullptr) {
  if (static_cast<int>(input.cols()) != layer.input_size)
    throw ContractError("gru: input width " + std::to_string(input.cols()) +
                        " != layer input size " +
                        std::to_string(layer.input_size));
  const int t_len = static_cast<int>(input.rows());
  const int hidden = layer.hidden_size;

  GruCache local;
  GruCache* c = cache != nullptr ? cache : &local;
  gru_detail::run_direction(input, layer.forward, hidden, &c->fwd);
  gru_detail::run_direction(input.colwise().reverse(), layer.backward, hidden,
                            &c->bwd);

  FeatureSeq out(t_len, 2 * hidden);
  out.leftCols(hidden) = c->fwd.h;
  out.rightCols(hidden) = c->bwd.h.colwise().reverse();
  return out;
}

inline FeatureSeq bigru_backward(const GruLayer& layer, const GruCache& cache,
                                 const FeatureSeq& grad_out, GruGrads* grads) {
  const int t_len = static_cast<int>(cache.fwd.h.rows());
  const int hidden = layer.hidden_size;
  if (grad_out.rows() != t_len || grad_out.cols() != 2 * hidden)
    throw ContractError("gru backward: gradient shape mismatch");

  const Mat grad_fwd = grad_out.leftCols(hidden);
  const Mat grad_bwd = grad_out.rightCols(hidden).colwise().reverse();

  Mat dx = gru_detail::back_direction(layer.forward, cache.fwd, grad_fwd,
                                      &grads->forward);
  Mat dx_rev = gru_detail::back_direction(layer.backward, cache.bwd, grad_bwd,
                                          &grads->backward);
  dx += dx_rev.colwise().reverse();
  return dx;
}

// ---------------------------------------------------------------------------
// Dense + softmax readout.

struct DenseLayer {
  Mat weights;  // D x M
  Vec bias;     // M

  std::int64_t parameter_count() const {
    return static_cast<std::int64_t>(weights.size()) + bias.size();
  }
};

struct DenseCache {
  Mat input;      // T x D
  Mat probs;      // T x M
  Mat log_probs;  // T x M
};

struct DenseGrads {
  Mat weights;
  Vec bias;
};

// Row-wise softmax(x W + b) with max subtraction. Returns probabilities;
// the cache also keeps log-probabilities for CTC.
inline Mat dense_softmax_forward(const FeatureSeq& input,
                                 const DenseLayer& layer,
                                 DenseCache* cache = nullptr) {
  if (input.cols() != layer.weights.rows())
    throw ContractError("dense: input width " + std::to_string(input.cols()) +
                        " != weight rows " + std::to_string(layer.weights.rows()));
  Mat logits = input * layer.weights;
  logits.rowwise() += layer.bias.transpose();

  Mat log_probs(logits.rows(), logits.cols());
  for (int t = 0; t < logits.rows(); ++t) {
    const double mx = logits.row(t).maxCoeff();
    const double lse =
        mx + std::log((logits.row(t).array() - mx).exp().sum());
    log_probs.row(t) = logits.row(t).array() - lse;
  }
  Mat probs = log_probs.array().exp();

  if (cache != nullptr) {
    cache->input = input;
    cache->probs = probs;
    cache->log_probs = log_probs;
  }
  return probs;
}

// Converts a gradient over log-softmax outputs into a gradient over the
// underlying logits: dL/da_k = g_k - p_k * sum_j g_j per row.
inline Mat logit_grad_from_logprob_grad(const Mat& grad_logprobs,
                                        const Mat& probs) {
  const Vec row_sums = grad_logprobs.rowwise().sum();
  return grad_logprobs - (row_sums.asDiagonal() * probs);
}

// Backward from a gradient over the logits.
inline FeatureSeq dense_backward(const DenseLayer& layer,
                                 const DenseCache& cache,
                                 const Mat& grad_logits, DenseGrads* grads) {
  if (grad_logits.rows() != cache.input.rows() ||
      grad_logits.cols() != layer.weights.cols())
    throw ContractError("dense backward: gradient shape mismatch");
  if (grads != nullptr) {
    if (grads->weights.size() == 0) {
      grads->weights = Mat::Zero(layer.weights.rows(), layer.weights.cols());
      grads->bias = Vec::Zero(layer.bias.size());
    }
    grads->weights += cache.input.transpose() * grad_logits;
    grads->bias += grad_logits.colwise().sum().transpose();
  }
  return grad_logits * layer.weights.transpose();
}

// Multiclass cross entropy against a one-hot target. Returns the loss and
// the combined softmax+CE gradient over the logits (p - y).
inline std::pair<double, Vec> cross_entropy_loss(const Vec& probs,
                                                 const Vec& one_hot_target) {
  if (probs.size() != one_hot_target.size())
    throw ContractError("cross entropy: size mismatch");
  int hot = -1;
  for (int i = 0; i < one_hot_target.size(); ++i) {
    const double v = one_hot_target[i];
    if (v == 1.0) {
      if (hot >= 0) throw ContractError("cross entropy: target not one-hot");
      hot = i;
    } else if (v != 0.0) {
      throw ContractError("cross entropy: target not one-hot");
    }
  }
  if (hot < 0) throw ContractError("cross entropy: target not one-hot");
  const double loss = -std::log(std::max(probs[hot], 1e-300));
  Vec grad = probs - one_hot_target;
  return {loss, grad};
}

// ---------------------------------------------------------------------------
// Inverted dropout: kept entries are scaled by 1/(1-rate) during training
// so inference is the identity.

inline FeatureSeq dropout_apply(const FeatureSeq& input, double rate, Rng& rng,
                                bool training, Mat* mask_out = nullptr) {
  if (rate < 0.0 || rate >= 1.0)
    throw ConfigError("dropout rate must be in [0, 1), got " +
                      std::to_string(rate));
  if (!training || rate == 0.0) {
    if (mask_out != nullptr)
      *mask_out = Mat::Ones(input.rows(), input.cols());
    return input;
  }
  const double keep_scale = 1.0 / (1.0 - rate);
  Mat mask(input.rows(), input.cols());
  for (int i = 0; i < mask.rows(); ++i)
    for (int j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng.uniform() < rate ? 0.0 : keep_scale;
  if (mask_out != nullptr) *mask_out = mask;
  return input.cwiseProduct(mask);
}

// ---------------------------------------------------------------------------
// Initialization: Glorot-uniform weights with the bound computed from each
// logical (fan_in, fan_out) pair; biases start at zero.

inline void glorot_fill(Mat& w, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (int i = 0; i < w.rows(); ++i)
    for (int j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
}

inline ConvEmbeddingLayer make_conv_layer(int filters, int kernel, int bins,
                                          int stride, Padding padding,
                                          Activation activation, Rng& rng) {
  if (filters < 1 || kernel < 1 || stride < 1 || bins < 1)
    throw ConfigError("conv: filters, kernel, stride, bins must be >= 1");
  ConvEmbeddingLayer layer;
  layer.kernel = kernel;
  layer.stride = stride;
  layer.input_bins = bins;
  layer.padding = padding;
  layer.activation = activation;
  layer.weights.resize(filters, kernel * bins);
  glorot_fill(layer.weights, kernel * bins, filters, rng);
  layer.bias = Vec::Zero(filters);
  return layer;
}

inline GruLayer make_gru_layer(int input_size, int hidden_size, Rng& rng) {
  if (input_size < 1 || hidden_size < 1)
    throw ConfigError("gru: sizes must be >= 1");
  GruLayer layer;
  layer.input_size = input_size;
  layer.hidden_size = hidden_size;
  for (GruDirection* dir : {&layer.forward, &layer.backward}) {
    dir->w_input.resize(input_size, 3 * hidden_size);
    glorot_fill(dir->w_input, input_size, hidden_size, rng);
    dir->u_zr.resize(hidden_size, 2 * hidden_size);
    glorot_fill(dir->u_zr, hidden_size, hidden_size, rng);
    dir->u_c.resize(hidden_size, hidden_size);
    glorot_fill(dir->u_c, hidden_size, hidden_size, rng);
    dir->bias = Vec::Zero(3 * hidden_size);
  }
  return layer;
}

inline DenseLayer make_dense_layer(int input_size, int output_size, Rng& rng) {
  if (input_size < 1 || output_size < 1)
    throw ConfigError("dense: sizes must be >= 1");
  DenseLayer layer;
  layer.weights.resize(input_size, output_size);
  glorot_fill(layer.weights, input_size, output_size, rng);
  layer.bias = Vec::Zero(output_size);
  return layer;
}

}  // namespace crnn
