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

#include "crnn/layers.hpp"

#include <gtest/gtest.h>

#include <cmath>

#include "crnn/gradcheck.hpp"
#include "crnn/rng.hpp"

namespace crnn {
namespace {

Mat random_mat(int rows, int cols, Rng& rng, double scale = 1.0) {
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * rng.gaussian();
  return m;
}

// --------------------------------------------------------------------------
// Convolution

TEST(Conv, OutputLengthMatchesFormula) {
  EXPECT_EQ(conv_output_length(101, 11, 2, Padding::kValid), 46);
  EXPECT_EQ(conv_output_length(101, 11, 2, Padding::kSame), 51);
  EXPECT_EQ(conv_output_length(10, 10, 1, Padding::kValid), 1);
  EXPECT_THROW(conv_output_length(9, 10, 1, Padding::kValid), TooShortError);

  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int kernel = 1 + static_cast<int>(rng.below(12));
    const int stride = 1 + static_cast<int>(rng.below(4));
    const int t_in = kernel + static_cast<int>(rng.below(50));
    EXPECT_EQ(conv_output_length(t_in, kernel, stride, Padding::kValid),
              (t_in - kernel) / stride + 1);
    EXPECT_EQ(conv_output_length(t_in, kernel, stride, Padding::kSame),
              (t_in + stride - 1) / stride);
  }
}

TEST(Conv, ZeroWeightsGiveZeroOutput) {
  Rng rng(1);
  auto layer = make_conv_layer(4, 3, 81, 2, Padding::kValid,
                               Activation::kLinear, rng);
  layer.weights.setZero();
  layer.bias.setZero();
  const Mat input = random_mat(20, 81, rng);
  const auto out = conv1d_forward(input, layer);
  EXPECT_EQ(out.rows(), 9);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Conv, UnitFilterCopiesOneInputColumn) {
  Rng rng(2);
  auto layer = make_conv_layer(1, 1, 81, 1, Padding::kValid,
                               Activation::kLinear, rng);
  layer.weights.setZero();
  layer.bias.setZero();
  const int picked_bin = 17;
  layer.weights(0, picked_bin) = 1.0;
  const Mat input = random_mat(15, 81, rng);
  const auto out = conv1d_forward(input, layer);
  ASSERT_EQ(out.rows(), 15);
  for (int t = 0; t < 15; ++t)
    EXPECT_DOUBLE_EQ(out(t, 0), input(t, picked_bin));
}

TEST(Conv, TooShortInputThrowsInValidMode) {
  Rng rng(4);
  auto layer = make_conv_layer(2, 11, 81, 2, Padding::kValid,
                               Activation::kLinear, rng);
  const Mat input = random_mat(10, 81, rng);
  EXPECT_THROW(conv1d_forward(input, layer), TooShortError);
}

TEST(Conv, ParameterCountIsFiltersTimesKernelTimesBinsPlusBias) {
  Rng rng(5);
  const auto layer = make_conv_layer(200, 11, 81, 2, Padding::kValid,
                                     Activation::kLinear, rng);
  EXPECT_EQ(layer.parameter_count(), 200LL * 11 * 81 + 200);
}

// Packs (weights, bias, input) for finite differencing of a conv instance.
struct ConvProblem {
  ConvEmbeddingLayer layer;
  Mat input;
  Mat upstream;  // fixed projection making the output a scalar

  Vec pack() const {
    FlatWriter w;
    w.add(layer.weights);
    w.add(layer.bias);
    w.add(input);
    return w.take();
  }
  double eval(const Vec& flat) const {
    ConvEmbeddingLayer l = layer;
    Mat in = input;
    FlatReader r(flat);
    r.get(l.weights);
    r.get(l.bias);
    r.get(in);
    return conv1d_forward(in, l).cwiseProduct(upstream).sum();
  }
  Vec analytic() const {
    ConvCache cache;
    conv1d_forward(input, layer, &cache);
    ConvGrads grads;
    const Mat dx = conv1d_backward(layer, cache, upstream, &grads);
    FlatWriter w;
    w.add(grads.weights);
    w.add(grads.bias);
    w.add(dx);
    return w.take();
  }
};

ConvProblem make_conv_problem(int t_in, int filters, int kernel, int bins,
                              int stride, Padding padding,
                              Activation activation, std::uint64_t seed) {
  Rng rng(seed);
  ConvProblem p;
  p.layer =
      make_conv_layer(filters, kernel, bins, stride, padding, activation, rng);
  p.input = random_mat(t_in, bins, rng);
  p.upstream = random_mat(
      conv_output_length(t_in, kernel, stride, padding), filters, rng);
  return p;
}

TEST(Conv, BackwardMatchesFiniteDifferences) {
  const auto p = make_conv_problem(5, 3, 2, 81, 1, Padding::kValid,
                                   Activation::kLinear, 11);
  const double err = grad_check(
      [&](const Vec& flat) { return p.eval(flat); }, p.pack(), p.analytic());
  EXPECT_LT(err, 1e-4);
}

TEST(Conv, BackwardMatchesFiniteDifferencesAcrossConfigs) {
  int trial = 0;
  for (const Padding padding : {Padding::kValid, Padding::kSame}) {
    for (const Activation act : {Activation::kLinear, Activation::kRelu}) {
      const auto p =
          make_conv_problem(7, 2, 3, 5, 2, padding, act, 100 + trial++);
      const double err = grad_check(
          [&](const Vec& flat) { return p.eval(flat); }, p.pack(),
          p.analytic());
      EXPECT_LT(err, 1e-4) << "padding " << to_string(padding);
    }
  }
}

TEST(Conv, ZeroUpstreamGradientGivesZeroGradients) {
  auto p = make_conv_problem(6, 3, 2, 4, 1, Padding::kValid,
                             Activation::kLinear, 21);
  p.upstream.setZero();
  EXPECT_EQ(p.analytic().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Conv, GradientsAreLinearInUpstream) {
  auto p = make_conv_problem(6, 3, 2, 4, 1, Padding::kValid,
                             Activation::kLinear, 22);
  const Vec g1 = p.analytic();
  p.upstream *= 2.0;
  const Vec g2 = p.analytic();
  EXPECT_LT((g2 - 2.0 * g1).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GradCheck, FlagsACorruptedBackwardPass) {
  const auto p = make_conv_problem(5, 3, 2, 6, 1, Padding::kValid,
                                   Activation::kLinear, 23);
  Vec corrupted = p.analytic();
  int worst = 0;
  corrupted.cwiseAbs().maxCoeff(&worst);
  corrupted[worst] = -corrupted[worst];  // one sign flip
  const double err = grad_check(
      [&](const Vec& flat) { return p.eval(flat); }, p.pack(), corrupted);
  EXPECT_GT(err, 0.1);
}

TEST(GradCheck, NearExactForLinearMap) {
  Rng rng(31);
  auto layer = make_dense_layer(4, 3, rng);
  const Mat input = random_mat(5, 4, rng);
  const Mat upstream = random_mat(5, 3, rng);

  const auto pack = [&](const DenseLayer& l) {
    FlatWriter w;
    w.add(l.weights);
    w.add(l.bias);
    return w.take();
  };
  const auto eval = [&](const Vec& flat) {
    DenseLayer l = layer;
    FlatReader r(flat);
    r.get(l.weights);
    r.get(l.bias);
    Mat logits = input * l.weights;
    logits.rowwise() += l.bias.transpose();
    return logits.cwiseProduct(upstream).sum();
  };
  DenseCache cache;
  dense_softmax_forward(input, layer, &cache);
  DenseGrads grads;
  dense_backward(layer, cache, upstream, &grads);
  FlatWriter w;
  w.add(grads.weights);
  w.add(grads.bias);
  EXPECT_LT(grad_check(eval, pack(layer), w.take()), 1e-8);
}

// --------------------------------------------------------------------------
// GRU

TEST(Gru, ZeroParametersKeepStateAtZero) {
  GruLayer layer;
  layer.input_size = 3;
  layer.hidden_size = 4;
  for (GruDirection* d : {&layer.forward, &layer.backward}) {
    d->w_input = Mat::Zero(3, 12);
    d->u_zr = Mat::Zero(4, 8);
    d->u_c = Mat::Zero(4, 4);
    d->bias = Vec::Zero(12);
  }
  Rng rng(7);
  const Mat input = random_mat(6, 3, rng);
  const auto out = bigru_forward(input, layer);
  EXPECT_EQ(out.rows(), 6);
  EXPECT_EQ(out.cols(), 8);
  EXPECT_EQ(out.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gru, BackwardDirectionIsForwardOnReversedInput) {
  Rng rng(8);
  const auto layer = make_gru_layer(3, 4, rng);
  GruLayer swapped = layer;
  std::swap(swapped.forward, swapped.backward);

  const Mat input = random_mat(9, 3, rng);
  const Mat out = bigru_forward(input, layer);
  const Mat out_swapped = bigru_forward(input.colwise().reverse(), swapped);

  const Mat lhs = out.rightCols(4);
  const Mat rhs = out_swapped.leftCols(4).colwise().reverse();
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Gru, SingleFrameUsesTheSameInputForBothDirections) {
  Rng rng(9);
  const auto layer = make_gru_layer(5, 3, rng);
  GruLayer swapped = layer;
  std::swap(swapped.forward, swapped.backward);
  const Mat input = random_mat(1, 5, rng);
  const Mat out = bigru_forward(input, layer);
  const Mat out_swapped = bigru_forward(input, swapped);
  // with T=1 swapping directions just swaps the two output halves
  EXPECT_LT((out.leftCols(3) - out_swapped.rightCols(3)).cwiseAbs().maxCoeff(),
            1e-15);
  EXPECT_LT((out.rightCols(3) - out_swapped.leftCols(3)).cwiseAbs().maxCoeff(),
            1e-15);
}

struct GruProblem {
  GruLayer layer;
  Mat input;
  Mat upstream;

  static void pack_dir(FlatWriter& w, const GruDirection& d) {
    w.add(d.w_input);
    w.add(d.u_zr);
    w.add(d.u_c);
    w.add(d.bias);
  }
  static void unpack_dir(FlatReader& r, GruDirection& d) {
    r.get(d.w_input);
    r.get(d.u_zr);
    r.get(d.u_c);
    r.get(d.bias);
  }

  Vec pack() const {
    FlatWriter w;
    pack_dir(w, layer.forward);
    pack_dir(w, layer.backward);
    w.add(input);
    return w.take();
  }
  double eval(const Vec& flat) const {
    GruLayer l = layer;
    Mat in = input;
    FlatReader r(flat);
    unpack_dir(r, l.forward);
    unpack_dir(r, l.backward);
    r.get(in);
    return bigru_forward(in, l).cwiseProduct(upstream).sum();
  }
  Vec analytic() const {
    GruCache cache;
    bigru_forward(input, layer, &cache);
    GruGrads grads;
    const Mat dx = bigru_backward(layer, cache, upstream, &grads);
    FlatWriter w;
    pack_dir_grads(w, grads.forward);
    pack_dir_grads(w, grads.backward);
    w.add(dx);
    return w.take();
  }
  static void pack_dir_grads(FlatWriter& w, const GruDirGrads& g) {
    w.add(g.w_input);
    w.add(g.u_zr);
    w.add(g.u_c);
    w.add(g.bias);
  }
};

GruProblem make_gru_problem(int t_len, int input_size, int hidden,
                            std::uint64_t seed) {
  Rng rng(seed);
  GruProblem p;
  p.layer = make_gru_layer(input_size, hidden, rng);
  p.input = random_mat(t_len, input_size, rng);
  p.upstream = random_mat(t_len, 2 * hidden, rng);
  return p;
}

TEST(Gru, BackwardMatchesFiniteDifferences) {
  const auto p = make_gru_problem(5, 3, 4, 41);
  const double err = grad_check(
      [&](const Vec& flat) { return p.eval(flat); }, p.pack(), p.analytic());
  EXPECT_LT(err, 1e-4);
}

TEST(Gru, BackwardMatchesFiniteDifferencesAcrossSizes) {
  for (std::uint64_t seed : {61, 62, 63}) {
    Rng sizes(seed);
    const int t_len = 1 + static_cast<int>(sizes.below(5));
    const int input_size = 1 + static_cast<int>(sizes.below(4));
    const int hidden = 1 + static_cast<int>(sizes.below(4));
    const auto p = make_gru_problem(t_len, input_size, hidden, seed * 13);
    const double err = grad_check(
        [&](const Vec& flat) { return p.eval(flat); }, p.pack(), p.analytic());
    EXPECT_LT(err, 1e-4) << "T=" << t_len << " D=" << input_size
                         << " H=" << hidden;
  }
}

TEST(Gru, ZeroUpstreamGradientGivesZeroGradients) {
  auto p = make_gru_problem(4, 3, 2, 51);
  p.upstream.setZero();
  EXPECT_EQ(p.analytic().cwiseAbs().maxCoeff(), 0.0);
}

TEST(Gru, MirroredProblemGivesMirroredGradients) {
  const auto p = make_gru_problem(6, 3, 4, 52);

  GruCache cache;
  bigru_forward(p.input, p.layer, &cache);
  GruGrads grads;
  const Mat dx = bigru_backward(p.layer, cache, p.upstream, &grads);

  // Swap directions, reverse time, swap the upstream halves.
  GruLayer swapped = p.layer;
  std::swap(swapped.forward, swapped.backward);
  Mat upstream_swapped(p.upstream.rows(), p.upstream.cols());
  upstream_swapped.leftCols(4) = p.upstream.rightCols(4).colwise().reverse();
  upstream_swapped.rightCols(4) = p.upstream.leftCols(4).colwise().reverse();

  GruCache cache2;
  bigru_forward(p.input.colwise().reverse(), swapped, &cache2);
  GruGrads grads2;
  const Mat dx2 =
      bigru_backward(swapped, cache2, upstream_swapped, &grads2);

  EXPECT_LT((dx2.colwise().reverse() - dx).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((grads2.forward.w_input - grads.backward.w_input)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
  EXPECT_LT((grads2.backward.w_input - grads.forward.w_input)
                .cwiseAbs()
                .maxCoeff(),
            1e-12);
}

// --------------------------------------------------------------------------
// Dense + softmax + cross entropy

TEST(DenseSoftmax, ZeroParametersGiveUniformRows) {
  DenseLayer layer;
  layer.weights = Mat::Zero(8, 30);
  layer.bias = Vec::Zero(30);
  Rng rng(71);
  const Mat probs = dense_softmax_forward(random_mat(5, 8, rng), layer);
  for (int t = 0; t < probs.rows(); ++t)
    for (int m = 0; m < probs.cols(); ++m)
      EXPECT_NEAR(probs(t, m), 1.0 / 30.0, 1e-15);
}

TEST(DenseSoftmax, StableUnderHugeLogits) {
  DenseLayer layer;
  layer.weights = Mat::Zero(2, 3);
  layer.weights(0, 0) = 1000.0;
  layer.bias = Vec::Zero(3);
  Mat input(1, 2);
  input << 1.0, 0.0;
  const Mat probs = dense_softmax_forward(input, layer);
  EXPECT_GT(probs(0, 0), 1.0 - 1e-12);
  EXPECT_TRUE(probs.allFinite());
}

TEST(DenseSoftmax, RowsSumToOneAndArePositive) {
  Rng rng(72);
  const auto layer = make_dense_layer(6, 30, rng);
  const Mat probs = dense_softmax_forward(random_mat(40, 6, rng, 3.0), layer);
  for (int t = 0; t < probs.rows(); ++t) {
    EXPECT_NEAR(probs.row(t).sum(), 1.0, 1e-9);
    EXPECT_GT(probs.row(t).minCoeff(), 0.0);
  }
}

TEST(CrossEntropy, PerfectPredictionHasZeroLoss) {
  Vec probs = Vec::Zero(4);
  probs[2] = 1.0;
  Vec target = Vec::Zero(4);
  target[2] = 1.0;
  const auto [loss, grad] = cross_entropy_loss(probs, target);
  EXPECT_DOUBLE_EQ(loss, 0.0);
  EXPECT_EQ(grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(CrossEntropy, UniformPredictionOverThirtyClasses) {
  const Vec probs = Vec::Constant(30, 1.0 / 30.0);
  Vec target = Vec::Zero(30);
  target[7] = 1.0;
  const auto [loss, grad] = cross_entropy_loss(probs, target);
  EXPECT_NEAR(loss, std::log(30.0), 1e-12);  // ~3.4012
  (void)grad;
}

TEST(CrossEntropy, RejectsNonOneHotTargets) {
  const Vec probs = Vec::Constant(3, 1.0 / 3.0);
  EXPECT_THROW(cross_entropy_loss(probs, Vec::Zero(3)), ContractError);
  EXPECT_THROW(cross_entropy_loss(probs, Vec::Ones(3)), ContractError);
  Vec fractional = Vec::Zero(3);
  fractional[0] = 0.5;
  fractional[1] = 0.5;
  EXPECT_THROW(cross_entropy_loss(probs, fractional), ContractError);
}

TEST(CrossEntropy, LogitGradientMatchesFiniteDifferences) {
  Rng rng(73);
  const Vec logits_at = random_mat(1, 6, rng).row(0).transpose();
  Vec target = Vec::Zero(6);
  target[3] = 1.0;

  const auto eval = [&](const Vec& logits) {
    Mat input = Mat::Zero(1, 6);
    input.row(0) = logits.transpose();
    DenseLayer identity;
    identity.weights = Mat::Identity(6, 6);
    identity.bias = Vec::Zero(6);
    const Mat probs = dense_softmax_forward(input, identity);
    return cross_entropy_loss(probs.row(0).transpose(), target).first;
  };

  DenseLayer identity;
  identity.weights = Mat::Identity(6, 6);
  identity.bias = Vec::Zero(6);
  Mat input = Mat::Zero(1, 6);
  input.row(0) = logits_at.transpose();
  const Mat probs = dense_softmax_forward(input, identity);
  const Vec analytic =
      cross_entropy_loss(probs.row(0).transpose(), target).second;

  EXPECT_LT(grad_check(eval, logits_at, analytic), 1e-6);
}

TEST(DenseSoftmax, LogProbGradientConversionMatchesFiniteDifferences) {
  // scalar = sum(U .* log_softmax(logits)); checks the log-prob-to-logit
  // gradient rule used by the CTC path.
  Rng rng(74);
  const Vec logits_at = random_mat(1, 5, rng).row(0).transpose();
  const Vec weights = random_mat(1, 5, rng).row(0).transpose();

  const auto log_softmax = [](const Vec& a) {
    const double mx = a.maxCoeff();
    const double lse = mx + std::log((a.array() - mx).exp().sum());
    return Vec((a.array() - lse).matrix());
  };
  const auto eval = [&](const Vec& a) {
    return log_softmax(a).dot(weights);
  };

  const Vec probs = log_softmax(logits_at).array().exp();
  Mat grad_logprobs = Mat::Zero(1, 5);
  grad_logprobs.row(0) = weights.transpose();
  Mat probs_row = Mat::Zero(1, 5);
  probs_row.row(0) = probs.transpose();
  const Vec analytic =
      logit_grad_from_logprob_grad(grad_logprobs, probs_row).row(0).transpose();

  EXPECT_LT(grad_check(eval, logits_at, analytic), 1e-6);
}

// --------------------------------------------------------------------------
// Dropout

TEST(Dropout, RateZeroAndInferenceAreIdentity) {
  Rng rng(81);
  const Mat input = random_mat(7, 5, rng);
  Rng d1(1), d2(2);
  EXPECT_TRUE(dropout_apply(input, 0.0, d1, true) == input);
  EXPECT_TRUE(dropout_apply(input, 0.9, d2, false) == input);
}

TEST(Dropout, RejectsRateOne) {
  Rng rng(82);
  const Mat input = Mat::Ones(2, 2);
  Rng d(1);
  EXPECT_THROW(dropout_apply(input, 1.0, d, true), ConfigError);
  EXPECT_THROW(dropout_apply(input, 1.5, d, true), ConfigError);
}

TEST(Dropout, MaskedMeanApproximatesInput) {
  const Mat input = Mat::Constant(2, 3, 4.0);
  Rng rng(83);
  Mat sum = Mat::Zero(2, 3);
  const int trials = 10000;
  for (int i = 0; i < trials; ++i)
    sum += dropout_apply(input, 0.25, rng, true);
  const Mat mean = sum / trials;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j)
      EXPECT_NEAR(mean(i, j), 4.0, 0.02 * 4.0);
}

TEST(Dropout, MaskReportsScalingUsedOnOutput) {
  const Mat input = Mat::Constant(4, 4, 1.0);
  Rng rng(84);
  Mat mask;
  const Mat out = dropout_apply(input, 0.5, rng, true, &mask);
  EXPECT_TRUE(out == mask);  // constant-1 input
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      EXPECT_TRUE(mask(i, j) == 0.0 || mask(i, j) == 2.0);
}

// --------------------------------------------------------------------------
// Initialization

TEST(Init, DeterministicPerSeed) {
  Rng a(123), b(123), c(124);
  const auto la = make_gru_layer(5, 7, a);
  const auto lb = make_gru_layer(5, 7, b);
  const auto lc = make_gru_layer(5, 7, c);
  EXPECT_TRUE(la.forward.w_input == lb.forward.w_input);
  EXPECT_TRUE(la.backward.u_c == lb.backward.u_c);
  EXPECT_FALSE(la.forward.w_input == lc.forward.w_input);
}

TEST(Init, GlorotBoundsRespected) {
  Rng rng(125);
  const auto conv = make_conv_layer(10, 3, 81, 1, Padding::kValid,
                                    Activation::kLinear, rng);
  const double bound = std::sqrt(6.0 / (3 * 81 + 10));
  EXPECT_LE(conv.weights.cwiseAbs().maxCoeff(), bound);
  EXPECT_EQ(conv.bias.cwiseAbs().maxCoeff(), 0.0);
}

}  // namespace
}  // namespace crnn
