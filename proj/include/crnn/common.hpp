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

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

namespace crnn {

// All numerics are 64-bit. Sequences are time-major: row t is one frame.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

// A feature sequence is a T x D matrix, one row per time step.
using FeatureSeq = Mat;

// An ordered list of tensors; gradients and optimizer state mirror the
// model's trainable tensors in this form, in a fixed traversal order.
using TensorList = std::vector<Mat>;

inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

inline double log_sum_exp(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double m = a > b ? a : b;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline double log_sum_exp(double a, double b, double c) {
  return log_sum_exp(log_sum_exp(a, b), c);
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline bool all_finite(const TensorList& ts) {
  for (const auto& t : ts)
    if (!t.allFinite()) return false;
  return true;
}

inline double squared_norm(const TensorList& ts) {
  double s = 0.0;
  for (const auto& t : ts) s += t.squaredNorm();
  return s;
}

inline void set_zero(TensorList& ts) {
  for (auto& t : ts) t.setZero();
}

inline void axpy(TensorList& dst, const TensorList& src, double scale = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace crnn
