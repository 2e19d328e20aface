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

#include <cmath>
#include <functional>

#include "crnn/common.hpp"
#include "crnn/error.hpp"

namespace crnn {

// Compares an analytic gradient against central finite differences of a
// scalar function, coordinate by coordinate, at 64-bit precision.
// Returns max_i |analytic_i - fd_i| / max(|analytic_i|, |fd_i|, 1e-12).
inline double grad_check(const std::function<double(const Vec&)>& f,
                         const Vec& at, const Vec& analytic,
                         double eps = 1e-5) {
  Vec x = at;
  double worst = 0.0;
  for (int i = 0; i < at.size(); ++i) {
    x[i] = at[i] + eps;
    const double f_plus = f(x);
    x[i] = at[i] - eps;
    const double f_minus = f(x);
    x[i] = at[i];
    const double fd = (f_plus - f_minus) / (2.0 * eps);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(fd), 1e-12});
    worst = std::max(worst, std::abs(analytic[i] - fd) / denom);
  }
  return worst;
}

// Flat parameter packing. Matrices are written in row-major coefficient
// order; the traversal order of tensors defines the canonical parameter
// layout used by gradients, optimizer state and checkpoints.
class FlatWriter {
 public:
  void add(const Mat& m) {
    const double* p = m.data();
    data_.insert(data_.end(), p, p + m.size());
  }
  void add(const Vec& v) {
    data_.insert(data_.end(), v.data(), v.data() + v.size());
  }
  Vec take() const {
    return Eigen::Map<const Vec>(data_.data(),
                                 static_cast<Eigen::Index>(data_.size()));
  }
  std::size_t size() const { return data_.size(); }

 private:
  std::vector<double> data_;
};

class FlatReader {
 public:
  explicit FlatReader(const Vec& flat) : flat_(flat) {}

  void get(Mat& m) {
    check(m.size());
    for (int i = 0; i < m.rows(); ++i)
      for (int j = 0; j < m.cols(); ++j) m(i, j) = flat_[pos_++];
  }
  void get(Vec& v) {
    check(v.size());
    for (int i = 0; i < v.size(); ++i) v[i] = flat_[pos_++];
  }
  bool exhausted() const { return pos_ == flat_.size(); }

 private:
  void check(Eigen::Index n) const {
    if (pos_ + n > flat_.size())
      throw ContractError("flat parameter vector too short");
  }
  const Vec& flat_;
  Eigen::Index pos_ = 0;
};

}  // namespace crnn
