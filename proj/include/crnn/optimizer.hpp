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

#include "crnn/common.hpp"
#include "crnn/error.hpp"

namespace crnn {

struct NesterovState {
  Vec velocity;  // same layout as the flat parameter vector
  long step_count = 0;
};

struct TrainSchedule {
  double learning_rate = 0.02;
  double momentum = 0.9;
  double clip_norm = 5.0;
  int epochs = 20;
  int batch_size = 4;

  void validate() const {
    if (learning_rate < 0.0)
      throw ConfigError("schedule: learning_rate must be >= 0");
    if (momentum < 0.0 || momentum >= 1.0)
      throw ConfigError("schedule: momentum must be in [0, 1)");
    if (clip_norm <= 0.0) throw ConfigError("schedule: clip_norm must be > 0");
    if (epochs < 1) throw ConfigError("schedule: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("schedule: batch_size must be >= 1");
  }
};

// Rescales so the global L2 norm never exceeds clip_norm.
inline void clip_gradients(Vec& grads, double clip_norm) {
  if (clip_norm <= 0.0) throw ConfigError("clip_norm must be > 0");
  const double norm = grads.norm();
  if (norm > clip_norm) grads *= clip_norm / norm;
}

// Nesterov momentum written so only the gradient at the current point is
// needed:
//   v <- momentum * v - lr * g
//   theta <- theta + momentum * v - lr * g
// With momentum = 0 this reduces exactly to vanilla SGD.
inline void nesterov_step(Vec& params, const Vec& grads, NesterovState& state,
                          double learning_rate, double momentum) {
  if (params.size() != grads.size())
    throw ContractError("nesterov: parameter/gradient size mismatch");
  if (!grads.allFinite())
    throw NumericError("nesterov: non-finite gradient, step aborted");
  if (state.velocity.size() == 0) state.velocity = Vec::Zero(params.size());
  if (state.velocity.size() != params.size())
    throw ContractError("nesterov: velocity size mismatch");

  state.velocity = momentum * state.velocity - learning_rate * grads;
  params += momentum * state.velocity - learning_rate * grads;
  state.step_count += 1;
}

}  // namespace crnn
