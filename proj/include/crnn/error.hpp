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

#include <stdexcept>
#include <string>

namespace crnn {

// Base class of everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (bad hyperparameter, malformed config file,
// inconsistent layer wiring). CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Problems with input data: unreadable or malformed files, unsupported
// formats, empty datasets, transcripts that encode to nothing. CLI exit
// code 3.
class DataError : public Error {
 public:
  using Error::Error;
};

// Structurally malformed input file (bad magic, truncated chunk).
class ParseError : public DataError {
 public:
  using DataError::DataError;
};

// Well-formed file in a format this library deliberately rejects.
class UnsupportedFormatError : public DataError {
 public:
  using DataError::DataError;
};

// Input shorter than one analysis window / convolution kernel.
class TooShortError : public DataError {
 public:
  using DataError::DataError;
};

// A (frame count, label) pair admits no CTC alignment at all. Structural,
// distinguished from a numerically underflowed likelihood; training loops
// catch this to skip the offending pair.
class InfeasibleAlignmentError : public DataError {
 public:
  using DataError::DataError;
};

// Numeric divergence (NaN loss, non-finite gradients). CLI exit code 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Caller broke an API contract (mismatched cache, wrong shapes).
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace crnn
