// SPDX-License-Identifier: Apache-2.0
//
// evcsi: eigenvector CSI feedback with a Transformer autoencoder
// Copyright (C) 2026 The evcsi authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace evcsi {

// Every failure raised by the library derives from Error so that the CLI can
// map categories onto exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values (bad dimensions, probabilities, bit budgets).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A caller broke an operation's precondition (shape or length mismatch).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Input is structurally valid but mathematically degenerate (zero vectors).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced by a numeric kernel.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Malformed feedback payload (e.g. ensemble index out of range).
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Data on disk disagrees with the dimensions a config or model expects.
class DimensionMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace evcsi
