// Copyright 2026-present the cot project
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cot {

enum class ErrorKind {
  NoSignChange,
  NonFinite,
  SingularJacobian,
  MaxIterExceeded,
  InvalidSpec,
  DegenerateSample,
  EmptyMeasure,
  DomainError,
  Unsupported,
  NoFeasibleCandidate,
  NegativeTarget,
  InfeasibleTargets,
  InconsistentOrder,
  CoverageGap,
  DimensionMismatch,
  GridInfeasible,
  ZeroMass,
  BracketFailure,
  DivergentTilt,
  BarrierInfeasible,
  StepUnderflow,
  ConfigError,
  IoError,
};

std::string_view error_kind_name(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, int index = -1)
      : std::runtime_error(what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Offending constraint index for InfeasibleTargets, -1 otherwise.
  int index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  int index_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace cot
