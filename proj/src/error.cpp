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

#include "cot/error.hpp"

namespace cot {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NoSignChange: return "NoSignChange";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularJacobian: return "SingularJacobian";
    case ErrorKind::MaxIterExceeded: return "MaxIterExceeded";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::DegenerateSample: return "DegenerateSample";
    case ErrorKind::EmptyMeasure: return "EmptyMeasure";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::Unsupported: return "Unsupported";
    case ErrorKind::NoFeasibleCandidate: return "NoFeasibleCandidate";
    case ErrorKind::NegativeTarget: return "NegativeTarget";
    case ErrorKind::InfeasibleTargets: return "InfeasibleTargets";
    case ErrorKind::InconsistentOrder: return "InconsistentOrder";
    case ErrorKind::CoverageGap: return "CoverageGap";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::GridInfeasible: return "GridInfeasible";
    case ErrorKind::ZeroMass: return "ZeroMass";
    case ErrorKind::BracketFailure: return "BracketFailure";
    case ErrorKind::DivergentTilt: return "DivergentTilt";
    case ErrorKind::BarrierInfeasible: return "BarrierInfeasible";
    case ErrorKind::StepUnderflow: return "StepUnderflow";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace cot
