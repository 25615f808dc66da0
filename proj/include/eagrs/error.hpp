// Copyright 2026 The eagrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
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

namespace eagrs {

enum class Errc {
  kNonSquare,
  kAsymmetricBeyondTolerance,
  kDimensionMismatch,
  kNonFinite,
  kUnknownActivation,
  kNonPositiveTemperature,
  kInvalidProbability,
  kShapeMismatch,
  kNonFiniteLoss,
  kZeroVariance,
  kInvalidRatio,
  kIndexOutOfRange,
  kDegenerateCovariance,
  kParseError,
  kMissingFile,
  kDiverged,
  kPrerequisiteNotTrained,
  kUntrainedModel,
  kUnitOutOfRange,
  kMissingForwardCache,
  kMissingRelevance,
  kUntrainedEncoder,
  kSingleClass,
  kLengthMismatch,
  kNoDiscordantPairs,
  kClassTooSmall,
  kEmptyGroup,
  kTooFewSubjects,
  kInvalidConfig,
  kIoError,
};

constexpr std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::kNonSquare: return "NonSquare";
    case Errc::kAsymmetricBeyondTolerance: return "AsymmetricBeyondTolerance";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kNonFinite: return "NonFinite";
    case Errc::kUnknownActivation: return "UnknownActivation";
    case Errc::kNonPositiveTemperature: return "NonPositiveTemperature";
    case Errc::kInvalidProbability: return "InvalidProbability";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kNonFiniteLoss: return "NonFiniteLoss";
    case Errc::kZeroVariance: return "ZeroVariance";
    case Errc::kInvalidRatio: return "InvalidRatio";
    case Errc::kIndexOutOfRange: return "IndexOutOfRange";
    case Errc::kDegenerateCovariance: return "DegenerateCovariance";
    case Errc::kParseError: return "ParseError";
    case Errc::kMissingFile: return "MissingFile";
    case Errc::kDiverged: return "Diverged";
    case Errc::kPrerequisiteNotTrained: return "PrerequisiteNotTrained";
    case Errc::kUntrainedModel: return "UntrainedModel";
    case Errc::kUnitOutOfRange: return "UnitOutOfRange";
    case Errc::kMissingForwardCache: return "MissingForwardCache";
    case Errc::kMissingRelevance: return "MissingRelevance";
    case Errc::kUntrainedEncoder: return "UntrainedEncoder";
    case Errc::kSingleClass: return "SingleClass";
    case Errc::kLengthMismatch: return "LengthMismatch";
    case Errc::kNoDiscordantPairs: return "NoDiscordantPairs";
    case Errc::kClassTooSmall: return "ClassTooSmall";
    case Errc::kEmptyGroup: return "EmptyGroup";
    case Errc::kTooFewSubjects: return "TooFewSubjects";
    case Errc::kInvalidConfig: return "InvalidConfig";
    case Errc::kIoError: return "IoError";
  }
  return "Unknown";
}

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace eagrs
