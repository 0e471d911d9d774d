// Copyright 2026 The spmvd Authors
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

#include "spmvd/error.hpp"

namespace spmvd {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::EmptyRow: return "EmptyRow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InvalidGraph: return "InvalidGraph";
    case ErrorCode::InvalidParam: return "InvalidParam";
    case ErrorCode::MissingParam: return "MissingParam";
    case ErrorCode::DeadEnd: return "DeadEnd";
    case ErrorCode::BadThresholds: return "BadThresholds";
    case ErrorCode::SizeZero: return "SizeZero";
    case ErrorCode::MissingKey: return "MissingKey";
    case ErrorCode::UnknownFragment: return "UnknownFragment";
    case ErrorCode::MissingResource: return "MissingResource";
    case ErrorCode::NoAdapterRule: return "NoAdapterRule";
    case ErrorCode::IncompatibleReduction: return "IncompatibleReduction";
    case ErrorCode::OutOfBoundsRead: return "OutOfBoundsRead";
    case ErrorCode::ScratchOverflow: return "ScratchOverflow";
    case ErrorCode::MissingAdapter: return "MissingAdapter";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NoFeasibleDesign: return "NoFeasibleDesign";
    case ErrorCode::OracleMismatch: return "OracleMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::optional<int> node)
    : std::runtime_error(std::string(to_string(code)) + ": " + message +
                         (node ? " (node " + std::to_string(*node) + ")" : std::string())),
      code_(code),
      node_(node) {}

}  // namespace spmvd
