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

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace spmvd {

enum class ErrorCode {
  // ingestion
  MalformedHeader,
  IndexOutOfRange,
  DuplicateEntry,
  EmptyRow,
  DimensionMismatch,
  Io,
  // graph
  UnknownNode,
  ParseError,
  InvalidGraph,
  InvalidParam,
  MissingParam,
  DeadEnd,
  // designer / generators
  BadThresholds,
  SizeZero,
  MissingKey,
  UnknownFragment,
  MissingResource,
  NoAdapterRule,
  IncompatibleReduction,
  // executor
  OutOfBoundsRead,
  ScratchOverflow,
  MissingAdapter,
  // search
  TooFewSamples,
  NoFeasibleDesign,
  OracleMismatch,
  // config
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library. `node` carries the offending
/// operator node id when the failure happened while executing a graph.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<int> node = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<int> node() const noexcept { return node_; }

 private:
  ErrorCode code_;
  std::optional<int> node_;
};

}  // namespace spmvd
