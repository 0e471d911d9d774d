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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <vector>

#include "spmvd/config.hpp"

namespace spmvd {

enum ExitCode : int {
  kExitOk = 0,
  kExitIngest = 1,
  kExitNoDesign = 2,
  kExitMismatch = 3,
  kExitVerifyFailed = 4,
};

/// Searches a design for the matrix and writes best.graph.json, best.plan.json,
/// best.format/, best.kernel.txt and search.log.csv under cfg.out.
int cmd_design(const std::filesystem::path& matrix, const Config& cfg, std::ostream& out, std::ostream& err);

/// Runs a saved design. When "<stem>.plan.json" and "<stem>.format/" sit next
/// to "<stem>.graph.json" they are used as saved, otherwise the design is
/// rebuilt from the graph. `x_path` holds whitespace-separated values; ones
/// when absent.
int cmd_run(const std::filesystem::path& graph, const std::filesystem::path& matrix,
            const std::optional<std::filesystem::path>& x_path, const Config& cfg, std::ostream& out,
            std::ostream& err);

struct VerifyOptions {
  std::size_t count = 200;
  std::uint64_t seed = 1;
  std::size_t workers = 4;
  bool inject_fault = false;
  std::filesystem::path repro_dir = "spmvd_repro";
};

/// Random (matrix, design) pairs checked against the oracle in deterministic
/// and parallel modes. Writes a shrunken repro on the first failure.
int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err);

/// FNV-1a over the bytes of y, as 16 hex digits.
std::string checksum(const std::vector<double>& y);

}  // namespace spmvd
