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

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "spmvd/format.hpp"
#include "spmvd/plan.hpp"

namespace spmvd {

/// Block scratch ("shared memory") capacity: 48 KiB of doubles.
inline constexpr std::size_t kScratchDoubles = 48 * 1024 / sizeof(double);

enum class ExecMode { Deterministic, Parallel };
enum class Precision { F64, F32 };

struct ExecOptions {
  ExecMode mode = ExecMode::Deterministic;
  std::size_t workers = 1;
  Precision precision = Precision::F64;
  /// Adds 1 to the first partial written to y. Only for exercising the verifier.
  bool inject_fault = false;
};

/// Runs the plan over the bundle. Deterministic mode applies top-level block
/// results in ascending order, so the output does not depend on `workers`.
/// Throws OutOfBoundsRead, ScratchOverflow, MissingAdapter, MissingKey.
std::vector<double> execute_plan(const KernelPlan& plan, const FormatBundle& fmt, std::span<const double> x,
                                 const ExecOptions& opt = {});

/// Deterministic cost estimate of one launch of the plan on a generic GPU.
struct ModeledCost {
  double compute_seconds = 0;
  double memory_seconds = 0;
  double elapsed_seconds = 0;
  std::size_t bytes = 0;
  double block_cycles_sum = 0;
  double block_cycles_max = 0;
};

struct CostParams {
  double clock_hz = 1.4e9;
  double bandwidth = 450e9;
  double concurrent_blocks = 160;
  double launch_seconds = 1e-7;
  double issue_cycles = 4;
  std::size_t sector_bytes = 32;
  std::size_t atomic_bytes = 32;
};

ModeledCost model_cost(const KernelPlan& plan, const FormatBundle& fmt, const CostParams& params = {});

enum class TimingMode { Modeled, Wall };

struct BenchOptions {
  std::size_t reps = 1;
  std::size_t warmup = 0;
  TimingMode timing = TimingMode::Modeled;
  ExecOptions exec;
};

struct ExecutionReport {
  std::vector<double> y;
  double elapsed_seconds = 0;
  double gflops = 0;
  std::size_t bytes_touched = 0;
};

/// Wall timing takes the median over `reps` after `warmup` discarded runs and
/// holds a process-wide timing token while measuring.
ExecutionReport benchmark(const KernelPlan& plan, const FormatBundle& fmt, std::span<const double> x,
                          const BenchOptions& opt = {});

double median(std::vector<double> v);
/// 2 * nnz / elapsed / 1e9; 0 when elapsed <= 0.
double gflops_of(std::int64_t nnz, double elapsed_seconds);

}  // namespace spmvd
