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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spmvd/array_model.hpp"
#include "spmvd/format.hpp"
#include "spmvd/graph.hpp"
#include "spmvd/metadata.hpp"

namespace spmvd {

inline constexpr std::int64_t kDefaultThreadsPerBlock = 128;

struct LaunchGeometry {
  std::int64_t grid_blocks = 0;
  std::int64_t threads_per_block = kDefaultThreadsPerBlock;
  std::int64_t warp_size = kWarpSize;

  friend bool operator==(const LaunchGeometry&, const LaunchGeometry&) = default;
};

/// Where a stage keeps its results.
enum class Storage { None, Register, Lane, Lane0, Scratch, Any };
std::string_view to_string(Storage s);

struct LoopLevel {
  Level level = Level::Bmt;
  BlockKind block = BlockKind::Row;
  std::int64_t size = 1;
  /// Every parent block has exactly one child: the loop is elided.
  bool single_iteration = false;
  /// Padded BMTs under a parent: ranges come from bmt_sizes_of_bmtb.
  bool padded = false;

  friend bool operator==(const LoopLevel&, const LoopLevel&) = default;
};

enum class StageKind { Compute, Reduce, Adapter };

struct PipelineStage {
  StageKind kind = StageKind::Compute;
  OperatorKind op = OperatorKind::Input;
  std::optional<Level> level;
  Storage input = Storage::None;
  Storage output = Storage::None;
  std::string name;

  friend bool operator==(const PipelineStage&, const PipelineStage&) = default;
};

/// Per-nonzero row tags: none needed, the finest block's first row, or row_indices.
enum class RowSource { None, FinestBlock, RowIndices };

enum class AccessorKind { Array, Model, Fused };

struct Accessor {
  AccessorKind kind = AccessorKind::Array;
  std::string array;  // bundle name (Array, Fused)
  ArrayModel model;   // Model
  std::int64_t offset = 0;
  std::int64_t length = 0;

  friend bool operator==(const Accessor&, const Accessor&) = default;
};

/// A kernel piece and the metadata keys (part-local names) it reads.
struct Fragment {
  std::string name;
  std::vector<std::string> reads;

  friend bool operator==(const Fragment&, const Fragment&) = default;
};

/// Kernel for one namespace (one leaf path of the graph).
struct PlanPart {
  std::string prefix;  // "" for single-path graphs, "p<k>." otherwise
  std::int64_t n_rows = 0;
  std::int64_t n_cols = 0;
  std::int64_t row_base = 0;
  std::int64_t col_base = 0;
  std::int64_t nnz = 0;
  std::int64_t real_nnz = 0;
  std::int64_t top_blocks = 0;
  LaunchGeometry geometry;
  std::vector<LoopLevel> loops;
  RowSource row_source = RowSource::None;
  bool has_origin = false;
  bool has_stripe = false;
  bool pad_sizes_per_bmtb = false;
  std::vector<PipelineStage> pipeline;
  std::vector<Fragment> fragments;
  /// Part-local key -> how to read it. Keys absent here are read from the bundle.
  std::map<std::string, Accessor> accessors;

  std::optional<OperatorKind> reduction(Level l) const;
  friend bool operator==(const PlanPart&, const PlanPart&) = default;
};

struct KernelPlan {
  std::int64_t n_rows = 0;
  std::int64_t n_cols = 0;
  std::vector<PlanPart> parts;

  /// Sum of grid blocks, widest block.
  LaunchGeometry geometry() const;
  friend bool operator==(const KernelPlan&, const KernelPlan&) = default;
};

struct PlanOptions {
  /// Used when the graph has no SET_RESOURCES; 0 disables the default.
  std::int64_t default_threads_per_block = kDefaultThreadsPerBlock;
};

/// Throws MissingResource, IncompatibleReduction (a *_TOTAL_RED over blocks
/// spanning several rows) or NoAdapterRule.
KernelPlan build_plan(const OperatorGraph& g, const MetadataSet& ms, const PlanOptions& opt = {});

/// Interposes storage-class adapters between mismatched stages. Idempotent.
KernelPlan insert_adapters(KernelPlan plan);

/// Metadata keys read by any fragment, prefixed per part, in first-use order.
std::vector<std::string> required_keys(const KernelPlan& plan);

struct CompressionOptions {
  std::size_t patch_budget = kDefaultPatchBudget;
  /// Concatenate short int32 arrays into one "fused_i32" array.
  bool fuse_short_arrays = false;
  std::size_t fuse_max_length = 256;
};

/// Replaces fitted arrays by model accessors and drops them from the bundle.
std::pair<KernelPlan, FormatBundle> apply_compression(const KernelPlan& plan, const FormatBundle& fmt,
                                                      const CompressionOptions& opt = {});

/// Documentary pseudo-C listing.
std::string emit_source(const KernelPlan& plan, const FormatBundle& fmt);

std::string serialize_plan(const KernelPlan& plan);
KernelPlan parse_plan(const std::string& text);

}  // namespace spmvd
