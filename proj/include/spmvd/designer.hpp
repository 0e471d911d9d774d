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
#include <span>
#include <vector>

#include "spmvd/graph.hpp"
#include "spmvd/matrix.hpp"
#include "spmvd/metadata.hpp"

namespace spmvd {

/// Runs every operator of a complete, valid graph against the matrix and
/// returns one namespace per leaf path. Errors carry the offending node id.
MetadataSet execute_graph(const OperatorGraph& g, const CooMatrix& m);

/// Namespace mirroring the COO arrays, before any operator ran.
Namespace initial_namespace(const CooMatrix& m);

void op_compress(Namespace& ns);
/// SORT, SORT_SUB(group) or BIN(thresholds).
void op_sort_family(Namespace& ns, const OperatorNode& node);
void op_block_family(Namespace& ns, OperatorKind kind, std::int64_t size);
void op_bmt_pad(Namespace& ns, PadScope scope);
void op_sort_bmtb(Namespace& ns);
void record_impl_choice(Namespace& ns, const OperatorNode& node);

/// Splits in current row order. Cuts must be strictly increasing in [1, n_rows-1].
std::vector<Namespace> op_row_div(const Namespace& ns, std::span<const std::int64_t> cuts);
/// Splits by column range; rows without entries in a stripe are dropped from it.
std::vector<Namespace> op_col_div(const Namespace& ns, std::span<const std::int64_t> cuts);

/// Row-length mutation discretization: positions r where
/// |len[r] - len[r-1]| >= degree * avg_row_len (and the length changes),
/// first `max_cuts` of them.
std::vector<std::int64_t> discretize_row_mutation(std::span<const std::int64_t> row_lengths,
                                                  double avg_row_len, double degree,
                                                  std::int64_t max_cuts);

/// Maps a namespace-local row (current order) to the row of the input matrix.
std::int64_t global_row(const Namespace& ns, std::int64_t local_row);

/// Removes pads and the row permutation, returning triplets in input-matrix
/// coordinates (rows and columns). Used to check semantics preservation.
CooMatrix reconstruct(const MetadataSet& ms);

/// Current block levels of a namespace, coarse to fine.
std::vector<Level> present_levels(const Namespace& ns);

}  // namespace spmvd
