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
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spmvd {

using Index = std::int64_t;

/// Sparse matrix in coordinate form, sorted by (row, col), duplicate free,
/// with at least one entry per row. Construct through `CooMatrix::from_triplets`
/// or the Matrix Market reader; both enforce the invariants.
struct CooMatrix {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<Index> row_idx;
  std::vector<Index> col_idx;
  std::vector<double> values;

  Index nnz() const { return static_cast<Index>(values.size()); }

  /// Sorts the triplets and validates every invariant. Throws spmvd::Error.
  static CooMatrix from_triplets(Index n_rows, Index n_cols, std::vector<Index> rows,
                                 std::vector<Index> cols, std::vector<double> vals);

  friend bool operator==(const CooMatrix&, const CooMatrix&) = default;
};

struct MatrixStats {
  Index n_rows = 0;
  Index n_cols = 0;
  Index nnz = 0;
  double avg_row_len = 0.0;
  double row_len_variance = 0.0;
  Index max_row_len = 0;
  Index min_row_len = 0;

  bool is_irregular() const { return row_len_variance > 100.0; }
};

CooMatrix parse_matrix_market(std::string_view text);
CooMatrix read_matrix_market(const std::filesystem::path& path);

/// General real coordinate format, 1-based, full precision.
std::string write_matrix_market(const CooMatrix& m);

MatrixStats compute_stats(const CooMatrix& m);

std::vector<Index> row_lengths(const CooMatrix& m);

/// Reference y = A x, accumulated in storage order.
std::vector<double> spmv_oracle(const CooMatrix& m, std::span<const double> x);

/// Binary cache: "SPMVCOO1", then little-endian int64 n_rows, n_cols, nnz,
/// followed by row indices (int64), col indices (int64), values (float64).
void write_coo_cache(const CooMatrix& m, const std::filesystem::path& path);
CooMatrix read_coo_cache(const std::filesystem::path& path);

}  // namespace spmvd
