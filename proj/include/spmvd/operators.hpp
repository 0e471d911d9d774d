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
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace spmvd {

enum class Stage { Input, Converting, Mapping, Implementing };

enum class OperatorKind {
  Input,
  // converting
  RowDiv,
  ColDiv,
  Sort,
  SortSub,
  Bin,
  Compress,
  // mapping
  BmtbRowBlock,
  BmtbNnzBlock,
  BmwRowBlock,
  BmwNnzBlock,
  BmtRowBlock,
  BmtNnzBlock,
  BmtPad,
  SortBmtb,
  // implementing
  SetResources,
  ThreadTotalRed,
  ThreadBitmapRed,
  WarpTotalRed,
  WarpBitmapRed,
  WarpSegRed,
  ShmemTotalRed,
  ShmemOffsetRed,
  GmemAtomRed,
};

/// Every operator kind except Input, in declaration order.
std::span<const OperatorKind> all_operator_kinds();

Stage stage_of(OperatorKind k);
std::string_view to_string(OperatorKind k);
std::optional<OperatorKind> operator_kind_from_string(std::string_view s);

/// Parallelism levels, coarse to fine.
enum class Level { Bmtb = 0, Bmw = 1, Bmt = 2 };
enum class BlockKind { Row, Nnz };

std::string_view level_prefix(Level l);  // "bmtb", "bmw", "bmt"

bool is_block_op(OperatorKind k);
bool is_reduction(OperatorKind k);
bool is_div(OperatorKind k);
bool is_sort_family(OperatorKind k);
/// Level and block kind of a *_BLOCK operator.
Level block_level(OperatorKind k);
BlockKind block_kind(OperatorKind k);
/// Level served by a reduction: THREAD_* -> Bmt, WARP_* -> Bmw, SHMEM_* -> Bmtb.
/// GMEM_ATOM_RED has no level.
std::optional<Level> reduction_level(OperatorKind k);

inline constexpr std::int64_t kWarpSize = 32;

enum class PadScope { PerBmtb, Global };

using ParamValue = std::variant<std::int64_t, std::vector<std::int64_t>, std::string>;
using ParamMap = std::map<std::string, ParamValue>;

struct OperatorNode {
  int id = 0;
  OperatorKind kind = OperatorKind::Input;
  ParamMap params;

  bool has(const std::string& name) const { return params.count(name) != 0; }
  std::int64_t get_int(const std::string& name) const;
  const std::vector<std::int64_t>& get_array(const std::string& name) const;
  const std::string& get_enum(const std::string& name) const;

  friend bool operator==(const OperatorNode&, const OperatorNode&) = default;
};

/// Returns an error message when `params` violate the kind's schema. When
/// `require_complete` is false, missing parameters are accepted (structure-only
/// graphs produced by enumeration).
std::optional<std::string> check_params(OperatorKind kind, const ParamMap& params,
                                        bool require_complete);

/// Number of stripes a ROW_DIV / COL_DIV node produces, if its params fix it.
std::optional<std::int64_t> stripe_count(const OperatorNode& node);

}  // namespace spmvd
