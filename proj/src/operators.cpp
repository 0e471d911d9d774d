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

#include "spmvd/operators.hpp"

#include <array>

#include "spmvd/error.hpp"

namespace spmvd {

namespace {

struct KindInfo {
  OperatorKind kind;
  std::string_view name;
  Stage stage;
};

constexpr std::array<KindInfo, 25> kKinds = {{
    {OperatorKind::Input, "INPUT", Stage::Input},
    {OperatorKind::RowDiv, "ROW_DIV", Stage::Converting},
    {OperatorKind::ColDiv, "COL_DIV", Stage::Converting},
    {OperatorKind::Sort, "SORT", Stage::Converting},
    {OperatorKind::SortSub, "SORT_SUB", Stage::Converting},
    {OperatorKind::Bin, "BIN", Stage::Converting},
    {OperatorKind::Compress, "COMPRESS", Stage::Converting},
    {OperatorKind::BmtbRowBlock, "BMTB_ROW_BLOCK", Stage::Mapping},
    {OperatorKind::BmtbNnzBlock, "BMTB_NNZ_BLOCK", Stage::Mapping},
    {OperatorKind::BmwRowBlock, "BMW_ROW_BLOCK", Stage::Mapping},
    {OperatorKind::BmwNnzBlock, "BMW_NNZ_BLOCK", Stage::Mapping},
    {OperatorKind::BmtRowBlock, "BMT_ROW_BLOCK", Stage::Mapping},
    {OperatorKind::BmtNnzBlock, "BMT_NNZ_BLOCK", Stage::Mapping},
    {OperatorKind::BmtPad, "BMT_PAD", Stage::Mapping},
    {OperatorKind::SortBmtb, "SORT_BMTB", Stage::Mapping},
    {OperatorKind::SetResources, "SET_RESOURCES", Stage::Implementing},
    {OperatorKind::ThreadTotalRed, "THREAD_TOTAL_RED", Stage::Implementing},
    {OperatorKind::ThreadBitmapRed, "THREAD_BITMAP_RED", Stage::Implementing},
    {OperatorKind::WarpTotalRed, "WARP_TOTAL_RED", Stage::Implementing},
    {OperatorKind::WarpBitmapRed, "WARP_BITMAP_RED", Stage::Implementing},
    {OperatorKind::WarpSegRed, "WARP_SEG_RED", Stage::Implementing},
    {OperatorKind::ShmemTotalRed, "SHMEM_TOTAL_RED", Stage::Implementing},
    {OperatorKind::ShmemOffsetRed, "SHMEM_OFFSET_RED", Stage::Implementing},
    {OperatorKind::GmemAtomRed, "GMEM_ATOM_RED", Stage::Implementing},
}};

constexpr std::array<OperatorKind, 24> kOperatorKinds = [] {
  std::array<OperatorKind, 24> out{};
  for (std::size_t i = 1; i < kKinds.size(); ++i) out[i - 1] = kKinds[i].kind;
  return out;
}();

const KindInfo& info(OperatorKind k) { return kKinds[static_cast<std::size_t>(k)]; }

bool is_int(const ParamValue& v) { return std::holds_alternative<std::int64_t>(v); }
bool is_array(const ParamValue& v) { return std::holds_alternative<std::vector<std::int64_t>>(v); }
bool is_enum(const ParamValue& v) { return std::holds_alternative<std::string>(v); }

std::optional<std::string> require_int_at_least(const ParamMap& p, const std::string& name,
                                                std::int64_t min, bool complete) {
  auto it = p.find(name);
  if (it == p.end()) return complete ? std::optional<std::string>("missing " + name) : std::nullopt;
  if (!is_int(it->second)) return name + " must be an integer";
  if (std::get<std::int64_t>(it->second) < min) {
    return name + " must be >= " + std::to_string(min);
  }
  return std::nullopt;
}

std::optional<std::string> strictly_increasing(const std::vector<std::int64_t>& a,
                                               const std::string& name, std::int64_t lo) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < lo) return name + " entries must be >= " + std::to_string(lo);
    if (i > 0 && a[i] <= a[i - 1]) return name + " must be strictly increasing";
  }
  return std::nullopt;
}

}  // namespace

std::span<const OperatorKind> all_operator_kinds() { return kOperatorKinds; }

Stage stage_of(OperatorKind k) { return info(k).stage; }
std::string_view to_string(OperatorKind k) { return info(k).name; }

std::optional<OperatorKind> operator_kind_from_string(std::string_view s) {
  for (const auto& k : kKinds) {
    if (k.name == s) return k.kind;
  }
  // Names used by an earlier operator inventory.
  if (s == "WARP_SEG_ADD_RED") return OperatorKind::WarpSegRed;
  if (s == "THREAD_BITMAP_RED_G") return OperatorKind::ThreadBitmapRed;
  return std::nullopt;
}

std::string_view level_prefix(Level l) {
  switch (l) {
    case Level::Bmtb: return "bmtb";
    case Level::Bmw: return "bmw";
    case Level::Bmt: return "bmt";
  }
  return "";
}

bool is_block_op(OperatorKind k) {
  return k >= OperatorKind::BmtbRowBlock && k <= OperatorKind::BmtNnzBlock;
}

bool is_reduction(OperatorKind k) {
  return k >= OperatorKind::ThreadTotalRed && k <= OperatorKind::GmemAtomRed;
}

bool is_div(OperatorKind k) { return k == OperatorKind::RowDiv || k == OperatorKind::ColDiv; }

bool is_sort_family(OperatorKind k) {
  return k == OperatorKind::Sort || k == OperatorKind::SortSub || k == OperatorKind::Bin;
}

Level block_level(OperatorKind k) {
  switch (k) {
    case OperatorKind::BmtbRowBlock:
    case OperatorKind::BmtbNnzBlock: return Level::Bmtb;
    case OperatorKind::BmwRowBlock:
    case OperatorKind::BmwNnzBlock: return Level::Bmw;
    case OperatorKind::BmtRowBlock:
    case OperatorKind::BmtNnzBlock: return Level::Bmt;
    default: throw Error(ErrorCode::InvalidGraph, std::string(to_string(k)) + " is not a block operator");
  }
}

BlockKind block_kind(OperatorKind k) {
  switch (k) {
    case OperatorKind::BmtbRowBlock:
    case OperatorKind::BmwRowBlock:
    case OperatorKind::BmtRowBlock: return BlockKind::Row;
    case OperatorKind::BmtbNnzBlock:
    case OperatorKind::BmwNnzBlock:
    case OperatorKind::BmtNnzBlock: return BlockKind::Nnz;
    default: throw Error(ErrorCode::InvalidGraph, std::string(to_string(k)) + " is not a block operator");
  }
}

std::optional<Level> reduction_level(OperatorKind k) {
  switch (k) {
    case OperatorKind::ThreadTotalRed:
    case OperatorKind::ThreadBitmapRed: return Level::Bmt;
    case OperatorKind::WarpTotalRed:
    case OperatorKind::WarpBitmapRed:
    case OperatorKind::WarpSegRed: return Level::Bmw;
    case OperatorKind::ShmemTotalRed:
    case OperatorKind::ShmemOffsetRed: return Level::Bmtb;
    default: return std::nullopt;
  }
}

std::int64_t OperatorNode::get_int(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw Error(ErrorCode::MissingParam, std::string(to_string(kind)) + " needs " + name, id);
  }
  if (!is_int(it->second)) throw Error(ErrorCode::InvalidParam, name + " is not an integer", id);
  return std::get<std::int64_t>(it->second);
}

const std::vector<std::int64_t>& OperatorNode::get_array(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw Error(ErrorCode::MissingParam, std::string(to_string(kind)) + " needs " + name, id);
  }
  if (!is_array(it->second)) throw Error(ErrorCode::InvalidParam, name + " is not an array", id);
  return std::get<std::vector<std::int64_t>>(it->second);
}

const std::string& OperatorNode::get_enum(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) {
    throw Error(ErrorCode::MissingParam, std::string(to_string(kind)) + " needs " + name, id);
  }
  if (!is_enum(it->second)) throw Error(ErrorCode::InvalidParam, name + " is not an enum", id);
  return std::get<std::string>(it->second);
}

std::optional<std::string> check_params(OperatorKind kind, const ParamMap& p, bool complete) {
  auto allow_only = [&](std::initializer_list<std::string_view> names) -> std::optional<std::string> {
    for (const auto& [k, v] : p) {
      bool ok = false;
      for (auto n : names) ok = ok || n == k;
      if (!ok) return "unexpected parameter '" + k + "'";
    }
    return std::nullopt;
  };

  switch (kind) {
    case OperatorKind::Input:
    case OperatorKind::Sort:
    case OperatorKind::Compress:
    case OperatorKind::SortBmtb:
    case OperatorKind::ThreadTotalRed:
    case OperatorKind::ThreadBitmapRed:
    case OperatorKind::WarpTotalRed:
    case OperatorKind::WarpBitmapRed:
    case OperatorKind::WarpSegRed:
    case OperatorKind::ShmemTotalRed:
    case OperatorKind::ShmemOffsetRed:
    case OperatorKind::GmemAtomRed: return allow_only({});

    case OperatorKind::RowDiv: {
      if (auto e = allow_only({"cuts", "degree_pct", "max_cuts"})) return e;
      if (p.count("cuts")) {
        if (p.count("degree_pct") || p.count("max_cuts")) {
          return "ROW_DIV takes either cuts or degree_pct/max_cuts";
        }
        if (!is_array(p.at("cuts"))) return "cuts must be an array";
        const auto& c = std::get<std::vector<std::int64_t>>(p.at("cuts"));
        if (c.empty()) return "cuts must not be empty";
        return strictly_increasing(c, "cuts", 1);
      }
      if (p.count("degree_pct") || p.count("max_cuts")) {
        if (auto e = require_int_at_least(p, "degree_pct", 0, true)) return e;
        return require_int_at_least(p, "max_cuts", 1, true);
      }
      return complete ? std::optional<std::string>("ROW_DIV needs cuts or degree_pct/max_cuts")
                      : std::nullopt;
    }
    case OperatorKind::ColDiv: {
      if (auto e = allow_only({"cuts"})) return e;
      if (!p.count("cuts")) return complete ? std::optional<std::string>("missing cuts") : std::nullopt;
      if (!is_array(p.at("cuts"))) return "cuts must be an array";
      const auto& c = std::get<std::vector<std::int64_t>>(p.at("cuts"));
      if (c.empty()) return "cuts must not be empty";
      return strictly_increasing(c, "cuts", 1);
    }
    case OperatorKind::SortSub:
      if (auto e = allow_only({"group"})) return e;
      return require_int_at_least(p, "group", 2, complete);
    case OperatorKind::Bin: {
      if (auto e = allow_only({"thresholds"})) return e;
      if (!p.count("thresholds")) {
        return complete ? std::optional<std::string>("missing thresholds") : std::nullopt;
      }
      if (!is_array(p.at("thresholds"))) return "thresholds must be an array";
      const auto& t = std::get<std::vector<std::int64_t>>(p.at("thresholds"));
      if (t.empty()) return "thresholds must not be empty";
      return strictly_increasing(t, "thresholds", 0);
    }
    case OperatorKind::BmtbRowBlock:
    case OperatorKind::BmwRowBlock:
    case OperatorKind::BmtRowBlock:
      if (auto e = allow_only({"rows_per_block"})) return e;
      return require_int_at_least(p, "rows_per_block", 1, complete);
    case OperatorKind::BmtbNnzBlock:
    case OperatorKind::BmwNnzBlock:
    case OperatorKind::BmtNnzBlock:
      if (auto e = allow_only({"nnz_per_block"})) return e;
      return require_int_at_least(p, "nnz_per_block", 1, complete);
    case OperatorKind::BmtPad: {
      if (auto e = allow_only({"scope"})) return e;
      if (!p.count("scope")) return complete ? std::optional<std::string>("missing scope") : std::nullopt;
      if (!is_enum(p.at("scope"))) return "scope must be an enum";
      const auto& s = std::get<std::string>(p.at("scope"));
      if (s != "per_bmtb" && s != "global") return "scope must be per_bmtb or global";
      return std::nullopt;
    }
    case OperatorKind::SetResources: {
      if (auto e = allow_only({"threads_per_block"})) return e;
      if (!p.count("threads_per_block")) {
        return complete ? std::optional<std::string>("missing threads_per_block") : std::nullopt;
      }
      if (!is_int(p.at("threads_per_block"))) return "threads_per_block must be an integer";
      const auto t = std::get<std::int64_t>(p.at("threads_per_block"));
      if (t < 32 || t > 1024 || t % 32 != 0) {
        return "threads_per_block must be a multiple of 32 in [32, 1024]";
      }
      return std::nullopt;
    }
  }
  return std::nullopt;
}

std::optional<std::int64_t> stripe_count(const OperatorNode& node) {
  if (!is_div(node.kind)) return std::nullopt;
  if (auto it = node.params.find("cuts"); it != node.params.end() && is_array(it->second)) {
    return static_cast<std::int64_t>(std::get<std::vector<std::int64_t>>(it->second).size()) + 1;
  }
  if (auto it = node.params.find("max_cuts"); it != node.params.end() && is_int(it->second)) {
    return std::get<std::int64_t>(it->second) + 1;
  }
  return std::nullopt;
}

}  // namespace spmvd
