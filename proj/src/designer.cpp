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

#include "spmvd/designer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spmvd/error.hpp"

namespace spmvd {

namespace {

std::string key(Level l, const char* suffix) { return std::string(level_prefix(l)) + suffix; }

IntArray iota_array(std::int64_t n) {
  IntArray a(static_cast<std::size_t>(n));
  std::iota(a.begin(), a.end(), 0);
  return a;
}

std::int64_t nnz_of(const Namespace& ns) { return static_cast<std::int64_t>(ns.ints("row_indices").size()); }

// CSR-style row starts of the current (row-major) entry order.
IntArray row_starts(const Namespace& ns) {
  const auto n = ns.scalar("n_rows");
  IntArray start(static_cast<std::size_t>(n) + 1, 0);
  for (auto r : ns.ints("row_indices")) ++start[static_cast<std::size_t>(r) + 1];
  for (std::size_t i = 1; i < start.size(); ++i) start[i] += start[i - 1];
  return start;
}

IntArray lengths_from_starts(const IntArray& start) {
  IntArray len(start.size() - 1);
  for (std::size_t r = 0; r + 1 < start.size(); ++r) len[r] = start[r + 1] - start[r];
  return len;
}

// perm[new_position] = old_position.
void apply_row_permutation(Namespace& ns, const IntArray& perm) {
  const auto start = row_starts(ns);
  const auto& rows = ns.ints("row_indices");
  const auto& cols = ns.ints("col_indices");
  const auto& vals = ns.reals("values");
  IntArray nr, nc;
  RealArray nv;
  nr.reserve(rows.size());
  nc.reserve(rows.size());
  nv.reserve(rows.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    const auto r = static_cast<std::size_t>(perm[i]);
    for (auto p = start[r]; p < start[r + 1]; ++p) {
      nr.push_back(static_cast<std::int64_t>(i));
      nc.push_back(cols[static_cast<std::size_t>(p)]);
      nv.push_back(vals[static_cast<std::size_t>(p)]);
    }
  }
  const IntArray old_origin =
      ns.has("origin_rows") ? ns.ints("origin_rows") : iota_array(static_cast<std::int64_t>(perm.size()));
  IntArray origin(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) origin[i] = old_origin[static_cast<std::size_t>(perm[i])];
  if (ns.has("row_lengths")) {
    const auto old = ns.ints("row_lengths");
    IntArray len(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) len[i] = old[static_cast<std::size_t>(perm[i])];
    ns.set("row_lengths", std::move(len));
  }
  ns.set("row_indices", std::move(nr));
  ns.set("col_indices", std::move(nc));
  ns.set("values", std::move(nv));
  ns.set("origin_rows", std::move(origin));
}

void stable_sort_desc(IntArray& perm, std::size_t lo, std::size_t hi, const IntArray& len) {
  std::stable_sort(perm.begin() + static_cast<std::ptrdiff_t>(lo), perm.begin() + static_cast<std::ptrdiff_t>(hi),
                   [&](std::int64_t a, std::int64_t b) {
                     return len[static_cast<std::size_t>(a)] > len[static_cast<std::size_t>(b)];
                   });
}

// Nearest present level coarser than `l`.
std::optional<Level> parent_level(const Namespace& ns, Level l) {
  std::optional<Level> out;
  for (Level p : present_levels(ns)) {
    if (static_cast<int>(p) < static_cast<int>(l)) out = p;
  }
  return out;
}

// A "partial" is one intermediate result: its row and the first nonzero feeding it.
struct Partial {
  std::int64_t row;
  std::int64_t nz;
};

enum class Group { Total, Runs };

std::vector<Partial> group_partials(const std::vector<Partial>& in, const IntArray& nz_offsets, Group mode) {
  std::vector<Partial> out;
  std::size_t i = 0;
  for (std::size_t b = 0; b + 1 < nz_offsets.size(); ++b) {
    const auto end = nz_offsets[b + 1];
    bool first = true;
    while (i < in.size() && in[i].nz < end) {
      if (first || (mode == Group::Runs && in[i].row != out.back().row)) out.push_back(in[i]);
      first = false;
      ++i;
    }
  }
  return out;
}

void record_shmem_offsets(Namespace& ns) {
  const auto& rows = ns.ints("row_indices");
  std::vector<Partial> parts;
  parts.reserve(rows.size());
  for (std::size_t p = 0; p < rows.size(); ++p) parts.push_back({rows[p], static_cast<std::int64_t>(p)});
  if (ns.has("red_bmt")) {
    const auto k = static_cast<OperatorKind>(ns.scalar("red_bmt"));
    parts = group_partials(parts, ns.ints("bmt_nz_offsets"),
                           k == OperatorKind::ThreadTotalRed ? Group::Total : Group::Runs);
  }
  if (ns.has("red_bmw")) {
    const auto k = static_cast<OperatorKind>(ns.scalar("red_bmw"));
    parts = group_partials(parts, ns.ints("bmw_nz_offsets"),
                           k == OperatorKind::WarpTotalRed ? Group::Total : Group::Runs);
  }
  const auto& blocks = ns.ints("bmtb_nz_offsets");
  IntArray offsets, starts;
  std::size_t i = 0;
  for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
    starts.push_back(static_cast<std::int64_t>(offsets.size()));
    std::int64_t count = 0;
    std::int64_t prev_row = -1;
    while (i < parts.size() && parts[i].nz < blocks[b + 1]) {
      if (count == 0 || parts[i].row != prev_row) offsets.push_back(count);
      prev_row = parts[i].row;
      ++count;
      ++i;
    }
    offsets.push_back(count);
  }
  starts.push_back(static_cast<std::int64_t>(offsets.size()));
  ns.set("reduce_row_offsets", std::move(offsets));
  ns.set("reduce_block_starts", std::move(starts));
}

// Bit i marks a row boundary: entry i starts a different row than entry i-1.
void record_row_bitmap(Namespace& ns) {
  const auto& rows = ns.ints("row_indices");
  IntArray words((rows.size() + 31) / 32, 0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 || rows[i] != rows[i - 1]) words[i / 32] |= std::int64_t{1} << (i % 32);
  }
  ns.set("nz_row_bitmap", std::move(words));
}

Namespace make_child(const Namespace& parent) {
  Namespace c;
  c.set_writer(parent.writer());
  c.set("n_cols", parent.scalar("n_cols"));
  c.set("col_base", parent.scalar("col_base"));
  c.set("row_base", parent.scalar("row_base"));
  return c;
}

bool has_row_remap(const Namespace& ns) { return ns.has("origin_rows") || ns.has("stripe_rows"); }

void execute_from(const OperatorGraph& g, int id, Namespace ns, MetadataSet& out) {
  const auto& node = g.node(id);
  const auto& kids = g.children(id);
  ns.set_writer(id);
  try {
    switch (node.kind) {
      case OperatorKind::Input: break;
      case OperatorKind::RowDiv:
      case OperatorKind::ColDiv: {
        std::vector<Namespace> parts;
        if (node.kind == OperatorKind::ColDiv) {
          parts = op_col_div(ns, node.get_array("cuts"));
        } else if (node.has("cuts")) {
          parts = op_row_div(ns, node.get_array("cuts"));
        } else {
          const auto len = lengths_from_starts(row_starts(ns));
          const auto n = static_cast<double>(len.size());
          const double avg = n > 0 ? static_cast<double>(nnz_of(ns)) / n : 0.0;
          const auto max_cuts = node.get_int("max_cuts");
          auto cuts = discretize_row_mutation(len, avg, static_cast<double>(node.get_int("degree_pct")) / 100.0,
                                              max_cuts);
          if (static_cast<std::int64_t>(cuts.size()) < max_cuts) {
            throw Error(ErrorCode::InvalidParam, "only " + std::to_string(cuts.size()) +
                                                     " row-length mutation points, need " +
                                                     std::to_string(max_cuts));
          }
          parts = op_row_div(ns, cuts);
        }
        if (kids.empty()) {
          for (auto& p : parts) {
            p.set("path_leaf", static_cast<std::int64_t>(id));
            out.namespaces.push_back(std::move(p));
          }
          return;
        }
        if (parts.size() != kids.size()) {
          throw Error(ErrorCode::InvalidGraph, "stripe count differs from child count");
        }
        for (std::size_t i = 0; i < kids.size(); ++i) execute_from(g, kids[i], std::move(parts[i]), out);
        return;
      }
      case OperatorKind::Sort:
      case OperatorKind::SortSub:
      case OperatorKind::Bin: op_sort_family(ns, node); break;
      case OperatorKind::Compress: op_compress(ns); break;
      case OperatorKind::BmtbRowBlock:
      case OperatorKind::BmwRowBlock:
      case OperatorKind::BmtRowBlock: op_block_family(ns, node.kind, node.get_int("rows_per_block")); break;
      case OperatorKind::BmtbNnzBlock:
      case OperatorKind::BmwNnzBlock:
      case OperatorKind::BmtNnzBlock: op_block_family(ns, node.kind, node.get_int("nnz_per_block")); break;
      case OperatorKind::BmtPad:
        op_bmt_pad(ns, node.get_enum("scope") == "global" ? PadScope::Global : PadScope::PerBmtb);
        break;
      case OperatorKind::SortBmtb: op_sort_bmtb(ns); break;
      default: record_impl_choice(ns, node); break;
    }
  } catch (const Error& e) {
    if (e.node()) throw;
    const std::string msg = e.what();
    const auto colon = msg.find(": ");
    throw Error(e.code(), colon == std::string::npos ? msg : msg.substr(colon + 2), id);
  }
  if (kids.empty()) {
    ns.set("path_leaf", static_cast<std::int64_t>(id));
    out.namespaces.push_back(std::move(ns));
    return;
  }
  execute_from(g, kids.front(), std::move(ns), out);
}

}  // namespace

std::vector<Level> present_levels(const Namespace& ns) {
  std::vector<Level> out;
  for (Level l : {Level::Bmtb, Level::Bmw, Level::Bmt}) {
    if (ns.has(key(l, "_nz_offsets"))) out.push_back(l);
  }
  return out;
}

Namespace initial_namespace(const CooMatrix& m) {
  Namespace ns;
  ns.set("n_rows", m.n_rows);
  ns.set("n_cols", m.n_cols);
  ns.set("nnz", m.nnz());
  ns.set("real_nnz", m.nnz());
  ns.set("row_base", std::int64_t{0});
  ns.set("col_base", std::int64_t{0});
  ns.set("row_indices", IntArray(m.row_idx.begin(), m.row_idx.end()));
  ns.set("col_indices", IntArray(m.col_idx.begin(), m.col_idx.end()));
  ns.set("values", RealArray(m.values.begin(), m.values.end()));
  return ns;
}

std::int64_t global_row(const Namespace& ns, std::int64_t local_row) {
  const auto o = ns.has("origin_rows") ? ns.ints("origin_rows")[static_cast<std::size_t>(local_row)] : local_row;
  if (ns.has("stripe_rows")) return ns.ints("stripe_rows")[static_cast<std::size_t>(o)];
  return ns.scalar("row_base") + o;
}

void op_compress(Namespace& ns) {
  ns.set("row_lengths", lengths_from_starts(row_starts(ns)));
  ns.set("compressed", std::int64_t{1});
}

void op_sort_family(Namespace& ns, const OperatorNode& node) {
  const auto len = lengths_from_starts(row_starts(ns));
  auto perm = iota_array(static_cast<std::int64_t>(len.size()));
  switch (node.kind) {
    case OperatorKind::Sort: stable_sort_desc(perm, 0, perm.size(), len); break;
    case OperatorKind::SortSub: {
      const auto g = node.get_int("group");
      if (g < 2) throw Error(ErrorCode::InvalidParam, "SORT_SUB group must be >= 2");
      for (std::size_t lo = 0; lo < perm.size(); lo += static_cast<std::size_t>(g)) {
        stable_sort_desc(perm, lo, std::min(perm.size(), lo + static_cast<std::size_t>(g)), len);
      }
      break;
    }
    case OperatorKind::Bin: {
      const auto& t = node.get_array("thresholds");
      if (t.empty() || std::adjacent_find(t.begin(), t.end(), std::greater_equal<>()) != t.end()) {
        throw Error(ErrorCode::BadThresholds, "thresholds must be strictly ascending");
      }
      auto bin_of = [&](std::int64_t r) {
        const auto l = len[static_cast<std::size_t>(r)];
        return static_cast<std::size_t>(std::lower_bound(t.begin(), t.end(), l) - t.begin());
      };
      std::stable_sort(perm.begin(), perm.end(), [&](auto a, auto b) { return bin_of(a) < bin_of(b); });
      IntArray offsets(t.size() + 2, 0);
      for (auto r : perm) ++offsets[bin_of(r) + 1];
      for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
      ns.set("bin_offsets", std::move(offsets));
      break;
    }
    default: throw Error(ErrorCode::InvalidGraph, "not a sort operator");
  }
  apply_row_permutation(ns, perm);
}

void op_block_family(Namespace& ns, OperatorKind kind, std::int64_t size) {
  if (size < 1) throw Error(ErrorCode::SizeZero, "block size must be >= 1");
  const Level lvl = block_level(kind);
  const auto& rows = ns.ints("row_indices");
  const auto nnz = static_cast<std::int64_t>(rows.size());
  const auto parent = parent_level(ns, lvl);
  const IntArray outer = parent ? ns.ints(key(*parent, "_nz_offsets")) : IntArray{0, nnz};

  IntArray nz_offsets, row_offsets, parent_child;
  for (std::size_t b = 0; b + 1 < outer.size(); ++b) {
    parent_child.push_back(static_cast<std::int64_t>(nz_offsets.size()));
    const auto s = outer[b], e = outer[b + 1];
    if (block_kind(kind) == BlockKind::Nnz) {
      for (auto p = s; p < e; p += size) {
        nz_offsets.push_back(p);
        row_offsets.push_back(rows[static_cast<std::size_t>(p)]);
      }
    } else {
      std::int64_t runs = 0;
      for (auto p = s; p < e; ++p) {
        if (p != s && rows[static_cast<std::size_t>(p)] == rows[static_cast<std::size_t>(p - 1)]) continue;
        if (runs % size == 0) {
          nz_offsets.push_back(p);
          row_offsets.push_back(rows[static_cast<std::size_t>(p)]);
        }
        ++runs;
      }
    }
  }
  const auto count = static_cast<std::int64_t>(nz_offsets.size());
  parent_child.push_back(count);
  nz_offsets.push_back(nnz);

  ns.set(key(lvl, "_nz_offsets"), std::move(nz_offsets));
  if (block_kind(kind) == BlockKind::Row) {
    row_offsets.push_back(ns.scalar("n_rows"));
    ns.set(key(lvl, "_row_offsets"), std::move(row_offsets));
    ns.set(key(lvl, "_kind"), std::int64_t{0});
  } else {
    ns.set("first_row_of_" + std::string(level_prefix(lvl)), std::move(row_offsets));
    ns.set(key(lvl, "_kind"), std::int64_t{1});
  }
  ns.set(key(lvl, "_size"), size);
  ns.set("n_" + std::string(level_prefix(lvl)), count);
  if (parent) {
    ns.set(std::string(level_prefix(*parent)) + "_" + std::string(level_prefix(lvl)) + "_offsets",
           std::move(parent_child));
  }
}

void op_bmt_pad(Namespace& ns, PadScope scope) {
  const auto bmt = ns.ints("bmt_nz_offsets");
  const auto n_bmt = bmt.size() - 1;
  // BMT index ranges of each padding group.
  IntArray groups;
  if (scope == PadScope::PerBmtb && ns.has("bmtb_nz_offsets")) {
    const auto& bmtb = ns.ints("bmtb_nz_offsets");
    std::size_t t = 0;
    for (std::size_t b = 0; b + 1 < bmtb.size(); ++b) {
      groups.push_back(static_cast<std::int64_t>(t));
      while (t < n_bmt && bmt[t] < bmtb[b + 1]) ++t;
    }
    groups.push_back(static_cast<std::int64_t>(n_bmt));
  } else {
    groups = {0, static_cast<std::int64_t>(n_bmt)};
  }

  const auto& rows = ns.ints("row_indices");
  const auto& cols = ns.ints("col_indices");
  const auto& vals = ns.reals("values");
  const IntArray old_flags = ns.has("pad_flags") ? ns.ints("pad_flags") : IntArray(rows.size(), 0);
  IntArray nr, nc, nf, sizes, new_bmt;
  RealArray nv;
  std::vector<std::int64_t> remap(rows.size() + 1, -1);
  for (std::size_t gi = 0; gi + 1 < groups.size(); ++gi) {
    std::int64_t width = 0;
    for (auto t = groups[gi]; t < groups[gi + 1]; ++t) {
      width = std::max(width, bmt[static_cast<std::size_t>(t) + 1] - bmt[static_cast<std::size_t>(t)]);
    }
    sizes.push_back(width);
    for (auto t = static_cast<std::size_t>(groups[gi]); t < static_cast<std::size_t>(groups[gi + 1]); ++t) {
      remap[static_cast<std::size_t>(bmt[t])] = static_cast<std::int64_t>(nr.size());
      new_bmt.push_back(static_cast<std::int64_t>(nr.size()));
      for (auto p = bmt[t]; p < bmt[t + 1]; ++p) {
        const auto q = static_cast<std::size_t>(p);
        nr.push_back(rows[q]);
        nc.push_back(cols[q]);
        nv.push_back(vals[q]);
        nf.push_back(old_flags[q]);
      }
      const auto last = static_cast<std::size_t>(bmt[t + 1] - 1);
      for (auto k = bmt[t + 1] - bmt[t]; k < width; ++k) {
        nr.push_back(rows[last]);
        nc.push_back(cols[last]);
        nv.push_back(0.0);
        nf.push_back(1);
      }
    }
  }
  remap[rows.size()] = static_cast<std::int64_t>(nr.size());
  new_bmt.push_back(static_cast<std::int64_t>(nr.size()));

  for (Level l : {Level::Bmtb, Level::Bmw}) {
    const auto k = key(l, "_nz_offsets");
    if (!ns.has(k)) continue;
    auto& a = ns.ints(k);
    for (auto& v : a) v = remap[static_cast<std::size_t>(v)];
  }
  ns.set("bmt_nz_offsets", std::move(new_bmt));
  ns.set("bmt_sizes_of_bmtb", std::move(sizes));
  ns.set("pad_scope", std::int64_t{scope == PadScope::Global ? 1 : 0});
  ns.set("nnz", static_cast<std::int64_t>(nr.size()));
  ns.set("row_indices", std::move(nr));
  ns.set("col_indices", std::move(nc));
  ns.set("values", std::move(nv));
  ns.set("pad_flags", std::move(nf));
}

void op_sort_bmtb(Namespace& ns) {
  if (!ns.has("bmtb_row_offsets")) throw Error(ErrorCode::MissingKey, "bmtb_row_offsets");
  const auto len = lengths_from_starts(row_starts(ns));
  auto perm = iota_array(static_cast<std::int64_t>(len.size()));
  const auto& ro = ns.ints("bmtb_row_offsets");
  for (std::size_t b = 0; b + 1 < ro.size(); ++b) {
    stable_sort_desc(perm, static_cast<std::size_t>(ro[b]), static_cast<std::size_t>(ro[b + 1]), len);
  }
  apply_row_permutation(ns, perm);
}

void record_impl_choice(Namespace& ns, const OperatorNode& node) {
  const auto code = static_cast<std::int64_t>(node.kind);
  switch (node.kind) {
    case OperatorKind::SetResources: ns.set("threads_per_block", node.get_int("threads_per_block")); return;
    case OperatorKind::GmemAtomRed: ns.set("red_gmem", code); return;
    case OperatorKind::ShmemOffsetRed:
      ns.set("red_bmtb", code);
      record_shmem_offsets(ns);
      return;
    case OperatorKind::ThreadBitmapRed:
    case OperatorKind::WarpBitmapRed:
      record_row_bitmap(ns);
      break;
    default: break;
  }
  if (auto lvl = reduction_level(node.kind)) {
    ns.set("red_" + std::string(level_prefix(*lvl)), code);
    return;
  }
  throw Error(ErrorCode::InvalidGraph, std::string(to_string(node.kind)) + " is not an implementing operator");
}

std::vector<Namespace> op_row_div(const Namespace& ns, std::span<const std::int64_t> cuts) {
  const auto n = ns.scalar("n_rows");
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (cuts[i] < 1 || cuts[i] > n - 1 || (i && cuts[i] <= cuts[i - 1])) {
      throw Error(ErrorCode::InvalidParam, "ROW_DIV cuts must be strictly increasing in [1, n_rows-1]");
    }
  }
  const auto start = row_starts(ns);
  const auto& rows = ns.ints("row_indices");
  const auto& cols = ns.ints("col_indices");
  const auto& vals = ns.reals("values");
  std::vector<std::int64_t> bounds{0};
  bounds.insert(bounds.end(), cuts.begin(), cuts.end());
  bounds.push_back(n);

  std::vector<Namespace> out;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    const auto a = bounds[s], b = bounds[s + 1];
    Namespace c = make_child(ns);
    c.set("n_rows", b - a);
    if (has_row_remap(ns)) {
      IntArray stripe;
      for (auto r = a; r < b; ++r) stripe.push_back(global_row(ns, r));
      c.set("stripe_rows", std::move(stripe));
      c.set("row_base", std::int64_t{0});
    } else {
      c.set("row_base", ns.scalar("row_base") + a);
    }
    const auto lo = static_cast<std::size_t>(start[static_cast<std::size_t>(a)]);
    const auto hi = static_cast<std::size_t>(start[static_cast<std::size_t>(b)]);
    IntArray nr;
    for (auto p = lo; p < hi; ++p) nr.push_back(rows[p] - a);
    c.set("row_indices", std::move(nr));
    c.set("col_indices", IntArray(cols.begin() + static_cast<std::ptrdiff_t>(lo), cols.begin() + static_cast<std::ptrdiff_t>(hi)));
    c.set("values", RealArray(vals.begin() + static_cast<std::ptrdiff_t>(lo), vals.begin() + static_cast<std::ptrdiff_t>(hi)));
    c.set("nnz", static_cast<std::int64_t>(hi - lo));
    c.set("real_nnz", static_cast<std::int64_t>(hi - lo));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Namespace> op_col_div(const Namespace& ns, std::span<const std::int64_t> cuts) {
  const auto n_cols = ns.scalar("n_cols");
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (cuts[i] < 1 || cuts[i] > n_cols - 1 || (i && cuts[i] <= cuts[i - 1])) {
      throw Error(ErrorCode::InvalidParam, "COL_DIV cuts must be strictly increasing in [1, n_cols-1]");
    }
  }
  const auto& rows = ns.ints("row_indices");
  const auto& cols = ns.ints("col_indices");
  const auto& vals = ns.reals("values");
  const auto n_rows = ns.scalar("n_rows");
  std::vector<std::int64_t> bounds{0};
  bounds.insert(bounds.end(), cuts.begin(), cuts.end());
  bounds.push_back(n_cols);

  std::vector<Namespace> out;
  for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
    const auto a = bounds[s], b = bounds[s + 1];
    Namespace c = make_child(ns);
    c.set("n_cols", b - a);
    c.set("col_base", ns.scalar("col_base") + a);
    IntArray nr, nc, kept;
    RealArray nv;
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (cols[p] < a || cols[p] >= b) continue;
      if (kept.empty() || kept.back() != rows[p]) kept.push_back(rows[p]);
      nr.push_back(static_cast<std::int64_t>(kept.size()) - 1);
      nc.push_back(cols[p] - a);
      nv.push_back(vals[p]);
    }
    const auto kept_rows = static_cast<std::int64_t>(kept.size());
    if (kept_rows == n_rows && !has_row_remap(ns)) {
      c.set("row_base", ns.scalar("row_base"));
    } else {
      IntArray stripe;
      for (auto r : kept) stripe.push_back(global_row(ns, r));
      c.set("stripe_rows", std::move(stripe));
      c.set("row_base", std::int64_t{0});
    }
    c.set("n_rows", kept_rows);
    c.set("nnz", static_cast<std::int64_t>(nr.size()));
    c.set("real_nnz", static_cast<std::int64_t>(nr.size()));
    c.set("row_indices", std::move(nr));
    c.set("col_indices", std::move(nc));
    c.set("values", std::move(nv));
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<std::int64_t> discretize_row_mutation(std::span<const std::int64_t> row_lengths, double avg_row_len,
                                                  double degree, std::int64_t max_cuts) {
  std::vector<std::int64_t> cuts;
  const double threshold = degree * avg_row_len;
  for (std::size_t r = 1; r < row_lengths.size(); ++r) {
    if (static_cast<std::int64_t>(cuts.size()) >= max_cuts) break;
    const auto diff = std::llabs(row_lengths[r] - row_lengths[r - 1]);
    if (diff > 0 && static_cast<double>(diff) >= threshold) cuts.push_back(static_cast<std::int64_t>(r));
  }
  return cuts;
}

MetadataSet execute_graph(const OperatorGraph& g, const CooMatrix& m) {
  // Open paths are fine (they end in their own namespace); parameters must be set.
  auto violations = validate_graph(g, false);
  for (int id : g.preorder()) {
    const auto& n = g.node(id);
    if (auto e = check_params(n.kind, n.params, true)) violations.push_back({id, "params", *e});
  }
  if (!violations.empty()) {
    throw Error(ErrorCode::InvalidGraph, violations.front().rule + ": " + violations.front().message,
                violations.front().node);
  }
  MetadataSet ms;
  ms.n_rows = m.n_rows;
  ms.n_cols = m.n_cols;
  execute_from(g, g.root(), initial_namespace(m), ms);
  return ms;
}

CooMatrix reconstruct(const MetadataSet& ms) {
  std::vector<Index> r, c;
  std::vector<double> v;
  for (const auto& ns : ms.namespaces) {
    const auto& rows = ns.ints("row_indices");
    const auto& cols = ns.ints("col_indices");
    const auto& vals = ns.reals("values");
    const IntArray* flags = ns.has("pad_flags") ? &ns.ints("pad_flags") : nullptr;
    const auto cb = ns.scalar("col_base");
    for (std::size_t p = 0; p < rows.size(); ++p) {
      if (flags && (*flags)[p]) continue;
      r.push_back(global_row(ns, rows[p]));
      c.push_back(cb + cols[p]);
      v.push_back(vals[p]);
    }
  }
  return CooMatrix::from_triplets(ms.n_rows, ms.n_cols, std::move(r), std::move(c), std::move(v));
}

}  // namespace spmvd
