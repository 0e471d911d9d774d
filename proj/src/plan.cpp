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

#include "spmvd/plan.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include <json.hpp>

#include "spmvd/designer.hpp"
#include "spmvd/error.hpp"

namespace spmvd {

namespace {

std::string lvl(Level l) { return std::string(level_prefix(l)); }

bool is_total(OperatorKind k) {
  return k == OperatorKind::ThreadTotalRed || k == OperatorKind::WarpTotalRed || k == OperatorKind::ShmemTotalRed;
}

bool is_identity(const IntArray& a) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != static_cast<std::int64_t>(i)) return false;
  }
  return true;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return (a + b - 1) / b; }

std::pair<Storage, Storage> storage_of(OperatorKind k) {
  switch (k) {
    case OperatorKind::ThreadTotalRed:
    case OperatorKind::ThreadBitmapRed: return {Storage::Register, Storage::Register};
    case OperatorKind::WarpTotalRed: return {Storage::Lane, Storage::Lane0};
    case OperatorKind::WarpSegRed:
    case OperatorKind::WarpBitmapRed: return {Storage::Lane, Storage::Lane};
    case OperatorKind::ShmemTotalRed:
    case OperatorKind::ShmemOffsetRed: return {Storage::Scratch, Storage::Scratch};
    case OperatorKind::GmemAtomRed: return {Storage::Any, Storage::None};
    default: return {Storage::None, Storage::None};
  }
}

// A thread register is its lane's register, so Register feeds Lane directly.
bool compatible(Storage produced, Storage wanted) {
  return produced == wanted || wanted == Storage::Any ||
         (produced == Storage::Register && wanted == Storage::Lane);
}

std::optional<std::string> adapter_rule(Storage from, Storage to) {
  if (to != Storage::Scratch) return std::nullopt;
  switch (from) {
    case Storage::Register: return "adapter_reg_to_scratch";
    case Storage::Lane: return "adapter_lane_to_scratch";
    case Storage::Lane0: return "adapter_lane0_to_scratch";
    default: return std::nullopt;
  }
}

// Keys read to find the first row of a block at loop position `i`.
std::vector<std::string> first_row_reads(const LoopLevel& loop, bool top) {
  if (loop.block == BlockKind::Nnz) return {"first_row_of_" + lvl(loop.level)};
  if (top) return {};
  return {lvl(loop.level) + "_row_offsets"};
}

const std::set<std::string>& known_fragments() {
  static const std::set<std::string> names = [] {
    std::set<std::string> s{"row_tags", "mac", "gmem_atom"};
    for (Level l : {Level::Bmtb, Level::Bmw, Level::Bmt}) {
      s.insert("meta_" + lvl(l));
      s.insert("first_row_" + lvl(l));
    }
    for (OperatorKind k : all_operator_kinds()) {
      if (is_reduction(k) && k != OperatorKind::GmemAtomRed) s.insert("red_" + std::string(to_string(k)));
    }
    return s;
  }();
  return names;
}

PlanPart build_part(const Namespace& ns, const PlanOptions& opt) {
  PlanPart part;
  part.n_rows = ns.scalar("n_rows");
  part.n_cols = ns.scalar("n_cols");
  part.row_base = ns.scalar("row_base");
  part.col_base = ns.scalar("col_base");
  part.nnz = static_cast<std::int64_t>(ns.ints("row_indices").size());
  part.real_nnz = ns.scalar("real_nnz");
  part.has_origin = ns.has("origin_rows");
  part.has_stripe = ns.has("stripe_rows");

  const auto tpb = ns.scalar_or("threads_per_block", opt.default_threads_per_block);
  if (tpb <= 0) throw Error(ErrorCode::MissingResource, "no SET_RESOURCES and no default threads_per_block");
  part.geometry.threads_per_block = tpb;

  const auto levels = present_levels(ns);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    LoopLevel loop;
    loop.level = levels[i];
    loop.block = ns.scalar(lvl(levels[i]) + "_kind") == 0 ? BlockKind::Row : BlockKind::Nnz;
    loop.size = ns.scalar(lvl(levels[i]) + "_size");
    if (i > 0) {
      loop.single_iteration = is_identity(ns.ints(lvl(levels[i - 1]) + "_" + lvl(levels[i]) + "_offsets"));
      loop.padded = levels[i] == Level::Bmt && ns.has("bmt_sizes_of_bmtb") && !loop.single_iteration;
    }
    part.loops.push_back(loop);
  }
  part.pad_sizes_per_bmtb =
      ns.has("bmt_sizes_of_bmtb") && ns.scalar_or("pad_scope", 1) == 0 && ns.has("bmtb_nz_offsets");

  if (levels.empty()) {
    part.top_blocks = ceil_div(part.nnz, tpb);
    part.geometry.grid_blocks = part.top_blocks;
  } else {
    part.top_blocks = ns.scalar("n_" + lvl(levels.front()));
    if (ns.has("n_bmtb")) {
      part.geometry.grid_blocks = ns.scalar("n_bmtb");
    } else if (ns.has("n_bmt")) {
      part.geometry.grid_blocks = ceil_div(ns.scalar("n_bmt"), tpb);
    } else {
      part.geometry.grid_blocks = ceil_div(ns.scalar("n_bmw") * kWarpSize, tpb);
    }
  }

  // *_TOTAL_RED folds a whole block into one result, so the block must hold one row.
  const auto& rows = ns.ints("row_indices");
  for (Level l : levels) {
    const auto k = ns.scalar_or("red_" + lvl(l), -1);
    if (k < 0 || !is_total(static_cast<OperatorKind>(k))) continue;
    const auto& off = ns.ints(lvl(l) + "_nz_offsets");
    for (std::size_t b = 0; b + 1 < off.size(); ++b) {
      if (off[b + 1] > off[b] &&
          rows[static_cast<std::size_t>(off[b])] != rows[static_cast<std::size_t>(off[b + 1] - 1)]) {
        throw Error(ErrorCode::IncompatibleReduction,
                    std::string(to_string(static_cast<OperatorKind>(k))) + " over " + lvl(l) + " block " +
                        std::to_string(b) + " spanning several rows");
      }
    }
  }

  part.pipeline.push_back({StageKind::Compute, OperatorKind::Input, std::nullopt, Storage::None,
                           Storage::Register, "mac"});
  std::optional<OperatorKind> lowest;
  for (Level l : {Level::Bmt, Level::Bmw, Level::Bmtb}) {
    const auto k = ns.scalar_or("red_" + lvl(l), -1);
    if (k < 0) continue;
    const auto op = static_cast<OperatorKind>(k);
    if (!lowest) lowest = op;
    const auto [in, out] = storage_of(op);
    part.pipeline.push_back({StageKind::Reduce, op, l, in, out, "red_" + std::string(to_string(op))});
  }
  if (!ns.has("red_gmem")) throw Error(ErrorCode::InvalidGraph, "path has no GMEM_ATOM_RED");
  part.pipeline.push_back({StageKind::Reduce, OperatorKind::GmemAtomRed, std::nullopt, Storage::Any,
                           Storage::None, "gmem_atom"});

  if (!lowest || *lowest == OperatorKind::WarpSegRed) {
    const bool finest_single_row =
        !part.loops.empty() && part.loops.back().block == BlockKind::Row && part.loops.back().size == 1;
    part.row_source = finest_single_row ? RowSource::FinestBlock : RowSource::RowIndices;
  }

  // Fragments in first-use order.
  for (std::size_t i = 0; i < part.loops.size(); ++i) {
    const auto& loop = part.loops[i];
    Fragment f{"meta_" + lvl(loop.level), {}};
    if (i == 0) {
      f.reads.push_back(lvl(loop.level) + "_nz_offsets");
    } else if (!loop.single_iteration) {
      f.reads.push_back(lvl(part.loops[i - 1].level) + "_" + lvl(loop.level) + "_offsets");
      f.reads.push_back(loop.padded ? "bmt_sizes_of_bmtb" : lvl(loop.level) + "_nz_offsets");
    }
    part.fragments.push_back(f);
  }
  std::set<Level> first_rows;
  for (Level l : levels) {
    const auto k = ns.scalar_or("red_" + lvl(l), -1);
    if (k < 0) continue;
    const auto op = static_cast<OperatorKind>(k);
    if (is_total(op) || op == OperatorKind::ThreadBitmapRed || op == OperatorKind::WarpBitmapRed ||
        op == OperatorKind::ShmemOffsetRed) {
      first_rows.insert(l);
    }
  }
  if (part.row_source == RowSource::FinestBlock) first_rows.insert(part.loops.back().level);
  for (std::size_t i = 0; i < part.loops.size(); ++i) {
    if (!first_rows.count(part.loops[i].level)) continue;
    part.fragments.push_back({"first_row_" + lvl(part.loops[i].level), first_row_reads(part.loops[i], i == 0)});
  }
  if (part.row_source == RowSource::RowIndices) part.fragments.push_back({"row_tags", {"row_indices"}});
  part.fragments.push_back({"mac", {"col_indices", "values"}});
  for (const auto& st : part.pipeline) {
    if (st.kind != StageKind::Reduce || st.op == OperatorKind::GmemAtomRed) continue;
    Fragment f{st.name, {}};
    if (st.op == OperatorKind::ThreadBitmapRed || st.op == OperatorKind::WarpBitmapRed) {
      f.reads.push_back("nz_row_bitmap");
    }
    if (st.op == OperatorKind::ShmemOffsetRed) {
      f.reads = {"reduce_block_starts", "reduce_row_offsets"};
    }
    part.fragments.push_back(f);
  }
  Fragment gm{"gmem_atom", {}};
  if (part.has_origin) gm.reads.push_back("origin_rows");
  if (part.has_stripe) gm.reads.push_back("stripe_rows");
  part.fragments.push_back(gm);
  return part;
}

}  // namespace

std::string_view to_string(Storage s) {
  switch (s) {
    case Storage::None: return "none";
    case Storage::Register: return "register";
    case Storage::Lane: return "lane";
    case Storage::Lane0: return "lane0";
    case Storage::Scratch: return "scratch";
    case Storage::Any: return "any";
  }
  return "?";
}

std::optional<OperatorKind> PlanPart::reduction(Level l) const {
  for (const auto& st : pipeline) {
    if (st.kind == StageKind::Reduce && st.level == l) return st.op;
  }
  return std::nullopt;
}

LaunchGeometry KernelPlan::geometry() const {
  LaunchGeometry g;
  g.threads_per_block = 0;
  for (const auto& p : parts) {
    g.grid_blocks += p.geometry.grid_blocks;
    g.threads_per_block = std::max(g.threads_per_block, p.geometry.threads_per_block);
  }
  if (parts.empty()) g.threads_per_block = kDefaultThreadsPerBlock;
  return g;
}

KernelPlan build_plan(const OperatorGraph& g, const MetadataSet& ms, const PlanOptions& opt) {
  if (g.leaves().size() != ms.namespaces.size()) {
    throw Error(ErrorCode::InvalidGraph, "metadata set does not belong to this graph");
  }
  KernelPlan plan;
  plan.n_rows = ms.n_rows;
  plan.n_cols = ms.n_cols;
  const bool multi = ms.namespaces.size() > 1;
  for (std::size_t k = 0; k < ms.namespaces.size(); ++k) {
    auto part = build_part(ms.namespaces[k], opt);
    if (multi) part.prefix = "p" + std::to_string(k) + ".";
    plan.parts.push_back(std::move(part));
  }
  return insert_adapters(std::move(plan));
}

KernelPlan insert_adapters(KernelPlan plan) {
  for (auto& part : plan.parts) {
    std::vector<PipelineStage> out;
    for (const auto& st : part.pipeline) {
      if (st.kind == StageKind::Adapter) {
        out.push_back(st);
        continue;
      }
      if (!out.empty() && !compatible(out.back().output, st.input)) {
        const auto rule = adapter_rule(out.back().output, st.input);
        if (!rule) {
          throw Error(ErrorCode::NoAdapterRule, std::string(to_string(out.back().output)) + " -> " +
                                                    std::string(to_string(st.input)));
        }
        out.push_back({StageKind::Adapter, OperatorKind::Input, st.level, out.back().output, st.input, *rule});
      }
      out.push_back(st);
    }
    part.pipeline = std::move(out);
  }
  return plan;
}

std::vector<std::string> required_keys(const KernelPlan& plan) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (const auto& part : plan.parts) {
    for (const auto& f : part.fragments) {
      if (!known_fragments().count(f.name)) throw Error(ErrorCode::UnknownFragment, f.name);
      for (const auto& r : f.reads) {
        std::string name = part.prefix + r;
        if (auto it = part.accessors.find(r); it != part.accessors.end()) {
          if (it->second.kind == AccessorKind::Model) continue;
          if (it->second.kind == AccessorKind::Fused) name = it->second.array;
        }
        if (seen.insert(name).second) out.push_back(name);
      }
    }
  }
  return out;
}

std::pair<KernelPlan, FormatBundle> apply_compression(const KernelPlan& plan, const FormatBundle& fmt,
                                                      const CompressionOptions& opt) {
  KernelPlan p = plan;
  FormatBundle f = fmt;
  auto part_of = [&](const std::string& name) -> std::pair<PlanPart*, std::string> {
    for (auto& part : p.parts) {
      if (name.rfind(part.prefix, 0) == 0 && (!part.prefix.empty() || p.parts.size() == 1)) {
        return {&part, name.substr(part.prefix.size())};
      }
    }
    return {nullptr, name};
  };
  for (const auto& name : fmt.names()) {
    const auto& a = fmt.at(name);
    if (a.is_real() || a.size() < 2) continue;
    auto [part, local] = part_of(name);
    if (!part || part->accessors.count(local)) continue;
    auto model = fit_array_model(a.ints, opt.patch_budget);
    if (!model) continue;
    part->accessors[local] = Accessor{AccessorKind::Model, "", *model, 0, model->length};
    f.remove(name);
  }
  if (opt.fuse_short_arrays) {
    std::vector<std::string> shorts;
    for (const auto& name : f.names()) {
      const auto& a = f.at(name);
      auto [part, local] = part_of(name);
      if (part && a.dtype == DType::I32 && a.size() <= opt.fuse_max_length && !part->accessors.count(local)) {
        shorts.push_back(name);
      }
    }
    if (shorts.size() >= 2) {
      std::vector<std::int64_t> fused;
      for (const auto& name : shorts) {
        auto [part, local] = part_of(name);
        const auto& a = f.at(name);
        part->accessors[local] = Accessor{AccessorKind::Fused, "fused_i32", {}, static_cast<std::int64_t>(fused.size()),
                                          static_cast<std::int64_t>(a.size())};
        fused.insert(fused.end(), a.ints.begin(), a.ints.end());
        f.remove(name);
      }
      TypedArray t;
      t.dtype = DType::I32;
      t.ints = std::move(fused);
      f.add("fused_i32", std::move(t));
    }
  }
  return {std::move(p), std::move(f)};
}

// ---------------------------------------------------------------------------
// Listing

namespace {

std::string read_expr(const PlanPart& part, const std::string& key, const std::string& idx) {
  auto it = part.accessors.find(key);
  if (it == part.accessors.end()) return part.prefix + key + "[" + idx + "]";
  const auto& acc = it->second;
  if (acc.kind == AccessorKind::Fused) {
    return acc.array + "[" + std::to_string(acc.offset) + " + " + idx + "]";
  }
  std::string e = acc.model.expression(idx);
  if (e.find_first_of(" *") != std::string::npos) e = "(" + e + ")";
  for (auto pit = acc.model.patches.rbegin(); pit != acc.model.patches.rend(); ++pit) {
    const bool simple = idx.find_first_of("+-*/ ") == std::string::npos;
    e = "(" + (simple ? idx : "(" + idx + ")") + " == " + std::to_string(pit->first) + " ? " + std::to_string(pit->second) + " : " + e + ")";
  }
  return e;
}

std::string row_expr(const PlanPart& part, std::size_t i, const std::string& idx) {
  const auto& loop = part.loops[i];
  if (loop.block == BlockKind::Nnz) return read_expr(part, "first_row_of_" + lvl(loop.level), idx);
  if (i == 0) return loop.size == 1 ? idx : std::to_string(loop.size) + "*" + idx;
  return read_expr(part, lvl(loop.level) + "_row_offsets", idx);
}

}  // namespace

std::string emit_source(const KernelPlan& plan, const FormatBundle& fmt) {
  std::ostringstream os;
  os << "// y = A*x, " << plan.n_rows << "x" << plan.n_cols << ", " << plan.parts.size() << " part(s)\n";
  for (const auto& name : fmt.names()) {
    const auto& a = fmt.at(name);
    os << "const " << to_string(a.dtype) << " " << name << "[" << a.size() << "];\n";
  }
  for (std::size_t k = 0; k < plan.parts.size(); ++k) {
    const auto& part = plan.parts[k];
    os << "\n// part " << k << ": " << part.n_rows << " rows, " << part.nnz << " stored nonzeros ("
       << part.real_nnz << " real)\n";
    os << "kernel part" << k << "<<<" << part.geometry.grid_blocks << ", " << part.geometry.threads_per_block
       << ">>>(x, y) {\n";
    std::string indent = "  ";
    std::vector<std::string> idx_names;
    std::string lo = "0", hi = std::to_string(part.nnz);
    if (part.loops.empty()) {
      os << indent << "for (i = bid*" << part.geometry.threads_per_block << " + tid; i < " << part.nnz
         << "; i += stride) {\n";
      indent += "  ";
    }
    for (std::size_t i = 0; i < part.loops.size(); ++i) {
      const auto& loop = part.loops[i];
      const std::string v = lvl(loop.level) + "_id";
      const std::string tag = lvl(loop.level);
      if (i == 0) {
        os << indent << "for (" << v << " = 0; " << v << " < " << part.top_blocks << "; ++" << v << ") {  // "
           << tag << " loop\n";
      } else if (loop.single_iteration) {
        os << indent << "{  // " << tag << " loop elided: one per " << lvl(part.loops[i - 1].level) << "\n";
        os << indent << "  " << v << " = " << idx_names.back() << ";\n";
      } else {
        const auto off = lvl(part.loops[i - 1].level) + "_" + tag + "_offsets";
        os << indent << "for (" << v << " = " << read_expr(part, off, idx_names.back()) << "; " << v << " < "
           << read_expr(part, off, idx_names.back() + "+1") << "; ++" << v << ") {  // " << tag << " loop\n";
      }
      indent += "  ";
      const std::string lo_v = tag + "_lo", hi_v = tag + "_hi";
      if (loop.padded) {
        const std::string parent = idx_names.back();
        const std::string sz = read_expr(part, "bmt_sizes_of_bmtb", part.pad_sizes_per_bmtb ? parent : "0");
        const std::string first = read_expr(part, lvl(part.loops[i - 1].level) + "_" + tag + "_offsets", parent);
        os << indent << lo_v << " = " << lo << " + (" << v << " - " << first << ") * " << sz << ";\n";
        os << indent << hi_v << " = " << lo_v << " + " << sz << ";\n";
      } else if (i == 0 || !loop.single_iteration) {
        os << indent << lo_v << " = " << read_expr(part, tag + "_nz_offsets", v) << ";\n";
        os << indent << hi_v << " = " << read_expr(part, tag + "_nz_offsets", v + "+1") << ";\n";
      } else {
        os << indent << lo_v << " = " << lo << "; " << hi_v << " = " << hi << ";\n";
      }
      for (const auto& f : part.fragments) {
        if (f.name == "first_row_" + tag) os << indent << "row0 = " << row_expr(part, i, v) << ";\n";
      }
      lo = lo_v;
      hi = hi_v;
      idx_names.push_back(v);
    }
    // Without blocks the grid-stride loop above already walks the nonzeros.
    const bool mac_loop = !part.loops.empty();
    const std::string body = mac_loop ? indent + "  " : indent;
    if (mac_loop) os << indent << "for (i = " << lo << "; i < " << hi << "; ++i) {\n";
    if (part.row_source == RowSource::RowIndices) os << body << "row = " << read_expr(part, "row_indices", "i") << ";\n";
    if (part.row_source == RowSource::FinestBlock) os << body << "row = row0;\n";
    os << body << "sum += " << read_expr(part, "values", "i") << " * x[" << (part.col_base ? std::to_string(part.col_base) + " + " : "")
       << read_expr(part, "col_indices", "i") << "];\n";
    if (mac_loop) os << indent << "}\n";
    for (auto it = part.pipeline.begin(); it != part.pipeline.end(); ++it) {
      if (it->kind == StageKind::Adapter) {
        os << indent << "// adapter: " << to_string(it->input) << " -> " << to_string(it->output) << "\n";
        os << indent << "scratch[tid] = sum; __syncthreads();\n";
      } else if (it->kind == StageKind::Reduce && it->op != OperatorKind::GmemAtomRed) {
        os << indent << to_string(it->op) << "(sum);";
        for (const auto& f : part.fragments) {
          if (f.name != it->name || f.reads.empty()) continue;
          os << "  // reads";
          for (const auto& r : f.reads) os << " " << read_expr(part, r, "..");
        }
        os << "\n";
      }
    }
    std::string target = part.row_source == RowSource::None ? "row0" : "row";
    if (part.has_origin) target = read_expr(part, "origin_rows", target);
    if (part.has_stripe) target = read_expr(part, "stripe_rows", target);
    else if (part.row_base) target = std::to_string(part.row_base) + " + " + target;
    os << indent << "atomicAdd(&y[" << target << "], sum);\n";
    const auto depth = part.loops.empty() ? 1 : part.loops.size();
    for (std::size_t d = depth; d > 0; --d) os << std::string(2 * d, ' ') << "}\n";
    os << "}\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

namespace {

using ojson = nlohmann::ordered_json;

ojson model_json(const ArrayModel& m) {
  ojson patches = ojson::array();
  for (const auto& [i, v] : m.patches) patches.push_back({i, v});
  return {{"kind", std::string(to_string(m.kind))}, {"k", m.k}, {"b", m.b}, {"period", m.period},
          {"length", m.length}, {"patches", patches}};
}

ArrayModel model_from(const nlohmann::json& j) {
  ArrayModel m;
  auto kind = model_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::ParseError, "unknown model kind");
  m.kind = *kind;
  m.k = j.at("k");
  m.b = j.at("b");
  m.period = j.at("period");
  m.length = j.at("length");
  for (const auto& p : j.at("patches")) m.patches[p.at(0).get<std::int64_t>()] = p.at(1).get<std::int64_t>();
  return m;
}

const std::vector<Storage> kStorages{Storage::None, Storage::Register, Storage::Lane,
                                     Storage::Lane0, Storage::Scratch, Storage::Any};

Storage storage_from(const std::string& s) {
  for (auto st : kStorages) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::ParseError, "unknown storage " + s);
}

Level level_from(const std::string& s) {
  for (Level l : {Level::Bmtb, Level::Bmw, Level::Bmt}) {
    if (level_prefix(l) == s) return l;
  }
  throw Error(ErrorCode::ParseError, "unknown level " + s);
}

OperatorKind kind_from(const std::string& s) {
  if (s == "INPUT") return OperatorKind::Input;
  auto k = operator_kind_from_string(s);
  if (!k) throw Error(ErrorCode::ParseError, "unknown operator " + s);
  return *k;
}

}  // namespace

std::string serialize_plan(const KernelPlan& plan) {
  ojson parts = ojson::array();
  for (const auto& p : plan.parts) {
    ojson loops = ojson::array();
    for (const auto& l : p.loops) {
      loops.push_back({{"level", lvl(l.level)},
                       {"block", l.block == BlockKind::Row ? "row" : "nnz"},
                       {"size", l.size},
                       {"single_iteration", l.single_iteration},
                       {"padded", l.padded}});
    }
    ojson pipeline = ojson::array();
    for (const auto& s : p.pipeline) {
      ojson st = {{"kind", s.kind == StageKind::Compute ? "compute" : s.kind == StageKind::Reduce ? "reduce" : "adapter"},
                  {"op", std::string(s.op == OperatorKind::Input ? "INPUT" : to_string(s.op))},
                  {"level", s.level ? ojson(lvl(*s.level)) : ojson(nullptr)},
                  {"input", std::string(to_string(s.input))},
                  {"output", std::string(to_string(s.output))},
                  {"name", s.name}};
      pipeline.push_back(st);
    }
    ojson frags = ojson::array();
    for (const auto& f : p.fragments) frags.push_back({{"name", f.name}, {"reads", f.reads}});
    ojson acc = ojson::object();
    for (const auto& [k, a] : p.accessors) {
      ojson j = {{"kind", a.kind == AccessorKind::Array ? "array" : a.kind == AccessorKind::Model ? "model" : "fused"},
                 {"array", a.array}, {"offset", a.offset}, {"length", a.length}};
      if (a.kind == AccessorKind::Model) j["model"] = model_json(a.model);
      acc[k] = j;
    }
    const char* rs = p.row_source == RowSource::None ? "none"
                     : p.row_source == RowSource::FinestBlock ? "finest_block" : "row_indices";
    parts.push_back({{"prefix", p.prefix},
                     {"n_rows", p.n_rows},
                     {"n_cols", p.n_cols},
                     {"row_base", p.row_base},
                     {"col_base", p.col_base},
                     {"nnz", p.nnz},
                     {"real_nnz", p.real_nnz},
                     {"top_blocks", p.top_blocks},
                     {"grid_blocks", p.geometry.grid_blocks},
                     {"threads_per_block", p.geometry.threads_per_block},
                     {"row_source", rs},
                     {"has_origin", p.has_origin},
                     {"has_stripe", p.has_stripe},
                     {"pad_sizes_per_bmtb", p.pad_sizes_per_bmtb},
                     {"loops", loops},
                     {"pipeline", pipeline},
                     {"fragments", frags},
                     {"accessors", acc}});
  }
  ojson doc = {{"n_rows", plan.n_rows}, {"n_cols", plan.n_cols}, {"parts", parts}};
  return doc.dump(2) + "\n";
}

KernelPlan parse_plan(const std::string& text) {
  KernelPlan plan;
  try {
    const auto doc = nlohmann::json::parse(text);
    plan.n_rows = doc.at("n_rows");
    plan.n_cols = doc.at("n_cols");
    for (const auto& j : doc.at("parts")) {
      PlanPart p;
      p.prefix = j.at("prefix");
      p.n_rows = j.at("n_rows");
      p.n_cols = j.at("n_cols");
      p.row_base = j.at("row_base");
      p.col_base = j.at("col_base");
      p.nnz = j.at("nnz");
      p.real_nnz = j.at("real_nnz");
      p.top_blocks = j.at("top_blocks");
      p.geometry.grid_blocks = j.at("grid_blocks");
      p.geometry.threads_per_block = j.at("threads_per_block");
      const auto rs = j.at("row_source").get<std::string>();
      p.row_source = rs == "none" ? RowSource::None : rs == "finest_block" ? RowSource::FinestBlock : RowSource::RowIndices;
      p.has_origin = j.at("has_origin");
      p.has_stripe = j.at("has_stripe");
      p.pad_sizes_per_bmtb = j.at("pad_sizes_per_bmtb");
      for (const auto& l : j.at("loops")) {
        LoopLevel loop;
        loop.level = level_from(l.at("level"));
        loop.block = l.at("block") == "row" ? BlockKind::Row : BlockKind::Nnz;
        loop.size = l.at("size");
        loop.single_iteration = l.at("single_iteration");
        loop.padded = l.at("padded");
        p.loops.push_back(loop);
      }
      for (const auto& s : j.at("pipeline")) {
        PipelineStage st;
        const auto kind = s.at("kind").get<std::string>();
        st.kind = kind == "compute" ? StageKind::Compute : kind == "reduce" ? StageKind::Reduce : StageKind::Adapter;
        st.op = kind_from(s.at("op"));
        if (!s.at("level").is_null()) st.level = level_from(s.at("level"));
        st.input = storage_from(s.at("input"));
        st.output = storage_from(s.at("output"));
        st.name = s.at("name");
        p.pipeline.push_back(st);
      }
      for (const auto& f : j.at("fragments")) {
        p.fragments.push_back({f.at("name"), f.at("reads").get<std::vector<std::string>>()});
      }
      for (const auto& [k, a] : j.at("accessors").items()) {
        Accessor acc;
        const auto kind = a.at("kind").get<std::string>();
        acc.kind = kind == "array" ? AccessorKind::Array : kind == "model" ? AccessorKind::Model : AccessorKind::Fused;
        acc.array = a.at("array");
        acc.offset = a.at("offset");
        acc.length = a.at("length");
        if (acc.kind == AccessorKind::Model) acc.model = model_from(a.at("model"));
        p.accessors[k] = acc;
      }
      plan.parts.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("plan: ") + e.what());
  }
  return plan;
}

}  // namespace spmvd
