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

#include "spmvd/executor.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <mutex>
#include <thread>

#include "spmvd/error.hpp"

namespace spmvd {

namespace {

[[noreturn]] void oob(const std::string& what, std::int64_t i) {
  throw Error(ErrorCode::OutOfBoundsRead, what + "[" + std::to_string(i) + "]");
}

struct IntReader {
  std::string name;
  const std::vector<std::int64_t>* data = nullptr;
  const ArrayModel* model = nullptr;
  std::int64_t offset = 0;
  std::int64_t length = 0;
  std::size_t elem_bytes = 0;  // 0 when computed from a model

  std::int64_t operator()(std::int64_t i) const {
    if (i < 0 || i >= length) oob(name, i);
    if (model) return model->eval(i);
    return (*data)[static_cast<std::size_t>(offset + i)];
  }
};

// Work a cost pass attributes to one warp: nonzero positions per lane.
struct WarpCost {
  std::array<std::vector<std::int64_t>, kWarpSize> lanes;
  double extra_cycles = 0;
};

struct BlockCost {
  std::map<std::int64_t, WarpCost> warps;
  double extra_cycles = 0;
  std::int64_t atomics = 0;
};

struct PartCost {
  std::map<std::int64_t, BlockCost> blocks;
  std::size_t meta_bytes = 0;
};

template <typename T>
struct Partial {
  std::int64_t row;
  T val;
  std::int64_t nz;
};

// Where the block being processed sits in the hierarchy.
struct Ctx {
  std::int64_t bmtb = -1;
  std::int64_t bmw = -1;
  std::int64_t j = 0;  // index within the immediate parent (global index at the top)
};

template <typename T>
class PartRunner {
 public:
  PartRunner(const PlanPart& part, const FormatBundle& fmt, const std::vector<T>& x, std::int64_t n_rows_total)
      : part_(part), x_(x), n_rows_total_(n_rows_total) {
    for (const auto& f : part.fragments) {
      for (const auto& key : f.reads) resolve(fmt, key);
    }
    values_ = real_array(fmt, "values");
    col_ = &get("col_indices");
    const auto n = part.loops.size();
    nz_off_.assign(n, nullptr);
    child_off_.assign(n, nullptr);
    first_row_.assign(n, nullptr);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& loop = part.loops[i];
      const std::string tag(level_prefix(loop.level));
      if (i == 0) {
        nz_off_[i] = &get(tag + "_nz_offsets");
      } else if (!loop.single_iteration) {
        child_off_[i] = &get(std::string(level_prefix(part.loops[i - 1].level)) + "_" + tag + "_offsets");
        if (loop.padded) {
          sizes_ = &get("bmt_sizes_of_bmtb");
        } else {
          nz_off_[i] = &get(tag + "_nz_offsets");
        }
      }
      const auto fr = fragment("first_row_" + tag);
      if (fr && !fr->reads.empty()) first_row_[i] = &get(fr->reads.front());
      reds_.push_back(part.reduction(loop.level));
    }
    if (part.row_source == RowSource::RowIndices) rows_ = &get("row_indices");
    for (const auto& st : part.pipeline) {
      if (st.op == OperatorKind::ThreadBitmapRed || st.op == OperatorKind::WarpBitmapRed) bitmap_ = &get("nz_row_bitmap");
      if (st.op == OperatorKind::ShmemOffsetRed) {
        red_starts_ = &get("reduce_block_starts");
        red_offsets_ = &get("reduce_row_offsets");
      }
    }
    if (part.has_origin) origin_ = &get("origin_rows");
    if (part.has_stripe) stripe_ = &get("stripe_rows");
    for (std::size_t i = 0; i < part.pipeline.size(); ++i) {
      const auto& st = part.pipeline[i];
      if (st.input == Storage::Scratch && (i == 0 || part.pipeline[i - 1].output != Storage::Scratch)) {
        throw Error(ErrorCode::MissingAdapter, st.name + " has no scratch producer");
      }
    }
    tpb_ = part.geometry.threads_per_block;
    if (tpb_ < kWarpSize || tpb_ % kWarpSize != 0) {
      throw Error(ErrorCode::MissingResource, "threads_per_block must be a positive multiple of 32");
    }
  }

  void set_cost(PartCost* cost) { cost_ = cost; }

  void run_block(std::int64_t b, std::vector<Partial<T>>& out) {
    if (part_.loops.empty()) {
      const auto s = b * tpb_;
      const auto e = std::min(part_.nnz, s + tpb_);
      leaf(-1, b, s, e, Ctx{-1, -1, b}, out);
      return;
    }
    run_level(0, b, rd(*nz_off_[0], b), rd(*nz_off_[0], b + 1), Ctx{-1, -1, b}, out);
  }

  std::int64_t map_row(std::int64_t r) const {
    if (r < 0) throw Error(ErrorCode::MissingKey, part_.prefix + "row tags");
    const auto o = origin_ ? (*origin_)(r) : r;
    const auto g = stripe_ ? (*stripe_)(o) : part_.row_base + o;
    if (g < 0 || g >= n_rows_total_) oob("y", g);
    return g;
  }

  std::size_t count_mapping_bytes() const {
    return (origin_ ? origin_->elem_bytes : 0) + (stripe_ ? stripe_->elem_bytes : 0);
  }

  const IntReader& col() const { return *col_; }

 private:
  const Fragment* fragment(const std::string& name) const {
    for (const auto& f : part_.fragments) {
      if (f.name == name) return &f;
    }
    return nullptr;
  }

  void resolve(const FormatBundle& fmt, const std::string& key) {
    if (key == "values" || readers_.count(key)) return;
    IntReader r;
    r.name = part_.prefix + key;
    if (auto it = part_.accessors.find(key); it != part_.accessors.end() && it->second.kind != AccessorKind::Array) {
      const auto& acc = it->second;
      if (acc.kind == AccessorKind::Model) {
        r.model = &acc.model;
        r.length = acc.model.length;
      } else {
        const auto& a = fmt.at(acc.array);
        if (a.is_real() || acc.offset < 0 || acc.offset + acc.length > static_cast<std::int64_t>(a.size())) {
          oob(acc.array, acc.offset + acc.length);
        }
        r.data = &a.ints;
        r.offset = acc.offset;
        r.length = acc.length;
        r.elem_bytes = dtype_size(a.dtype);
      }
    } else {
      const auto& a = fmt.at(r.name);
      if (a.is_real()) throw Error(ErrorCode::MissingKey, r.name + " is not an integer array");
      r.data = &a.ints;
      r.length = static_cast<std::int64_t>(a.size());
      r.elem_bytes = dtype_size(a.dtype);
    }
    readers_[key] = r;
  }

  const std::vector<double>* real_array(const FormatBundle& fmt, const std::string& key) {
    const auto& a = fmt.at(part_.prefix + key);
    if (!a.is_real()) throw Error(ErrorCode::MissingKey, part_.prefix + key + " is not a real array");
    return &a.reals;
  }

  const IntReader& get(const std::string& key) const {
    auto it = readers_.find(key);
    if (it == readers_.end()) throw Error(ErrorCode::MissingKey, part_.prefix + key + " is not read by any fragment");
    return it->second;
  }

  // Counted metadata read.
  std::int64_t rd(const IntReader& r, std::int64_t i) {
    if (cost_) cost_->meta_bytes += r.elem_bytes;
    return r(i);
  }

  std::int64_t first_row(std::size_t li, std::int64_t idx) {
    const auto& loop = part_.loops[li];
    if (first_row_[li]) return rd(*first_row_[li], idx);
    if (loop.block == BlockKind::Row && li == 0) return idx * loop.size;
    throw Error(ErrorCode::MissingKey, part_.prefix + "first row of " + std::string(level_prefix(loop.level)));
  }

  bool bit(std::int64_t p) {
    const auto w = rd(*bitmap_, p / 32);
    return ((static_cast<std::uint64_t>(w) >> (p % 32)) & 1u) != 0;
  }

  void run_level(std::size_t li, std::int64_t idx, std::int64_t s, std::int64_t e, Ctx ctx,
                 std::vector<Partial<T>>& out) {
    const auto& loop = part_.loops[li];
    if (loop.level == Level::Bmtb) ctx.bmtb = idx;
    if (loop.level == Level::Bmw) ctx.bmw = idx;
    if (s < 0 || e < s || e > part_.nnz) oob(part_.prefix + "nz range", e);
    const std::size_t mark = out.size();
    if (li + 1 < part_.loops.size()) {
      const auto& child = part_.loops[li + 1];
      if (child.single_iteration) {
        run_level(li + 1, idx, s, e, Ctx{ctx.bmtb, ctx.bmw, 0}, out);
      } else {
        const auto c0 = rd(*child_off_[li + 1], idx);
        const auto c1 = rd(*child_off_[li + 1], idx + 1);
        for (auto c = c0; c < c1; ++c) {
          std::int64_t cs, ce;
          if (child.padded) {
            const auto size = rd(*sizes_, part_.pad_sizes_per_bmtb ? ctx.bmtb : 0);
            cs = s + (c - c0) * size;
            ce = cs + size;
          } else {
            cs = rd(*nz_off_[li + 1], c);
            ce = rd(*nz_off_[li + 1], c + 1);
          }
          run_level(li + 1, c, cs, ce, Ctx{ctx.bmtb, ctx.bmw, c - c0}, out);
        }
      }
    } else {
      leaf(static_cast<std::int64_t>(li), idx, s, e, ctx, out);
    }
    if (reds_[li]) reduce(*reds_[li], li, idx, s, ctx, out, mark);
  }

  void leaf(std::int64_t li, std::int64_t idx, std::int64_t s, std::int64_t e, const Ctx& ctx,
            std::vector<Partial<T>>& out) {
    if (s < 0 || e < s) oob(part_.prefix + "nz range", s);
    std::int64_t block_row = -1;
    if (part_.row_source == RowSource::FinestBlock) block_row = first_row(static_cast<std::size_t>(li), idx);
    const auto& vals = *values_;
    for (auto p = s; p < e; ++p) {
      if (p >= static_cast<std::int64_t>(vals.size())) oob(part_.prefix + "values", p);
      const auto gc = part_.col_base + (*col_)(p);
      if (gc < 0 || gc >= static_cast<std::int64_t>(x_.size())) oob("x", gc);
      std::int64_t row = block_row;
      if (rows_) row = rd(*rows_, p);
      out.push_back({row, static_cast<T>(vals[static_cast<std::size_t>(p)]) * x_[static_cast<std::size_t>(gc)], p});
    }
    if (cost_) record_leaf(li, idx, s, e, ctx);
  }

  void record_leaf(std::int64_t li, std::int64_t idx, std::int64_t s, std::int64_t e, const Ctx& ctx) {
    const std::int64_t warps_per_block = tpb_ / kWarpSize;
    const Level lvl = li < 0 ? Level::Bmtb : part_.loops[static_cast<std::size_t>(li)].level;
    auto lane_of = [&](std::int64_t block, std::int64_t warp, std::int64_t lane) -> std::vector<std::int64_t>& {
      return cost_->blocks[block].warps[warp].lanes[static_cast<std::size_t>(lane)];
    };
    if (li < 0 || lvl == Level::Bmtb) {
      const auto block = li < 0 ? idx : ctx.bmtb;
      for (auto p = s; p < e; ++p) {
        const auto t = (p - s) % tpb_;
        lane_of(block, t / kWarpSize, t % kWarpSize).push_back(p);
      }
    } else if (lvl == Level::Bmw) {
      const auto block = ctx.bmtb >= 0 ? ctx.bmtb : idx / warps_per_block;
      for (auto p = s; p < e; ++p) lane_of(block, idx, (p - s) % kWarpSize).push_back(p);
    } else {
      std::int64_t block, warp, lane;
      if (ctx.bmw >= 0) {
        block = ctx.bmtb >= 0 ? ctx.bmtb : ctx.bmw / warps_per_block;
        warp = ctx.bmw;
        lane = ctx.j % kWarpSize;
      } else if (ctx.bmtb >= 0) {
        const auto t = ctx.j % tpb_;
        block = ctx.bmtb;
        warp = t / kWarpSize;
        lane = t % kWarpSize;
      } else {
        block = idx / tpb_;
        warp = idx / kWarpSize;
        lane = idx % kWarpSize;
      }
      auto& l = lane_of(block, warp, lane);
      for (auto p = s; p < e; ++p) l.push_back(p);
    }
  }

  WarpCost* warp_cost(const Ctx& ctx) {
    if (!cost_) return nullptr;
    const auto block = ctx.bmtb >= 0 ? ctx.bmtb : ctx.bmw / (tpb_ / kWarpSize);
    return &cost_->blocks[block].warps[ctx.bmw];
  }

  void reduce(OperatorKind op, std::size_t li, std::int64_t idx, std::int64_t s, const Ctx& ctx,
              std::vector<Partial<T>>& out, std::size_t mark) {
    std::vector<Partial<T>> in(out.begin() + static_cast<std::ptrdiff_t>(mark), out.end());
    out.resize(mark);
    const auto n = static_cast<std::int64_t>(in.size());
    switch (op) {
      case OperatorKind::ThreadTotalRed: {
        if (in.empty()) return;
        T sum = 0;
        for (const auto& p : in) sum += p.val;
        out.push_back({first_row(li, idx), sum, s});
        return;
      }
      case OperatorKind::ThreadBitmapRed:
      case OperatorKind::WarpBitmapRed: {
        if (in.empty()) return;
        std::int64_t row = first_row(li, idx);
        T sum = 0;
        std::int64_t start = in.front().nz;
        std::int64_t segments = 1;
        for (std::int64_t i = 0; i < n; ++i) {
          const auto& p = in[static_cast<std::size_t>(i)];
          if (i > 0 && bit(p.nz)) {
            out.push_back({row, sum, start});
            ++row;
            ++segments;
            sum = 0;
            start = p.nz;
          }
          sum += p.val;
        }
        out.push_back({row, sum, start});
        if (op == OperatorKind::WarpBitmapRed) {
          if (auto* w = warp_cost(ctx)) w->extra_cycles += 8.0 * static_cast<double>((n + 31) / 32) + static_cast<double>(segments);
        }
        return;
      }
      case OperatorKind::WarpTotalRed: {
        if (in.empty()) return;
        std::array<T, kWarpSize> lanes{};
        for (std::int64_t i = 0; i < n; ++i) lanes[static_cast<std::size_t>(i % kWarpSize)] += in[static_cast<std::size_t>(i)].val;
        for (std::size_t off = kWarpSize / 2; off > 0; off /= 2) {
          for (std::size_t i = 0; i < off; ++i) lanes[i] += lanes[i + off];
        }
        out.push_back({first_row(li, idx), lanes[0], s});
        if (auto* w = warp_cost(ctx)) w->extra_cycles += 10.0;
        return;
      }
      case OperatorKind::WarpSegRed: {
        segmented_scan(in, out);
        if (auto* w = warp_cost(ctx)) w->extra_cycles += 15.0 * static_cast<double>((n + 31) / 32);
        return;
      }
      case OperatorKind::ShmemTotalRed: {
        if (static_cast<std::size_t>(n) > kScratchDoubles) {
          throw Error(ErrorCode::ScratchOverflow, std::to_string(n) + " partials exceed block scratch");
        }
        if (in.empty()) return;
        std::size_t width = 1;
        while (width < in.size()) width *= 2;
        std::vector<T> scratch(width, T{0});
        for (std::size_t i = 0; i < in.size(); ++i) scratch[i] = in[i].val;
        for (std::size_t half = width / 2; half > 0; half /= 2) {
          for (std::size_t i = 0; i < half; ++i) scratch[i] += scratch[i + half];
        }
        out.push_back({first_row(li, idx), scratch[0], s});
        if (cost_) {
          cost_->blocks[ctx.bmtb].extra_cycles += 6.0 + 2.0 * std::ceil(std::log2(static_cast<double>(width)));
        }
        return;
      }
      case OperatorKind::ShmemOffsetRed: {
        if (static_cast<std::size_t>(n) > kScratchDoubles) {
          throw Error(ErrorCode::ScratchOverflow, std::to_string(n) + " partials exceed block scratch");
        }
        const auto bs = rd(*red_starts_, idx);
        const auto be = rd(*red_starts_, idx + 1);
        if (be <= bs) oob(part_.prefix + "reduce_block_starts", idx + 1);
        if (rd(*red_offsets_, be - 1) != n) oob(part_.prefix + "reduce_row_offsets", be - 1);
        const auto row0 = first_row(li, idx);
        std::int64_t longest = 0;
        for (auto k = bs; k + 1 < be; ++k) {
          const auto a = rd(*red_offsets_, k);
          const auto b = rd(*red_offsets_, k + 1);
          if (a < 0 || b < a || b > n) oob(part_.prefix + "reduce_row_offsets", k + 1);
          T sum = 0;
          for (auto i = a; i < b; ++i) sum += in[static_cast<std::size_t>(i)].val;
          out.push_back({row0 + (k - bs), sum, a < n ? in[static_cast<std::size_t>(a)].nz : s});
          longest = std::max(longest, b - a);
        }
        if (cost_) {
          const auto runs = be - bs - 1;
          cost_->blocks[ctx.bmtb].extra_cycles +=
              6.0 + static_cast<double>(longest) * static_cast<double>((runs + tpb_ - 1) / tpb_);
        }
        return;
      }
      default: throw Error(ErrorCode::UnknownFragment, std::string(to_string(op)));
    }
  }

  // Hillis-Steele segmented inclusive scan over 32-lane chunks, carrying the
  // open segment across chunks. Emits one partial per segment at its tail.
  static void segmented_scan(const std::vector<Partial<T>>& in, std::vector<Partial<T>>& out) {
    const auto n = in.size();
    T carry = 0;
    std::size_t seg_start = 0;
    for (std::size_t c0 = 0; c0 < n; c0 += kWarpSize) {
      const std::size_t m = std::min<std::size_t>(kWarpSize, n - c0);
      std::array<T, kWarpSize> v{};
      std::array<bool, kWarpSize> f{};
      std::array<bool, kWarpSize> head{};
      for (std::size_t i = 0; i < m; ++i) {
        const auto g = c0 + i;
        if (in[g].row < 0) throw Error(ErrorCode::MissingKey, "row tags for WARP_SEG_RED");
        head[i] = g == 0 || in[g].row != in[g - 1].row;
        f[i] = head[i];
        v[i] = in[g].val;
      }
      if (!head[0]) v[0] += carry;
      f[0] = true;
      for (std::size_t d = 1; d < kWarpSize; d *= 2) {
        auto nv = v;
        auto nf = f;
        for (std::size_t i = d; i < m; ++i) {
          if (!f[i]) {
            nv[i] = v[i - d] + v[i];
            nf[i] = f[i - d];
          }
        }
        v = nv;
        f = nf;
      }
      for (std::size_t i = 0; i < m; ++i) {
        const auto g = c0 + i;
        if (head[i]) seg_start = g;
        const bool tail = g + 1 == n || in[g + 1].row != in[g].row;
        if (tail) out.push_back({in[g].row, v[i], in[seg_start].nz});
      }
      carry = v[m - 1];
    }
  }

  const PlanPart& part_;
  const std::vector<T>& x_;
  std::int64_t n_rows_total_;
  std::int64_t tpb_ = kDefaultThreadsPerBlock;
  std::map<std::string, IntReader> readers_;
  const std::vector<double>* values_ = nullptr;
  const IntReader* col_ = nullptr;
  const IntReader* rows_ = nullptr;
  const IntReader* sizes_ = nullptr;
  const IntReader* bitmap_ = nullptr;
  const IntReader* red_starts_ = nullptr;
  const IntReader* red_offsets_ = nullptr;
  const IntReader* origin_ = nullptr;
  const IntReader* stripe_ = nullptr;
  std::vector<const IntReader*> nz_off_, child_off_, first_row_;
  std::vector<std::optional<OperatorKind>> reds_;
  PartCost* cost_ = nullptr;
};

template <typename F>
void parallel_for(std::int64_t n, std::size_t workers, F&& body) {
  if (workers <= 1 || n <= 1) {
    for (std::int64_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    try {
      for (auto i = next++; i < n; i = next++) body(i);
    } catch (...) {
      std::lock_guard lock(error_mu);
      if (!error) error = std::current_exception();
      next = n;
    }
  };
  std::vector<std::thread> pool;
  const auto count = std::min<std::size_t>(workers, static_cast<std::size_t>(n));
  for (std::size_t w = 0; w < count; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

struct CostSummary {
  double cycles_sum = 0;
  double cycles_max = 0;
  std::size_t bytes = 0;
};

template <typename T>
void summarize_part(const PartCost& pc, const IntReader& col, std::int64_t col_base, const CostParams& cp,
                    std::size_t mapping_bytes, CostSummary& out) {
  const auto sector = static_cast<std::int64_t>(cp.sector_bytes);
  const auto col_bytes = static_cast<std::int64_t>(col.elem_bytes);
  const auto val_bytes = static_cast<std::int64_t>(sizeof(T));
  out.bytes += pc.meta_bytes;
  std::vector<std::int64_t> cs, vs, xs;
  for (const auto& [_, block] : pc.blocks) {
    double block_cycles = 0;
    for (const auto& [__, warp] : block.warps) {
      std::size_t steps = 0;
      for (const auto& l : warp.lanes) steps = std::max(steps, l.size());
      double cycles = warp.extra_cycles;
      for (std::size_t k = 0; k < steps; ++k) {
        cs.clear();
        vs.clear();
        xs.clear();
        for (const auto& l : warp.lanes) {
          if (k >= l.size()) continue;
          const auto p = l[k];
          if (col_bytes) cs.push_back(p * col_bytes / sector);
          vs.push_back(p * val_bytes / sector);
          xs.push_back((col_base + col(p)) * val_bytes / sector);
        }
        std::size_t distinct = 0;
        for (auto* v : {&cs, &vs, &xs}) {
          std::sort(v->begin(), v->end());
          distinct += static_cast<std::size_t>(std::unique(v->begin(), v->end()) - v->begin());
        }
        cycles += cp.issue_cycles + static_cast<double>(distinct);
        out.bytes += distinct * cp.sector_bytes;
      }
      block_cycles = std::max(block_cycles, cycles);
    }
    block_cycles += block.extra_cycles + 4.0 * static_cast<double>((block.atomics + 31) / 32);
    out.bytes += static_cast<std::size_t>(block.atomics) * (cp.atomic_bytes + mapping_bytes);
    out.cycles_sum += block_cycles;
    out.cycles_max = std::max(out.cycles_max, block_cycles);
  }
}

template <typename T>
std::vector<double> run_plan(const KernelPlan& plan, const FormatBundle& fmt, std::span<const double> x,
                             const ExecOptions& opt, const CostParams* cp, CostSummary* summary) {
  std::vector<T> xs(x.begin(), x.end());
  std::vector<T> y(static_cast<std::size_t>(plan.n_rows), T{0});
  for (const auto& part : plan.parts) {
    PartRunner<T> runner(part, fmt, xs, plan.n_rows);
    PartCost pc;
    if (summary) runner.set_cost(&pc);
    const auto n = part.top_blocks;
    if (summary || opt.mode == ExecMode::Deterministic) {
      std::vector<std::vector<Partial<T>>> results(static_cast<std::size_t>(n));
      parallel_for(n, summary ? 1 : opt.workers, [&](std::int64_t b) { runner.run_block(b, results[static_cast<std::size_t>(b)]); });
      for (std::int64_t b = 0; b < n; ++b) {
        for (const auto& p : results[static_cast<std::size_t>(b)]) y[static_cast<std::size_t>(runner.map_row(p.row))] += p.val;
      }
      if (summary) {
        // Charge atomics to the block that issued them.
        for (std::int64_t b = 0; b < n; ++b) {
          const auto& r = results[static_cast<std::size_t>(b)];
          if (r.empty()) continue;
          std::int64_t key = b;
          if (!part.loops.empty() && part.loops.front().level != Level::Bmtb) {
            const auto per_block = part.loops.front().level == Level::Bmw ? part.geometry.threads_per_block / kWarpSize
                                                                           : part.geometry.threads_per_block;
            key = b / per_block;
          }
          pc.blocks[key].atomics += static_cast<std::int64_t>(r.size());
        }
        summarize_part<T>(pc, runner.col(), part.col_base, *cp, runner.count_mapping_bytes(), *summary);
      }
    } else {
      std::array<std::mutex, 64> locks;
      parallel_for(n, opt.workers, [&](std::int64_t b) {
        std::vector<Partial<T>> tmp;
        runner.run_block(b, tmp);
        for (const auto& p : tmp) {
          const auto g = static_cast<std::size_t>(runner.map_row(p.row));
          std::lock_guard lock(locks[g % locks.size()]);
          y[g] += p.val;
        }
      });
    }
  }
  if (opt.inject_fault && !y.empty()) y[0] += T{1};
  return std::vector<double>(y.begin(), y.end());
}

std::vector<double> dispatch(const KernelPlan& plan, const FormatBundle& fmt, std::span<const double> x,
                             const ExecOptions& opt, const CostParams* cp, CostSummary* summary) {
  if (opt.precision == Precision::F32) return run_plan<float>(plan, fmt, x, opt, cp, summary);
  return run_plan<double>(plan, fmt, x, opt, cp, summary);
}

std::mutex& timing_token() {
  static std::mutex mu;
  return mu;
}

std::int64_t real_nnz(const KernelPlan& plan) {
  std::int64_t n = 0;
  for (const auto& p : plan.parts) n += p.real_nnz;
  return n;
}

ModeledCost finish_cost(const KernelPlan& plan, const CostSummary& s, const CostParams& cp) {
  ModeledCost c;
  c.bytes = s.bytes;
  c.block_cycles_sum = s.cycles_sum;
  c.block_cycles_max = s.cycles_max;
  c.compute_seconds = std::max(s.cycles_sum / cp.concurrent_blocks, s.cycles_max) / cp.clock_hz;
  c.memory_seconds = static_cast<double>(s.bytes) / cp.bandwidth;
  c.elapsed_seconds = std::max(c.compute_seconds, c.memory_seconds) +
                      cp.launch_seconds * static_cast<double>(std::max<std::size_t>(1, plan.parts.size()));
  return c;
}

}  // namespace

std::vector<double> execute_plan(const KernelPlan& plan, const FormatBundle& fmt, std::span<const double> x,
                                 const ExecOptions& opt) {
  return dispatch(plan, fmt, x, opt, nullptr, nullptr);
}

ModeledCost model_cost(const KernelPlan& plan, const FormatBundle& fmt, const CostParams& params) {
  std::vector<double> ones(static_cast<std::size_t>(plan.n_cols), 1.0);
  CostSummary s;
  dispatch(plan, fmt, ones, ExecOptions{}, &params, &s);
  return finish_cost(plan, s, params);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double gflops_of(std::int64_t nnz, double elapsed_seconds) {
  if (elapsed_seconds <= 0) return 0.0;
  return 2.0 * static_cast<double>(nnz) / elapsed_seconds / 1e9;
}

ExecutionReport benchmark(const KernelPlan& plan, const FormatBundle& fmt, std::span<const double> x,
                          const BenchOptions& opt) {
  if (opt.reps < 1) throw Error(ErrorCode::InvalidParam, "reps must be >= 1");
  ExecutionReport rep;
  if (opt.timing == TimingMode::Modeled) {
    const CostParams cp;
    CostSummary s;
    ExecOptions eo = opt.exec;
    eo.mode = ExecMode::Deterministic;
    rep.y = dispatch(plan, fmt, x, eo, &cp, &s);
    const auto c = finish_cost(plan, s, cp);
    rep.elapsed_seconds = c.elapsed_seconds;
    rep.bytes_touched = c.bytes;
  } else {
    std::lock_guard lock(timing_token());
    for (std::size_t i = 0; i < opt.warmup; ++i) execute_plan(plan, fmt, x, opt.exec);
    std::vector<double> times;
    for (std::size_t i = 0; i < opt.reps; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      rep.y = execute_plan(plan, fmt, x, opt.exec);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    rep.elapsed_seconds = median(times);
    rep.bytes_touched = fmt.total_bytes() + (x.size() + rep.y.size()) * sizeof(double);
  }
  rep.gflops = gflops_of(real_nnz(plan), rep.elapsed_seconds);
  return rep;
}

}  // namespace spmvd
