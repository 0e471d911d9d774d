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

#include <random>

#include "common.hpp"
#include "doctest.h"
#include "spmvd/designer.hpp"
#include "spmvd/error.hpp"
#include "spmvd/executor.hpp"
#include "spmvd/fuzz.hpp"
#include "spmvd/plan.hpp"

using namespace spmvd;
using namespace testing_support;

namespace {

using Ints = std::vector<std::int64_t>;

struct Built {
  KernelPlan plan;
  FormatBundle fmt;
};

Built build(const OperatorGraph& g, const CooMatrix& m = canonical_a()) {
  const auto ms = execute_graph(g, m);
  Built b;
  b.plan = build_plan(g, ms);
  b.fmt = build_format(ms, required_keys(b.plan));
  return b;
}

bool has_stage(const PlanPart& p, StageKind kind, const std::string& name) {
  for (const auto& s : p.pipeline) {
    if (s.kind == kind && s.name == name) return true;
  }
  return false;
}

std::size_t adapters(const PlanPart& p) {
  std::size_t n = 0;
  for (const auto& s : p.pipeline) n += s.kind == StageKind::Adapter;
  return n;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::Io;
}

// n rows of `len` entries each.
CooMatrix uniform_rows(Index n, Index len) {
  std::vector<Index> r, c;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < len; ++j) {
      r.push_back(i);
      c.push_back(j);
    }
  }
  return CooMatrix::from_triplets(n, len, r, c, std::vector<double>(r.size(), 1.0));
}

}  // namespace

TEST_CASE("plan of the SELL-like design") {
  const auto b = build(sell_like());
  REQUIRE(b.plan.parts.size() == 1);
  const auto& p = b.plan.parts[0];
  REQUIRE(p.loops.size() == 2);
  CHECK(p.loops[0].level == Level::Bmtb);
  CHECK(p.loops[1].level == Level::Bmt);
  CHECK(p.reduction(Level::Bmt) == K::ThreadTotalRed);
  CHECK(p.pipeline.back().op == K::GmemAtomRed);
  CHECK(adapters(p) == 0);
  CHECK(p.geometry.grid_blocks == 2);
  CHECK(p.geometry.threads_per_block == kDefaultThreadsPerBlock);
}

TEST_CASE("warp blocks give a warp loop") {
  const auto b =
      build(chain({{K::Compress, {}}, {K::BmwRowBlock, rows(1)}, {K::WarpTotalRed, {}}, {K::GmemAtomRed, {}}}));
  const auto& p = b.plan.parts[0];
  REQUIRE(p.loops.size() == 1);
  CHECK(p.loops[0].level == Level::Bmw);
  CHECK(p.reduction(Level::Bmw) == K::WarpTotalRed);
  CHECK(execute_plan(b.plan, b.fmt, std::vector<double>(4, 1.0)) == std::vector<double>{3, 3, 15, 7});
}

TEST_CASE("one row in one BMT") {
  const auto m = uniform_rows(1, 5);
  const auto b =
      build(chain({{K::Compress, {}}, {K::BmtNnzBlock, nnz(5)}, {K::ThreadTotalRed, {}}, {K::GmemAtomRed, {}}}), m);
  CHECK(b.plan.parts[0].top_blocks == 1);
  CHECK(execute_plan(b.plan, b.fmt, std::vector<double>(5, 2.0)) == std::vector<double>{10});
}

TEST_CASE("SET_RESOURCES sets the geometry") {
  const auto b = build(chain({{K::Compress, {}},
                              {K::BmtRowBlock, rows(1)},
                              {K::SetResources, {{"threads_per_block", std::int64_t{64}}}},
                              {K::ThreadTotalRed, {}},
                              {K::GmemAtomRed, {}}}));
  CHECK(b.plan.parts[0].geometry.threads_per_block == 64);
}

TEST_CASE("plan errors") {
  const auto ms = execute_graph(csr_scalar(), canonical_a());
  PlanOptions no_default;
  no_default.default_threads_per_block = 0;
  CHECK(code_of([&] { build_plan(csr_scalar(), ms, no_default); }) == ErrorCode::MissingResource);

  const auto wide =
      chain({{K::Compress, {}}, {K::BmtRowBlock, rows(2)}, {K::ThreadTotalRed, {}}, {K::GmemAtomRed, {}}});
  CHECK(code_of([&] { build(wide); }) == ErrorCode::IncompatibleReduction);

  KernelPlan bad;
  PlanPart part;
  part.pipeline = {{StageKind::Compute, K::Input, std::nullopt, Storage::None, Storage::Scratch, "mac"},
                   {StageKind::Reduce, K::ThreadTotalRed, Level::Bmt, Storage::Register, Storage::Register,
                    "red_THREAD_TOTAL_RED"}};
  bad.parts.push_back(part);
  CHECK(code_of([&] { insert_adapters(bad); }) == ErrorCode::NoAdapterRule);
}

TEST_CASE("adapters") {
  SUBCASE("thread results feeding a row-offset block reduction") {
    const auto b = build(chain({{K::Compress, {}},
                                {K::BmtbRowBlock, rows(2)},
                                {K::BmtRowBlock, rows(1)},
                                {K::ThreadTotalRed, {}},
                                {K::ShmemOffsetRed, {}},
                                {K::GmemAtomRed, {}}}));
    CHECK(has_stage(b.plan.parts[0], StageKind::Adapter, "adapter_reg_to_scratch"));
    CHECK(adapters(b.plan.parts[0]) == 1);
    CHECK(execute_plan(b.plan, b.fmt, std::vector<double>(4, 1.0)) == std::vector<double>{3, 3, 15, 7});
  }
  SUBCASE("atomic add reads registers directly") {
    CHECK(adapters(build(csr_scalar()).plan.parts[0]) == 0);
  }
  SUBCASE("warp results feeding a block sum") {
    const auto b = build(chain({{K::Compress, {}},
                                {K::BmtbRowBlock, rows(1)},
                                {K::BmwNnzBlock, nnz(32)},
                                {K::WarpTotalRed, {}},
                                {K::ShmemTotalRed, {}},
                                {K::GmemAtomRed, {}}}));
    CHECK(has_stage(b.plan.parts[0], StageKind::Adapter, "adapter_lane0_to_scratch"));
    CHECK(execute_plan(b.plan, b.fmt, std::vector<double>(4, 1.0)) == std::vector<double>{3, 3, 15, 7});
  }
  SUBCASE("insertion is idempotent") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 50; ++t) {
      const auto m = random_matrix(rng);
      const auto plan = build(random_design(rng, m), m).plan;
      CHECK(insert_adapters(plan) == plan);
    }
  }
}

TEST_CASE("array model fitting") {
  SUBCASE("linear offsets") {
    const auto m = fit_array_model(Ints{0, 64, 128, 192});
    REQUIRE(m);
    CHECK(m->kind == ModelKind::Linear);
    CHECK(m->k == 64);
    CHECK(m->b == 0);
    CHECK(m->patches.empty());
  }
  SUBCASE("one outlier becomes one patch") {
    const auto m = fit_array_model(Ints{0, 64, 999, 192});
    REQUIRE(m);
    CHECK(m->kind == ModelKind::Linear);
    CHECK(m->k == 64);
    CHECK(m->b == 0);
    CHECK(m->patches == std::map<std::int64_t, std::int64_t>{{2, 999}});
  }
  SUBCASE("random data does not fit") {
    std::mt19937_64 rng(99);
    Ints a(64);
    for (auto& v : a) v = static_cast<std::int64_t>(rng() >> 1);
    CHECK_FALSE(fit_array_model(a));
  }
  SUBCASE("step and periodic forms") {
    const auto s = fit_array_model(Ints{5, 5, 5, 5, 8, 8, 8, 8, 11, 11, 11, 11});
    REQUIRE(s);
    CHECK(s->patches.empty());
    CHECK(s->kind == ModelKind::Step);
    Ints per;
    for (int i = 0; i < 64; ++i) per.push_back(7 + 2 * (i % 32));
    const auto p = fit_array_model(per);
    REQUIRE(p);
    CHECK(p->kind == ModelKind::PeriodicLinear);
    CHECK(p->period == 32);
    CHECK(p->patches.empty());
  }
  SUBCASE("budget") {
    CHECK_FALSE(fit_array_model(Ints{0, 64, 999, 192}, 0));
    CHECK_FALSE(fit_array_model(Ints{3}));
  }
  SUBCASE("fits are exact") {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 500; ++t) {
      const auto n = std::uniform_int_distribution<int>(2, 200)(rng);
      const auto k = std::uniform_int_distribution<std::int64_t>(-50, 50)(rng);
      const auto b = std::uniform_int_distribution<std::int64_t>(-1000, 1000)(rng);
      const auto period = model_periods()[rng() % model_periods().size()];
      const auto form = rng() % 3;
      Ints a(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        a[static_cast<std::size_t>(i)] = form == 0 ? b + k * i : form == 1 ? b + k * (i % period) : b + k * (i / period);
      }
      const auto noise = rng() % 12;
      for (std::size_t j = 0; j < noise; ++j) a[rng() % a.size()] = static_cast<std::int64_t>(rng() % 100000);
      const auto m = fit_array_model(a);
      if (!m) continue;
      CHECK(m->patches.size() <= kDefaultPatchBudget);
      for (int i = 0; i < n; ++i) CHECK(m->eval(i) == a[static_cast<std::size_t>(i)]);
    }
  }
}

TEST_CASE("compression of the ELL-like design") {
  const auto b = build(ell_like());
  const auto [plan, fmt] = apply_compression(b.plan, b.fmt);
  CHECK_FALSE(fmt.has("bmt_nz_offsets"));
  const auto& acc = plan.parts[0].accessors.at("bmt_nz_offsets");
  CHECK(acc.kind == AccessorKind::Model);
  CHECK(acc.model.kind == ModelKind::Linear);
  CHECK(acc.model.k == 3);
  CHECK(acc.model.b == 0);
  CHECK(acc.model.patches.empty());
  CHECK(b.fmt.at("bmt_nz_offsets").bytes() == 5 * 4);
  std::size_t dropped = 0;
  for (const auto& name : b.fmt.names()) {
    if (!fmt.has(name)) dropped += b.fmt.at(name).bytes();
  }
  CHECK(b.fmt.total_bytes() - fmt.total_bytes() == dropped);
  const std::vector<double> x{1, 1, 1, 1};
  CHECK(execute_plan(plan, fmt, x) == execute_plan(b.plan, b.fmt, x));
}

TEST_CASE("compression of the SELL-like design drops the block offsets") {
  const auto b = build(sell_like());
  const auto [plan, fmt] = apply_compression(b.plan, b.fmt);
  CHECK_FALSE(fmt.has("bmtb_bmt_offsets"));
  CHECK_FALSE(fmt.has("bmt_row_offsets"));
}

TEST_CASE("nothing to fit leaves the design alone") {
  const auto b = build(csr_scalar());
  CompressionOptions strict;
  strict.patch_budget = 0;
  const auto [plan, fmt] = apply_compression(b.plan, b.fmt, strict);
  CHECK(plan == b.plan);
  CHECK(fmt == b.fmt);
}

TEST_CASE("short arrays can be fused") {
  const auto b = build(sell_like());
  CompressionOptions fuse;
  fuse.patch_budget = 0;
  fuse.fuse_short_arrays = true;
  const auto [plan, fmt] = apply_compression(b.plan, b.fmt, fuse);
  CHECK(fmt.has("fused_i32"));
  CHECK(fmt.names().size() < b.fmt.names().size());
  const std::vector<double> x{1, 2, 3, 4};
  CHECK(execute_plan(plan, fmt, x) == execute_plan(b.plan, b.fmt, x));
}

TEST_CASE("compressed and plain plans agree bit for bit") {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 100; ++t) {
    const auto m = random_matrix(rng);
    const auto b = build(random_design(rng, m), m);
    const auto x = random_x(static_cast<std::size_t>(m.n_cols), rng);
    const auto [plan, fmt] = apply_compression(b.plan, b.fmt);
    CHECK(execute_plan(plan, fmt, x) == execute_plan(b.plan, b.fmt, x));
    CHECK(fmt.total_bytes() <= b.fmt.total_bytes());
  }
}

TEST_CASE("plan JSON round trip") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 40; ++t) {
    const auto m = random_matrix(rng);
    const auto b = build(random_design(rng, m), m);
    CHECK(parse_plan(serialize_plan(b.plan)) == b.plan);
    const auto c = apply_compression(b.plan, b.fmt).first;
    CHECK(parse_plan(serialize_plan(c)) == c);
  }
}

TEST_CASE("listing") {
  const auto b = build(sell_like());
  const auto text = emit_source(b.plan, b.fmt);
  CHECK(text.find("// bmtb loop") != std::string::npos);
  CHECK(text.find("// bmt loop") != std::string::npos);
  CHECK(text.find("values[i] * x[col_indices[i]]") != std::string::npos);
  CHECK(text.find("atomicAdd") != std::string::npos);
  CHECK(text.find("adapter") == std::string::npos);
  CHECK(text == emit_source(b.plan, b.fmt));

  const auto wide = build(csr_scalar(), uniform_rows(4, 64));
  const auto [plan, fmt] = apply_compression(wide.plan, wide.fmt);
  CHECK(emit_source(plan, fmt).find("64*bmt_id") != std::string::npos);
}
