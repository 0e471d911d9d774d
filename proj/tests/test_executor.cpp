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
#include "spmvd/search.hpp"

using namespace spmvd;
using namespace testing_support;

namespace {

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

std::vector<OperatorGraph> assorted_designs() {
  std::vector<OperatorGraph> out{csr_scalar(), ell_like(), sell_like()};
  out.push_back(chain({{K::Compress, {}}, {K::BmtNnzBlock, nnz(2)}, {K::ThreadBitmapRed, {}}, {K::GmemAtomRed, {}}}));
  out.push_back(chain({{K::Compress, {}},
                       {K::BmwNnzBlock, nnz(32)},
                       {K::BmtNnzBlock, nnz(1)},
                       {K::WarpSegRed, {}},
                       {K::GmemAtomRed, {}}}));
  out.push_back(chain({{K::Bin, {{"thresholds", std::vector<std::int64_t>{2}}}},
                       {K::Compress, {}},
                       {K::BmtbNnzBlock, nnz(4)},
                       {K::BmwNnzBlock, nnz(2)},
                       {K::WarpBitmapRed, {}},
                       {K::ShmemOffsetRed, {}},
                       {K::GmemAtomRed, {}}}));
  return out;
}

}  // namespace

TEST_CASE("designs on the canonical matrix") {
  const std::vector<double> ones(4, 1.0), want{3, 3, 15, 7};
  for (const auto& g : assorted_designs()) {
    const auto b = build(g);
    CHECK_MESSAGE(execute_plan(b.plan, b.fmt, ones) == want, describe(g));
  }
}

TEST_CASE("identity matrix gives y = x") {
  const auto id = CooMatrix::from_triplets(5, 5, {0, 1, 2, 3, 4}, {0, 1, 2, 3, 4}, {1, 1, 1, 1, 1});
  const std::vector<double> x{1.5, -2, 3, 0.25, 9};
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    const auto b = build(random_design(rng, id), id);
    CHECK(execute_plan(b.plan, b.fmt, x) == x);
  }
}

TEST_CASE("column stripes add up") {
  OperatorGraph g;
  const int d = g.add_node(g.root(), K::ColDiv, {{"cuts", std::vector<std::int64_t>{2}}});
  for (int s = 0; s < 2; ++s) {
    g.add_chain(d, {{K::Compress, {}}, {K::BmtRowBlock, rows(1)}, {K::ThreadTotalRed, {}}, {K::GmemAtomRed, {}}});
  }
  const auto b = build(g);
  CHECK(b.plan.parts.size() == 2);
  const std::vector<double> x{1, 2, 3, 4};
  const auto y = execute_plan(b.plan, b.fmt, x);
  const auto ref = dense_spmv(canonical_a(), x);
  REQUIRE(y.size() == ref.size());
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == doctest::Approx(ref[i]).epsilon(1e-15));
}

TEST_CASE("dimension and bounds errors") {
  const auto b = build(csr_scalar());
  CHECK_THROWS_AS(execute_plan(b.plan, b.fmt, std::vector<double>(3, 1.0)), Error);

  auto broken = b.fmt;
  TypedArray cols = broken.at("col_indices");
  cols.ints[1] = 99;
  broken.remove("col_indices");
  broken.add("col_indices", cols);
  try {
    execute_plan(b.plan, broken, std::vector<double>(4, 1.0));
    FAIL("expected OutOfBoundsRead");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::OutOfBoundsRead);
  }
}

TEST_CASE("scratch is capped") {
  const Index n = 8000;
  std::vector<Index> r, c;
  for (Index i = 0; i < n; ++i) {
    r.push_back(i);
    c.push_back(i);
  }
  const auto m = CooMatrix::from_triplets(n, n, r, c, std::vector<double>(r.size(), 1.0));
  const auto b = build(chain({{K::Compress, {}},
                              {K::BmtbRowBlock, rows(n)},
                              {K::BmtRowBlock, rows(1)},
                              {K::ThreadTotalRed, {}},
                              {K::ShmemOffsetRed, {}},
                              {K::GmemAtomRed, {}}}),
                       m);
  try {
    execute_plan(b.plan, b.fmt, std::vector<double>(static_cast<std::size_t>(n), 1.0));
    FAIL("expected ScratchOverflow");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScratchOverflow);
  }
}

TEST_CASE("oracle equivalence and determinism across modes") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 150; ++t) {
    const auto m = random_matrix(rng);
    const auto g = random_design(rng, m);
    const auto b = build(g, m);
    const auto x = random_x(static_cast<std::size_t>(m.n_cols), rng);
    const auto ref = spmv_oracle(m, x);
    const double tol = oracle_tolerance(m, x, Precision::F64);

    ExecOptions det;
    const auto y1 = execute_plan(b.plan, b.fmt, x, det);
    CHECK_MESSAGE(max_abs_diff(y1, ref) <= tol, describe(g));
    det.workers = 4;
    CHECK(execute_plan(b.plan, b.fmt, x, det) == y1);
    CHECK(execute_plan(b.plan, b.fmt, x, det) == y1);

    ExecOptions par;
    par.mode = ExecMode::Parallel;
    par.workers = 3;
    CHECK(max_abs_diff(execute_plan(b.plan, b.fmt, x, par), ref) <= tol);

    ExecOptions f32;
    f32.precision = Precision::F32;
    CHECK(max_abs_diff(execute_plan(b.plan, b.fmt, x, f32), ref) <= oracle_tolerance(m, x, Precision::F32));
  }
}

TEST_CASE("injected fault changes the output") {
  const auto b = build(csr_scalar());
  ExecOptions o;
  o.inject_fault = true;
  CHECK(execute_plan(b.plan, b.fmt, std::vector<double>(4, 1.0), o) != std::vector<double>{3, 3, 15, 7});
}

TEST_CASE("benchmark helpers") {
  CHECK(median({3, 1, 2}) == 2);
  CHECK(median({4, 1, 2, 3}) == doctest::Approx(2.5));
  CHECK(gflops_of(7, 1e-6) == doctest::Approx(0.014));
  CHECK(gflops_of(7, 0) == 0);
}

TEST_CASE("benchmark reports") {
  const auto b = build(ell_like());
  const std::vector<double> x(4, 1.0);
  BenchOptions o;
  const auto r = benchmark(b.plan, b.fmt, x, o);
  CHECK(r.y == execute_plan(b.plan, b.fmt, x));
  CHECK(r.elapsed_seconds > 0);
  // Pads are not counted as work.
  CHECK(r.gflops == doctest::Approx(gflops_of(7, r.elapsed_seconds)));
  CHECK(r.bytes_touched > 0);
  CHECK(benchmark(b.plan, b.fmt, x, o).elapsed_seconds == r.elapsed_seconds);

  o.timing = TimingMode::Wall;
  o.reps = 3;
  o.warmup = 1;
  const auto w = benchmark(b.plan, b.fmt, x, o);
  CHECK(w.y == r.y);
  CHECK(w.elapsed_seconds > 0);
  CHECK(w.gflops > 0);
}

TEST_CASE("modeled cost favours less traffic") {
  const auto m = CooMatrix::from_triplets(64, 64, [] {
    std::vector<Index> r;
    for (Index i = 0; i < 64; ++i) r.insert(r.end(), {i, i});
    return r;
  }(), [] {
    std::vector<Index> c;
    for (Index i = 0; i < 64; ++i) c.insert(c.end(), {i, (i + 1) % 64 == 0 ? 0 : i + 1});
    return c;
  }(), std::vector<double>(128, 1.0));
  const auto plain = build(csr_scalar(), m);
  const auto [plan, fmt] = apply_compression(plain.plan, plain.fmt);
  const auto a = model_cost(plain.plan, plain.fmt);
  const auto c = model_cost(plan, fmt);
  CHECK(c.bytes < a.bytes);
  CHECK(c.elapsed_seconds <= a.elapsed_seconds);
}
