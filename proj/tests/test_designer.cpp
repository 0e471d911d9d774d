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
#include "spmvd/fuzz.hpp"

using namespace spmvd;
using namespace testing_support;

namespace {

using Ints = std::vector<std::int64_t>;

Namespace run(const OperatorGraph& g, const CooMatrix& m = canonical_a()) {
  const auto ms = execute_graph(g, m);
  REQUIRE(ms.namespaces.size() == 1);
  return ms.namespaces[0];
}

OperatorNode node_of(K kind, ParamMap p = {}) {
  OperatorNode n;
  n.kind = kind;
  n.params = std::move(p);
  return n;
}

// Rows of lengths [1,2,1,3].
CooMatrix zigzag() {
  return CooMatrix::from_triplets(4, 4, {0, 1, 1, 2, 3, 3, 3}, {0, 0, 1, 2, 0, 1, 3}, {1, 2, 3, 4, 5, 6, 7});
}

void check_offsets(const Ints& a, std::int64_t total) {
  REQUIRE_FALSE(a.empty());
  CHECK(a.front() == 0);
  CHECK(a.back() == total);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i - 1] <= a[i]);
}

}  // namespace

TEST_CASE("input only mirrors the COO arrays") {
  OperatorGraph g;
  const auto ns = run(g);
  const auto a = canonical_a();
  CHECK(ns.ints("row_indices") == Ints(a.row_idx.begin(), a.row_idx.end()));
  CHECK(ns.ints("col_indices") == Ints(a.col_idx.begin(), a.col_idx.end()));
  CHECK(ns.reals("values") == a.values);
}

TEST_CASE("COMPRESS records row lengths") {
  const auto ns = run(chain({{K::Compress, {}}}));
  CHECK(ns.ints("row_lengths") == Ints{2, 1, 3, 1});
  CHECK(ns.ints("col_indices") == Ints{0, 2, 1, 0, 1, 3, 3});
  CHECK(ns.ints("row_indices") == Ints{0, 0, 1, 2, 2, 2, 3});

  auto again = ns;
  op_compress(again);
  CHECK(again.ints("col_indices") == ns.ints("col_indices"));
  CHECK(again.reals("values") == ns.reals("values"));

  auto one = initial_namespace(CooMatrix::from_triplets(1, 1, {0}, {0}, {5.0}));
  op_compress(one);
  CHECK(one.reals("values") == std::vector<double>{5.0});
}

TEST_CASE("ROW_DIV(cuts=[2]) splits rows") {
  OperatorGraph g;
  const int d = g.add_node(g.root(), K::RowDiv, {{"cuts", Ints{2}}});
  g.add_node(d, K::Compress);
  g.add_node(d, K::Compress);
  const auto ms = execute_graph(g, canonical_a());
  REQUIRE(ms.namespaces.size() == 2);
  CHECK(ms.namespaces[0].ints("row_indices") == Ints{0, 0, 1});
  CHECK(ms.namespaces[1].ints("row_indices") == Ints{0, 0, 0, 1});
  CHECK(ms.namespaces[0].reals("values") == std::vector<double>{1, 2, 3});
  CHECK(ms.namespaces[1].reals("values") == std::vector<double>{4, 5, 6, 7});
  CHECK(global_row(ms.namespaces[1], 0) == 2);
  CHECK(reconstruct(ms) == canonical_a());
}

TEST_CASE("bad ROW_DIV cuts carry the node id") {
  OperatorGraph g;
  const int d = g.add_node(g.root(), K::RowDiv, {{"cuts", Ints{4}}});
  g.add_node(d, K::Compress);
  g.add_node(d, K::Compress);
  try {
    execute_graph(g, canonical_a());
    FAIL("expected InvalidParam");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParam);
    CHECK(e.node() == d);
  }
}

TEST_CASE("COL_DIV stripes partition the columns") {
  OperatorGraph g;
  const int d = g.add_node(g.root(), K::ColDiv, {{"cuts", Ints{2}}});
  g.add_node(d, K::Compress);
  g.add_node(d, K::Compress);
  const auto ms = execute_graph(g, canonical_a());
  REQUIRE(ms.namespaces.size() == 2);
  CHECK(ms.namespaces[0].reals("values") == std::vector<double>{1, 3, 4, 5});
  CHECK(ms.namespaces[1].reals("values") == std::vector<double>{2, 6, 7});
  CHECK(reconstruct(ms) == canonical_a());
}

TEST_CASE("sort family") {
  SUBCASE("SORT is a stable descending sort") {
    auto ns = initial_namespace(canonical_a());
    op_sort_family(ns, node_of(K::Sort));
    CHECK(ns.ints("origin_rows") == Ints{2, 0, 1, 3});
  }
  SUBCASE("SORT on equal lengths is the identity") {
    auto m = CooMatrix::from_triplets(3, 2, {0, 1, 2}, {1, 0, 1}, {1, 2, 3});
    auto ns = initial_namespace(m);
    op_sort_family(ns, node_of(K::Sort));
    CHECK(ns.ints("origin_rows") == Ints{0, 1, 2});
  }
  SUBCASE("BIN groups rows by threshold") {
    auto ns = initial_namespace(canonical_a());
    op_sort_family(ns, node_of(K::Bin, {{"thresholds", Ints{2}}}));
    CHECK(ns.ints("origin_rows") == Ints{0, 1, 3, 2});
    check_offsets(ns.ints("bin_offsets"), 4);
  }
  SUBCASE("BIN rejects descending thresholds") {
    auto ns = initial_namespace(canonical_a());
    try {
      op_sort_family(ns, node_of(K::Bin, {{"thresholds", Ints{3, 1}}}));
      FAIL("expected BadThresholds");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::BadThresholds);
    }
  }
  SUBCASE("SORT_SUB sorts within groups") {
    auto ns = initial_namespace(zigzag());
    op_sort_family(ns, node_of(K::SortSub, {{"group", std::int64_t{2}}}));
    CHECK(ns.ints("origin_rows") == Ints{1, 0, 3, 2});
  }
  SUBCASE("permutations compose") {
    auto ns = initial_namespace(zigzag());
    op_sort_family(ns, node_of(K::SortSub, {{"group", std::int64_t{2}}}));
    op_sort_family(ns, node_of(K::Sort));
    CHECK(ns.ints("origin_rows") == Ints{3, 1, 0, 2});
  }
}

TEST_CASE("block family") {
  SUBCASE("BMT_ROW_BLOCK(1)") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtRowBlock, rows(1)}}));
    CHECK(ns.ints("bmt_row_offsets") == Ints{0, 1, 2, 3, 4});
    CHECK(ns.ints("bmt_nz_offsets") == Ints{0, 2, 3, 6, 7});
  }
  SUBCASE("BMT_NNZ_BLOCK(2)") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtNnzBlock, nnz(2)}}));
    CHECK(ns.ints("bmt_nz_offsets") == Ints{0, 2, 4, 6, 7});
  }
  SUBCASE("BMTB_ROW_BLOCK(4) on four rows") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtbRowBlock, rows(4)}}));
    CHECK(ns.ints("bmtb_nz_offsets") == Ints{0, 7});
  }
  SUBCASE("children restart at parent boundaries") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtbRowBlock, rows(2)}, {K::BmtNnzBlock, nnz(2)}}));
    CHECK(ns.ints("bmtb_nz_offsets") == Ints{0, 3, 7});
    CHECK(ns.ints("bmt_nz_offsets") == Ints{0, 2, 3, 5, 7});
    CHECK(ns.ints("bmtb_bmt_offsets") == Ints{0, 2, 4});
  }
  SUBCASE("size zero") {
    auto ns = initial_namespace(canonical_a());
    op_compress(ns);
    try {
      op_block_family(ns, K::BmtRowBlock, 0);
      FAIL("expected SizeZero");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::SizeZero);
    }
  }
}

TEST_CASE("BMT_PAD") {
  SUBCASE("global scope pads every BMT to the longest row") {
    const auto ns = run(ell_like());
    CHECK(ns.reals("values").size() == 12);
    CHECK(ns.ints("bmt_nz_offsets") == Ints{0, 3, 6, 9, 12});
    CHECK(ns.ints("pad_flags") == Ints{0, 0, 1, 0, 1, 1, 0, 0, 0, 0, 1, 1});
    // Pads take the last real column of their BMT.
    CHECK(ns.ints("col_indices") == Ints{0, 2, 2, 1, 1, 1, 0, 1, 3, 3, 3, 3});
    const auto& v = ns.reals("values");
    const auto& f = ns.ints("pad_flags");
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (f[i]) CHECK(v[i] == 0.0);
    }
  }
  SUBCASE("equal BMTs get no pads") {
    auto m = CooMatrix::from_triplets(2, 2, {0, 0, 1, 1}, {0, 1, 0, 1}, {1, 2, 3, 4});
    const auto ns = run(ell_like(), m);
    CHECK(ns.reals("values").size() == 4);
  }
  SUBCASE("per-BMTB scope") {
    const auto ns = run(sell_like());
    CHECK(ns.ints("bmt_sizes_of_bmtb") == Ints{3, 1});
    CHECK(ns.reals("values").size() == 8);
  }
}

TEST_CASE("SORT_BMTB") {
  SUBCASE("one block matches a global SORT") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtbRowBlock, rows(4)}, {K::SortBmtb, {}}}));
    auto sorted = initial_namespace(canonical_a());
    op_sort_family(sorted, node_of(K::Sort));
    CHECK(ns.ints("origin_rows") == sorted.ints("origin_rows"));
  }
  SUBCASE("blocks sort independently") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtbRowBlock, rows(2)}, {K::SortBmtb, {}}}), zigzag());
    CHECK(ns.ints("origin_rows") == Ints{1, 0, 3, 2});
  }
  SUBCASE("sorted blocks are unchanged") {
    const auto ns = run(chain({{K::Compress, {}}, {K::BmtbRowBlock, rows(2)}, {K::SortBmtb, {}}}));
    CHECK(ns.ints("origin_rows") == Ints{0, 1, 2, 3});
  }
}

TEST_CASE("implementing choices") {
  const auto ns = run(chain({{K::Compress, {}},
                             {K::BmtRowBlock, rows(1)},
                             {K::SetResources, {{"threads_per_block", std::int64_t{128}}}},
                             {K::ThreadTotalRed, {}},
                             {K::GmemAtomRed, {}}}));
  CHECK(ns.scalar("threads_per_block") == 128);
  CHECK(ns.has("red_gmem"));

  const auto sh = run(chain({{K::Compress, {}}, {K::BmtbRowBlock, rows(2)}, {K::ShmemOffsetRed, {}}, {K::GmemAtomRed, {}}}));
  CHECK(sh.ints("reduce_row_offsets") == Ints{0, 2, 3, 0, 3, 4});
}

TEST_CASE("row-length mutation points") {
  const Ints a{5, 5, 5, 100, 100};
  const double avg = 43.0;
  CHECK(discretize_row_mutation(a, avg, 1.0, 8) == Ints{3});
  CHECK(discretize_row_mutation(Ints{4, 4, 4}, 4.0, 1.0, 8).empty());
  CHECK(discretize_row_mutation(Ints{1, 2, 2, 1, 3}, 1.8, 0.0, 8) == Ints{1, 3, 4});
  CHECK(discretize_row_mutation(Ints{1, 2, 2, 1, 3}, 1.8, 0.0, 2) == Ints{1, 3});
}

TEST_CASE("designs preserve the matrix") {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 150; ++t) {
    const auto m = random_matrix(rng);
    const auto g = random_design(rng, m);
    const auto ms = execute_graph(g, m);
    CHECK_MESSAGE(reconstruct(ms) == m, describe(g));
    for (const auto& ns : ms.namespaces) {
      const auto n = static_cast<std::int64_t>(ns.ints("row_indices").size());
      CHECK(ns.ints("col_indices").size() == static_cast<std::size_t>(n));
      CHECK(ns.reals("values").size() == static_cast<std::size_t>(n));
      for (Level l : present_levels(ns)) {
        check_offsets(ns.ints(std::string(level_prefix(l)) + "_nz_offsets"), n);
      }
      if (ns.has("origin_rows")) {
        auto o = ns.ints("origin_rows");
        std::sort(o.begin(), o.end());
        for (std::size_t i = 0; i < o.size(); ++i) CHECK(o[i] == static_cast<std::int64_t>(i));
      }
      if (ns.has("pad_flags")) {
        const auto& f = ns.ints("pad_flags");
        const auto& v = ns.reals("values");
        for (std::size_t i = 0; i < f.size(); ++i) {
          if (f[i]) CHECK(v[i] == 0.0);
        }
      }
    }
  }
}
