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
#include "spmvd/error.hpp"
#include "spmvd/graph.hpp"

using namespace spmvd;
using namespace testing_support;

namespace {

bool has_rule(const std::vector<Violation>& v, const std::string& rule) {
  for (const auto& x : v) {
    if (x.rule == rule) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("only converting operators may follow the input") {
  OperatorGraph g;
  const std::set<OperatorKind> want{K::RowDiv, K::ColDiv, K::Sort, K::SortSub, K::Bin, K::Compress};
  CHECK(legal_successors(g, g.root()) == want);
}

TEST_CASE("successors after a BMT block") {
  OperatorGraph g;
  const int leaf = g.add_chain(g.root(), {{K::Compress, {}}, {K::BmtRowBlock, rows(1)}});
  const auto s = legal_successors(g, leaf);
  for (auto k : {K::BmtbRowBlock, K::BmtbNnzBlock, K::BmwRowBlock, K::BmwNnzBlock, K::BmtNnzBlock, K::RowDiv,
                 K::ColDiv, K::Sort, K::SortSub, K::Bin, K::Compress}) {
    CHECK_FALSE(s.count(k));
  }
  CHECK(s.count(K::BmtPad));
  CHECK(s.count(K::ThreadTotalRed));
  CHECK(s.count(K::GmemAtomRed));
}

TEST_CASE("nothing follows GMEM_ATOM_RED") {
  auto g = csr_scalar();
  CHECK(legal_successors(g, g.leaves().front()).empty());
}

TEST_CASE("unknown node") {
  OperatorGraph g;
  CHECK_THROWS_AS(legal_successors(g, 42), Error);
}

TEST_CASE("bans are removed from successors") {
  OperatorGraph g;
  BanList ban{{K::Sort, K::Bin}};
  const auto s = legal_successors(g, g.root(), ban);
  CHECK_FALSE(s.count(K::Sort));
  CHECK_FALSE(s.count(K::Bin));
  CHECK(s.count(K::Compress));
}

TEST_CASE("validate examples") {
  CHECK(validate_graph(sell_like(), true).empty());
  CHECK(validate_graph(csr_scalar(), true).empty());
  CHECK(validate_graph(ell_like(), true).empty());

  const auto late_sort = chain({{K::Compress, {}}, {K::Sort, {}}});
  CHECK(has_rule(validate_graph(late_sort), "stage-order"));

  const auto warp_no_bmw =
      chain({{K::Compress, {}}, {K::BmtRowBlock, rows(1)}, {K::WarpTotalRed, {}}, {K::GmemAtomRed, {}}});
  CHECK(has_rule(validate_graph(warp_no_bmw), "level-mismatch"));

  const auto coarse_after_fine = chain({{K::Compress, {}}, {K::BmtRowBlock, rows(1)}, {K::BmtbRowBlock, rows(2)}});
  CHECK(has_rule(validate_graph(coarse_after_fine), "block-order"));

  const auto pad_first = chain({{K::Compress, {}}, {K::BmtPad, scope("global")}});
  CHECK(has_rule(validate_graph(pad_first), "pad-requires-bmt"));

  const auto open = chain({{K::Compress, {}}, {K::BmtRowBlock, rows(1)}});
  CHECK(validate_graph(open).empty());
  CHECK(has_rule(validate_graph(open, true), "incomplete"));

  const auto bad_param = chain({{K::Compress, {}}, {K::BmtRowBlock, rows(0)}});
  CHECK(has_rule(validate_graph(bad_param), "params"));
}

TEST_CASE("violations name the offending node") {
  OperatorGraph g;
  const int c = g.add_node(g.root(), K::Compress);
  const int s = g.add_node(c, K::Sort);
  const auto v = validate_graph(g);
  REQUIRE(v.size() == 1);
  CHECK(v[0].node == s);
}

TEST_CASE("division branches one child per stripe") {
  OperatorGraph g;
  const int d = g.add_node(g.root(), K::RowDiv, {{"cuts", std::vector<std::int64_t>{2}}});
  const std::vector<std::pair<K, ParamMap>> tail{
      {K::Compress, {}}, {K::BmtRowBlock, rows(1)}, {K::ThreadTotalRed, {}}, {K::GmemAtomRed, {}}};
  g.add_chain(d, tail);
  CHECK(has_rule(validate_graph(g, true), "branching"));
  CHECK_FALSE(legal_successors(g, d).empty());
  g.add_chain(d, tail);
  CHECK(validate_graph(g, true).empty());
  CHECK(legal_successors(g, d).empty());
}

TEST_CASE("serialization round trips") {
  OperatorGraph empty;
  CHECK(parse_graph(serialize_graph(empty)) == empty);
  const auto fig = sell_like();
  const auto text = serialize_graph(fig);
  CHECK(parse_graph(text) == fig);
  CHECK(serialize_graph(parse_graph(text)) == text);
  CHECK(graph_id(parse_graph(text)) == graph_id(fig));
}

TEST_CASE("unknown kind is a parse error") {
  const std::string text = R"({"nodes":[{"id":0,"kind":"INPUT","params":{}},)"
                           R"({"id":1,"kind":"FOO_RED","params":{}}],"edges":[[0,1]]})";
  try {
    parse_graph(text);
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ParseError);
  }
  CHECK_THROWS_AS(parse_graph("{not json"), Error);
}

TEST_CASE("draft alias names parse") {
  const std::string text = R"({"nodes":[{"id":0,"kind":"INPUT","params":{}},)"
                           R"({"id":1,"kind":"WARP_SEG_ADD_RED","params":{}}],"edges":[[0,1]]})";
  const auto g = parse_graph(text);
  CHECK(g.node(1).kind == K::WarpSegRed);
}

TEST_CASE("closure and soundness of legal_successors") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 300; ++t) {
    OperatorGraph g;
    std::vector<int> open{g.root()};
    for (int step = 0; step < 40 && !open.empty(); ++step) {
      const int leaf = open.back();
      const auto opts = legal_successors(g, leaf);
      if (opts.empty()) {
        open.pop_back();
        continue;
      }
      // Every successor keeps the graph valid.
      for (auto k : opts) {
        OperatorGraph h = g;
        h.add_node(leaf, k);
        CHECK_MESSAGE(validate_graph(h).empty(), describe(h));
      }
      std::vector<OperatorKind> v(opts.begin(), opts.end());
      const auto k = v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
      ParamMap p;
      if (is_div(k)) p["cuts"] = std::vector<std::int64_t>{1};
      const int child = g.add_node(leaf, k, p);
      if (is_div(k)) open.push_back(child);
      open.push_back(child);
      REQUIRE(validate_graph(g).empty());
    }
    CHECK(parse_graph(serialize_graph(g)) == g.canonical());
  }
}
