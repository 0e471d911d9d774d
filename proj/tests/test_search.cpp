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

#include <cmath>
#include <random>
#include <variant>
#include <sstream>

#include "common.hpp"
#include "doctest.h"
#include "spmvd/designer.hpp"
#include "spmvd/error.hpp"
#include "spmvd/search.hpp"

using namespace spmvd;
using namespace testing_support;

namespace {

MatrixStats regular_stats() {
  MatrixStats s;
  s.n_rows = 100;
  s.n_cols = 100;
  s.nnz = 800;
  s.avg_row_len = 8;
  s.row_len_variance = 0;
  s.max_row_len = 8;
  s.min_row_len = 8;
  return s;
}

MatrixStats irregular_stats() {
  MatrixStats s;
  s.n_rows = 100;
  s.n_cols = 1000;
  s.nnz = 5000;
  s.avg_row_len = 50;
  s.row_len_variance = 1e4;
  s.max_row_len = 600;
  s.min_row_len = 1;
  return s;
}

bool contains_kind(const OperatorGraph& g, OperatorKind k) {
  for (int id : g.preorder()) {
    if (g.node(id).kind == k) return true;
  }
  return false;
}

SearchConfig quick_config() {
  SearchConfig c;
  c.budget_seconds = 20;
  c.max_structures = 12;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("built-in ban rules") {
  const auto reg = build_ban_list(regular_stats());
  for (auto k : {K::WarpBitmapRed, K::WarpSegRed, K::ThreadBitmapRed, K::Bin, K::ShmemOffsetRed}) {
    CHECK(reg.contains(k));
  }
  CHECK(build_ban_list(irregular_stats()).kinds.empty());
  CHECK(build_ban_list(irregular_stats(), {}, {K::Sort}).kinds == std::set<OperatorKind>{K::Sort});

  OperatorGraph g;
  g.add_node(g.root(), K::SortSub, {{"group", std::int64_t{32}}});
  const auto ctx = build_ban_list(irregular_stats(), g);
  CHECK(ctx.contains(K::Sort));
  CHECK(ctx.contains(K::Bin));
  CHECK_FALSE(ctx.contains(K::SortSub));
}

TEST_CASE("banning COMPRESS leaves no complete graph") {
  std::mt19937_64 rng(1);
  const auto ban = build_ban_list(irregular_stats(), {}, {K::Compress});
  try {
    enumerate_structure(rng, irregular_stats(), ban);
    FAIL("expected DeadEnd");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DeadEnd);
  }
}

TEST_CASE("enumerated structures are complete and valid") {
  std::mt19937_64 rng(2);
  EnumerateOptions o;
  o.contextual_bans = false;
  for (int t = 0; t < 300; ++t) {
    const auto g = enumerate_structure(rng, irregular_stats(), {}, o);
    CHECK_MESSAGE(validate_graph(g).empty(), describe(g));
    for (int leaf : g.leaves()) CHECK(g.node(leaf).kind == K::GmemAtomRed);
    for (int id : g.preorder()) {
      const auto& n = g.node(id);
      if (n.kind == K::ColDiv) {
        CHECK(g.children(id).size() == std::get<std::vector<std::int64_t>>(n.params.at("cuts")).size() + 1);
      } else if (n.kind == K::RowDiv) {
        CHECK(static_cast<std::int64_t>(g.children(id).size()) == std::get<std::int64_t>(n.params.at("max_cuts")) + 1);
      }
    }
  }
}

TEST_CASE("banned kinds never appear") {
  std::mt19937_64 rng(3);
  const auto ban = build_ban_list(regular_stats());
  for (int t = 0; t < 300; ++t) {
    const auto g = enumerate_structure(rng, regular_stats(), ban);
    for (auto k : ban.kinds) CHECK_FALSE(contains_kind(g, k));
  }
}

TEST_CASE("enumeration is deterministic for a seed") {
  std::mt19937_64 a(9), b(9);
  for (int t = 0; t < 50; ++t) {
    CHECK(serialize_graph(enumerate_structure(a, irregular_stats(), {})) ==
          serialize_graph(enumerate_structure(b, irregular_stats(), {})));
  }
}

TEST_CASE("pruning shrinks the structure space") {
  const auto ban = build_ban_list(regular_stats());
  CHECK(count_structures({}, 1) == 0);
  CHECK(count_structures({}, 2) == 1);
  for (std::size_t d = 4; d <= 6; ++d) {
    CHECK(count_structures(ban, d, true) < count_structures({}, d));
  }
}

TEST_CASE("knobs and instantiation") {
  const auto g = sell_like();
  SearchConfig cfg;
  const auto knobs = knobs_of(g, cfg);
  REQUIRE(knobs.size() == 3);
  CHECK(knobs[0].param == "rows_per_block");
  CHECK(knobs[2].param == "scope");
  CHECK_FALSE(knobs[2].ordinal);

  const auto stats = compute_stats(canonical_a());
  const auto inst = instantiate(g, knobs, {2, 1, 0}, stats);
  CHECK(inst == g);
  CHECK(format_point(knobs, {2, 1, 0}) == "3.rows_per_block=2;4.rows_per_block=1;5.scope=0");

  OperatorGraph nz;
  nz.add_chain(nz.root(), {{K::Compress, {}}, {K::BmwNnzBlock, {}}});
  CHECK(knobs_of(nz, cfg)[0].values == std::vector<std::int64_t>{64, 128, 256, 512});
}

TEST_CASE("fine grid halves the coarse step") {
  const std::vector<Knob> knobs{{1, "threads_per_block", {64, 128, 256, 512}, true},
                                {2, "scope", {0, 1}, false}};
  const auto pts = fine_grid(knobs, {128, 0}, 2);
  std::set<std::int64_t> tpb;
  for (const auto& p : pts) tpb.insert(p[0]);
  CHECK(tpb == std::set<std::int64_t>{64, 96, 128, 192, 256});
  CHECK(pts.size() == 10);
  CHECK(fine_grid(knobs, {128, 0}, 1).size() == 6);
}

TEST_CASE("coarse search") {
  const auto a = canonical_a();
  SearchConfig cfg;
  cfg.coarse_grids["threads_per_block"] = {64, 128, 256};
  cfg.coarse_grids["rows_per_block"] = {1, 2, 4};
  const Evaluator ev(a, cfg);
  const auto g = chain({{K::Compress, {}},
                        {K::BmtRowBlock, {}},
                        {K::SetResources, {}},
                        {K::ThreadBitmapRed, {}},
                        {K::GmemAtomRed, {}}});
  const auto knobs = knobs_of(g, cfg);
  std::mt19937_64 rng(1);
  double clock = 0;

  SUBCASE("full grid") {
    const auto res = coarse_search(g, knobs, ev, cfg, rng, clock, {});
    CHECK(res.records.size() == 9);
    CHECK_FALSE(res.truncated);
    CHECK(clock > 0);
    for (const auto& r : res.records) CHECK(r.gflops > 0);
  }
  SUBCASE("infeasible points score zero") {
    const auto total = chain({{K::Compress, {}},
                              {K::BmtRowBlock, {}},
                              {K::SetResources, {}},
                              {K::ThreadTotalRed, {}},
                              {K::GmemAtomRed, {}}});
    cfg.coarse_grids["rows_per_block"] = {2, 4, 8};
    const Evaluator ev2(a, cfg);
    const auto res = coarse_search(total, knobs_of(total, cfg), ev2, cfg, rng, clock, {});
    CHECK(res.records.size() == 9);
    for (const auto& r : res.records) CHECK(r.gflops == 0);
  }
  SUBCASE("budget runs out mid-grid") {
    int calls = 0;
    const auto res = coarse_search(g, knobs, ev, cfg, rng, clock, [&] { return ++calls > 3; });
    CHECK(res.records.size() == 3);
    CHECK(res.truncated);
  }
}

TEST_CASE("annealing") {
  std::mt19937_64 rng(1);
  AnnealState s{1.0, 10.0};
  CHECK(acceptance_probability(s, 10.0) == 1.0);
  CHECK(anneal_step(s, 11.0, rng));
  CHECK(s.best == 11.0);
  CHECK(anneal_step(s, 11.0, rng));
  AnnealState cold{1e-9, 10.0};
  CHECK(acceptance_probability(cold, 9.0) < 1e-100);
  AnnealState warm{0.3, 10.0};
  CHECK(acceptance_probability(warm, 9.0) == doctest::Approx(std::exp(-1.0 / 3.0)));
}

TEST_CASE("search on a 1x1 matrix") {
  const auto m = CooMatrix::from_triplets(1, 1, {0}, {0}, {2.0});
  const auto r = search(m, quick_config());
  CHECK(r.best.gflops >= r.floor_gflops);
  CHECK(validate_graph(r.best_graph, true).empty());
  CHECK(execute_plan(r.plan, r.format, std::vector<double>{3.0}) == std::vector<double>{6.0});
}

TEST_CASE("search results") {
  const auto m = canonical_a();
  const auto cfg = quick_config();
  const auto r = search(m, cfg);
  CHECK(r.best.gflops >= r.floor_gflops);
  CHECK(r.wall_seconds < cfg.budget_seconds + 5);
  CHECK_FALSE(r.stop_reason.empty());
  REQUIRE_FALSE(r.log.empty());
  CHECK(r.log.front().graph == serialize_graph(csr_scalar_graph()));

  double best = 0, last_t = 0;
  for (const auto& rec : r.log) {
    CHECK(rec.timestamp >= last_t);
    last_t = rec.timestamp;
    CHECK(validate_graph(parse_graph(rec.graph), true).empty());
    if (rec.measured) best = std::max(best, rec.gflops);
  }
  CHECK(best == r.best.gflops);

  const auto again = search(m, cfg);
  std::ostringstream a, b;
  write_log_csv(r.log, a);
  write_log_csv(again.log, b);
  CHECK(a.str() == b.str());
  CHECK(serialize_graph(again.best_graph) == serialize_graph(r.best_graph));
  CHECK(a.str().rfind("timestamp,graph_id,params,gflops,bytes,kind\n", 0) == 0);
}

TEST_CASE("search rejects a bad config") {
  auto cfg = quick_config();
  cfg.sa.alpha = 1.0;
  CHECK_THROWS_AS(search(canonical_a(), cfg), Error);
  cfg = quick_config();
  cfg.budget_seconds = 0;
  CHECK_THROWS_AS(check_config(cfg), Error);
}

TEST_CASE("user bans reach the search") {
  auto cfg = quick_config();
  cfg.user_bans = {K::Sort, K::SortSub, K::Bin};
  const auto r = search(canonical_a(), cfg);
  for (const auto& rec : r.log) {
    const auto g = parse_graph(rec.graph);
    for (auto k : cfg.user_bans) CHECK_FALSE(contains_kind(g, k));
  }
}
