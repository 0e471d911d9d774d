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

#include "spmvd/fuzz.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "spmvd/designer.hpp"
#include "spmvd/error.hpp"
#include "spmvd/search.hpp"

namespace spmvd {

CooMatrix random_matrix(std::mt19937_64& rng, const RandomMatrixOptions& opt) {
  const Index n_rows = std::uniform_int_distribution<Index>(1, opt.max_rows)(rng);
  const Index n_cols = std::uniform_int_distribution<Index>(1, opt.max_cols)(rng);
  const double density = std::uniform_real_distribution<double>(opt.min_density, opt.max_density)(rng);
  std::uniform_int_distribution<Index> col(0, n_cols - 1);
  std::uniform_real_distribution<double> mag(0.1, 2.0);
  std::bernoulli_distribution coin(density), sign(0.5);

  std::vector<Index> rows, cols;
  std::vector<double> vals;
  for (Index r = 0; r < n_rows; ++r) {
    std::set<Index> picked;
    for (Index c = 0; c < n_cols; ++c) {
      if (coin(rng)) picked.insert(c);
    }
    if (picked.empty()) picked.insert(col(rng));
    for (Index c : picked) {
      rows.push_back(r);
      cols.push_back(c);
      vals.push_back(sign(rng) ? mag(rng) : -mag(rng));
    }
  }
  return CooMatrix::from_triplets(n_rows, n_cols, std::move(rows), std::move(cols), std::move(vals));
}

namespace {

std::int64_t random_value(const Knob& k, const OperatorGraph& g, std::mt19937_64& rng) {
  auto uni = [&](std::int64_t a, std::int64_t b) { return std::uniform_int_distribution<std::int64_t>(a, b)(rng); };
  if (k.param == "threads_per_block") return 32 * uni(1, 8);
  if (k.param == "rows_per_block") return uni(1, 8);
  if (k.param == "nnz_per_block") {
    switch (block_level(g.node(k.node).kind)) {
      case Level::Bmtb: return uni(1, 512);
      case Level::Bmw: return uni(1, 96);
      case Level::Bmt: return uni(1, 12);
    }
  }
  if (k.param == "group") return uni(2, 64);
  if (k.param == "degree_pct") return uni(0, 300);
  if (k.param == "bin_multiplier") return uni(1, 3);
  if (k.param == "scope") return uni(0, 1);
  return k.values.at(static_cast<std::size_t>(uni(0, static_cast<std::int64_t>(k.values.size()) - 1)));
}

bool is_bug(ErrorCode c) {
  switch (c) {
    case ErrorCode::OutOfBoundsRead:
    case ErrorCode::MissingKey:
    case ErrorCode::UnknownFragment:
    case ErrorCode::MissingAdapter: return true;
    default: return false;
  }
}

}  // namespace

OperatorGraph random_design(std::mt19937_64& rng, const CooMatrix& m, std::size_t max_attempts) {
  const MatrixStats stats = compute_stats(m);
  EnumerateOptions eo;
  eo.contextual_bans = false;
  const SearchConfig defaults;
  const std::vector<double> ones(static_cast<std::size_t>(m.n_cols), 1.0);
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    const OperatorGraph s = enumerate_structure(rng, stats, BanList{}, eo);
    const auto knobs = knobs_of(s, defaults);
    Point p;
    for (const auto& k : knobs) p.push_back(random_value(k, s, rng));
    OperatorGraph g = instantiate(s, knobs, p, stats);
    try {
      check_design(m, g, ones, {});
      return g;
    } catch (const Error& e) {
      if (is_bug(e.code())) throw;
    }
  }
  throw Error(ErrorCode::DeadEnd, "no feasible random design after " + std::to_string(max_attempts) + " attempts");
}

CaseResult check_design(const CooMatrix& m, const OperatorGraph& g, std::span<const double> x,
                        const ExecOptions& exec, bool compress) {
  const MetadataSet ms = execute_graph(g, m);
  KernelPlan plan = build_plan(g, ms);
  FormatBundle fmt = build_format(ms, required_keys(plan));
  if (compress) std::tie(plan, fmt) = apply_compression(plan, fmt);
  const auto y = execute_plan(plan, fmt, x, exec);
  CaseResult r;
  r.error = max_abs_diff(y, spmv_oracle(m, x));
  r.tolerance = oracle_tolerance(m, x, exec.precision);
  return r;
}

}  // namespace spmvd
