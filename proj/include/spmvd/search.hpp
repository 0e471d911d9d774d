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

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "spmvd/executor.hpp"
#include "spmvd/format.hpp"
#include "spmvd/graph.hpp"
#include "spmvd/matrix.hpp"
#include "spmvd/plan.hpp"
#include "spmvd/surrogate.hpp"

namespace spmvd {

struct AnnealConfig {
  double t0 = 0.3;
  double alpha = 0.9;
  double min_accept = 1e-3;
};

struct SearchConfig {
  double budget_seconds = 600;
  /// Knob name -> coarse values. Missing names use default_coarse_grids().
  std::map<std::string, std::vector<std::int64_t>> coarse_grids;
  std::int64_t refine_factor = 2;
  std::size_t refine_top_k = 3;
  AnnealConfig sa;
  std::uint64_t seed = 1;
  std::size_t bench_reps = 1;
  TimingMode timing = TimingMode::Modeled;
  Precision precision = Precision::F64;
  std::size_t workers = 1;
  std::size_t max_structures = 64;
  /// Grids with more points are sampled down to this many.
  std::size_t max_grid_points = 32;
  std::size_t patch_budget = kDefaultPatchBudget;
  bool compression = true;
  bool fuse_arrays = false;
  bool pruning = true;
  std::set<OperatorKind> user_bans;
  /// Longest operator chain per path, INPUT excluded.
  std::size_t max_depth = 10;
  /// Stop as soon as a non-seed candidate reaches the seed's GFLOPS.
  bool stop_at_floor = false;
};

/// Throws ConfigError when alpha is outside (0, 1), the budget is not positive
/// or a grid is empty.
void check_config(const SearchConfig& cfg);

/// threads_per_block, rows_per_block, nnz_per_block (BMT scale; BMW and BMTB
/// multiply by 32 and 256), group, degree_pct, bin_multiplier, scope.
const std::map<std::string, std::vector<std::int64_t>>& default_coarse_grids();

/// One tunable parameter of one node. Values are integers: scope is 0
/// (per_bmtb) or 1 (global); bin_multiplier scales the average row length.
struct Knob {
  int node = 0;
  std::string param;
  std::vector<std::int64_t> values;
  /// Values are ordered and may be interpolated.
  bool ordinal = true;
};

using Point = std::vector<std::int64_t>;

std::vector<Knob> knobs_of(const OperatorGraph& structure, const SearchConfig& cfg);

/// Copy of `structure` with the knob values applied.
OperatorGraph instantiate(const OperatorGraph& structure, const std::vector<Knob>& knobs, const Point& p,
                          const MatrixStats& stats);

/// "node.param=value" joined by ';'.
std::string format_point(const std::vector<Knob>& knobs, const Point& p);

/// Built-in pruning rules plus the user's. Regular matrices (variance <= 100)
/// lose bitmap and segmented reductions and BIN; equal row lengths also lose
/// ROW_DIV; rows no longer than a warp lose SHMEM_OFFSET_RED. Kinds already in `graph` also ban
/// the other members of their sort family.
BanList build_ban_list(const MatrixStats& stats, const OperatorGraph& graph = {},
                       const std::set<OperatorKind>& user = {});

struct EnumerateOptions {
  std::size_t max_depth = 10;
  /// Re-derive graph-dependent bans while growing.
  bool contextual_bans = true;
  std::size_t retries = 50;
};

/// Complete structure (structural params only: DIV cuts). Throws DeadEnd when
/// no complete graph was found within `retries` attempts.
OperatorGraph enumerate_structure(std::mt19937_64& rng, const MatrixStats& stats, const BanList& ban,
                                  const EnumerateOptions& opt = {});

/// Completes every open leaf below `node`. Returns false on a dead end.
bool grow_structure(OperatorGraph& g, int node, std::mt19937_64& rng, const MatrixStats& stats,
                    const BanList& ban, const EnumerateOptions& opt);

/// Number of complete operator chains (root to GMEM_ATOM_RED) with at most
/// `max_depth` operators. A DIV node counts as one link of the chain.
/// `contextual_bans` applies the graph-dependent rules along each chain.
std::uint64_t count_structures(const BanList& ban, std::size_t max_depth, bool contextual_bans = false);

/// COMPRESS > BMT_ROW_BLOCK(1) > THREAD_TOTAL_RED > GMEM_ATOM_RED.
OperatorGraph csr_scalar_graph();

struct SearchRecord {
  double timestamp = 0;
  std::string graph_id;
  std::string graph;  // serialized instantiated graph
  std::string params;
  double gflops = 0;
  std::size_t bytes = 0;
  bool measured = true;
  Point point;
};

void write_log_csv(const std::vector<SearchRecord>& log, std::ostream& os);

/// Everything needed to measure candidates of one matrix.
class Evaluator {
 public:
  Evaluator(const CooMatrix& m, const SearchConfig& cfg);

  struct Result {
    double gflops = 0;
    double seconds = 0;
    std::size_t bytes = 0;
    bool feasible = false;
    std::string error;
  };

  /// Infeasible designs give a zero result. Generator bugs (out-of-bounds
  /// reads, oracle mismatches, missing keys) propagate.
  Result evaluate(const OperatorGraph& g) const;

  struct Design {
    KernelPlan plan;
    FormatBundle format;
  };
  Design build(const OperatorGraph& g) const;

  const MatrixStats& stats() const { return stats_; }
  const std::vector<double>& x() const { return x_; }
  double tolerance() const { return tol_; }

 private:
  const CooMatrix& m_;
  SearchConfig cfg_;
  MatrixStats stats_;
  std::vector<double> x_;
  std::vector<double> y_ref_;
  double tol_ = 0;
};

/// Max |a - b| over entries; infinity when sizes differ.
double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b);
/// 1e-12 * ||A||_inf * ||x||_inf for f64, 1e-4 * ... for f32.
double oracle_tolerance(const CooMatrix& m, std::span<const double> x, Precision p);

struct CoarseResult {
  std::vector<SearchRecord> records;
  bool truncated = false;
};

/// Measures every grid point (sampled down to max_grid_points). `clock` is
/// advanced by the modeled or wall time of each measurement.
CoarseResult coarse_search(const OperatorGraph& structure, const std::vector<Knob>& knobs,
                           const Evaluator& ev, const SearchConfig& cfg, std::mt19937_64& rng,
                           double& clock, const std::function<bool()>& out_of_time);

/// Features for the surrogate: the point followed by matrix statistics.
std::vector<double> features_of(const Point& p, const MatrixStats& stats);

inline constexpr std::size_t kMaxFinePoints = 4096;

/// Fine grid around `best`: between each knob's neighbouring coarse values,
/// step reduced by `factor`. threads_per_block snaps to multiples of 32.
/// Above kMaxFinePoints only one knob at a time moves away from `best`.
std::vector<Point> fine_grid(const std::vector<Knob>& knobs, const Point& best, std::int64_t factor);

/// Top-k fine points by predicted GFLOPS, skipping points in `measured`.
/// Ties go to the point closer to `best`.
std::vector<std::pair<Point, double>> fine_refine(const Surrogate& model, const std::vector<Knob>& knobs,
                                                  const Point& best, const MatrixStats& stats,
                                                  std::int64_t factor, std::size_t k,
                                                  const std::set<Point>& measured);

struct AnnealState {
  double t = 0.3;
  double best = 0;
};

/// Accepts candidates >= best; otherwise with probability
/// exp((candidate - best) / (t * best)) drawn from `rng`.
bool anneal_step(AnnealState& s, double candidate, std::mt19937_64& rng);
double acceptance_probability(const AnnealState& s, double candidate);

struct SearchResult {
  OperatorGraph best_graph;
  SearchRecord best;
  KernelPlan plan;
  FormatBundle format;
  std::vector<SearchRecord> log;
  double floor_gflops = 0;
  /// Candidates measured after the seed until one reached the floor.
  std::optional<std::size_t> iterations_to_floor;
  std::size_t structures = 0;
  double wall_seconds = 0;
  std::string stop_reason;
};

/// Throws NoFeasibleDesign when nothing measured above zero.
SearchResult search(const CooMatrix& m, const SearchConfig& cfg);

}  // namespace spmvd
