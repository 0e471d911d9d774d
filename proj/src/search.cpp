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

#include "spmvd/search.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "spmvd/designer.hpp"
#include "spmvd/error.hpp"

namespace spmvd {

namespace {

std::int64_t level_multiplier(OperatorKind k) {
  switch (block_level(k)) {
    case Level::Bmtb: return 256;
    case Level::Bmw: return kWarpSize;
    case Level::Bmt: return 1;
  }
  return 1;
}

const std::vector<std::int64_t>& grid_for(const SearchConfig& cfg, const std::string& name) {
  if (auto it = cfg.coarse_grids.find(name); it != cfg.coarse_grids.end()) return it->second;
  return default_coarse_grids().at(name);
}

bool is_sort_kind(OperatorKind k) {
  return k == OperatorKind::Sort || k == OperatorKind::SortSub || k == OperatorKind::Bin;
}

}  // namespace

void check_config(const SearchConfig& cfg) {
  if (!(cfg.budget_seconds > 0)) throw Error(ErrorCode::ConfigError, "budget_seconds must be positive");
  if (!(cfg.sa.alpha > 0 && cfg.sa.alpha < 1)) throw Error(ErrorCode::ConfigError, "sa.alpha must be in (0, 1)");
  if (!(cfg.sa.t0 > 0)) throw Error(ErrorCode::ConfigError, "sa.t0 must be positive");
  if (cfg.refine_factor < 1) throw Error(ErrorCode::ConfigError, "refine_factor must be at least 1");
  if (cfg.bench_reps < 1) throw Error(ErrorCode::ConfigError, "bench_reps must be at least 1");
  for (const auto& [name, values] : cfg.coarse_grids) {
    if (!default_coarse_grids().count(name)) throw Error(ErrorCode::ConfigError, "unknown grid '" + name + "'");
    if (values.empty()) throw Error(ErrorCode::ConfigError, "grid '" + name + "' is empty");
  }
}

const std::map<std::string, std::vector<std::int64_t>>& default_coarse_grids() {
  static const std::map<std::string, std::vector<std::int64_t>> grids = {
      {"threads_per_block", {64, 128, 256, 512}},
      {"rows_per_block", {1, 2, 4, 8, 32}},
      {"nnz_per_block", {2, 4, 8, 16}},
      {"group", {32, 128, 512}},
      {"degree_pct", {50, 100, 200}},
      {"bin_multiplier", {1, 2}},
      {"scope", {0, 1}},
  };
  return grids;
}

std::vector<Knob> knobs_of(const OperatorGraph& g, const SearchConfig& cfg) {
  std::vector<Knob> out;
  for (int id : g.preorder()) {
    const auto k = g.node(id).kind;
    if (k == OperatorKind::SetResources) {
      out.push_back({id, "threads_per_block", grid_for(cfg, "threads_per_block")});
    } else if (is_block_op(k) && block_kind(k) == BlockKind::Row) {
      out.push_back({id, "rows_per_block", grid_for(cfg, "rows_per_block")});
    } else if (is_block_op(k)) {
      Knob kn{id, "nnz_per_block", grid_for(cfg, "nnz_per_block")};
      for (auto& v : kn.values) v *= level_multiplier(k);
      out.push_back(std::move(kn));
    } else if (k == OperatorKind::SortSub) {
      out.push_back({id, "group", grid_for(cfg, "group")});
    } else if (k == OperatorKind::RowDiv && g.node(id).has("max_cuts")) {
      out.push_back({id, "degree_pct", grid_for(cfg, "degree_pct")});
    } else if (k == OperatorKind::Bin) {
      out.push_back({id, "bin_multiplier", grid_for(cfg, "bin_multiplier")});
    } else if (k == OperatorKind::BmtPad) {
      out.push_back({id, "scope", grid_for(cfg, "scope"), false});
    }
  }
  return out;
}

OperatorGraph instantiate(const OperatorGraph& structure, const std::vector<Knob>& knobs, const Point& p,
                          const MatrixStats& stats) {
  OperatorGraph g = structure;
  for (std::size_t i = 0; i < knobs.size(); ++i) {
    auto& node = g.node(knobs[i].node);
    const auto& name = knobs[i].param;
    if (name == "scope") {
      node.params["scope"] = std::string(p[i] == 0 ? "per_bmtb" : "global");
    } else if (name == "bin_multiplier") {
      const auto t = static_cast<std::int64_t>(std::ceil(static_cast<double>(p[i]) * stats.avg_row_len));
      node.params["thresholds"] = std::vector<std::int64_t>{std::max<std::int64_t>(1, t)};
    } else {
      node.params[name] = p[i];
    }
  }
  return g;
}

std::string format_point(const std::vector<Knob>& knobs, const Point& p) {
  std::string s;
  for (std::size_t i = 0; i < knobs.size(); ++i) {
    if (i) s += ';';
    s += std::to_string(knobs[i].node) + "." + knobs[i].param + "=" + std::to_string(p[i]);
  }
  return s;
}

BanList build_ban_list(const MatrixStats& stats, const OperatorGraph& graph, const std::set<OperatorKind>& user) {
  BanList ban;
  if (!stats.is_irregular()) {
    for (auto k : {OperatorKind::WarpBitmapRed, OperatorKind::WarpSegRed, OperatorKind::ThreadBitmapRed,
                   OperatorKind::Bin}) {
      ban.kinds.insert(k);
    }
  }
  if (stats.max_row_len <= kWarpSize) ban.kinds.insert(OperatorKind::ShmemOffsetRed);
  // Equal row lengths leave no mutation point to split at.
  if (stats.n_rows > 0 && stats.max_row_len == stats.min_row_len) ban.kinds.insert(OperatorKind::RowDiv);
  for (int id : graph.preorder()) {
    const auto k = graph.node(id).kind;
    if (!is_sort_kind(k)) continue;
    for (auto other : {OperatorKind::Sort, OperatorKind::SortSub, OperatorKind::Bin}) {
      if (other != k) ban.kinds.insert(other);
    }
  }
  ban.kinds.insert(user.begin(), user.end());
  return ban;
}

namespace {

BanList contextual(const BanList& base, const OperatorGraph& g, int node) {
  BanList b = base;
  for (int id : g.path_to(node)) {
    const auto k = g.node(id).kind;
    if (!is_sort_kind(k)) continue;
    for (auto other : {OperatorKind::Sort, OperatorKind::SortSub, OperatorKind::Bin}) {
      if (other != k) b.kinds.insert(other);
    }
  }
  return b;
}

ParamMap structural_params(OperatorKind k, std::mt19937_64& rng, const MatrixStats& stats) {
  ParamMap p;
  if (k == OperatorKind::RowDiv) {
    const std::int64_t max_cuts = stats.n_rows >= 3 ? std::uniform_int_distribution<std::int64_t>(1, 2)(rng) : 1;
    p["degree_pct"] = std::int64_t{100};
    p["max_cuts"] = max_cuts;
  } else if (k == OperatorKind::ColDiv) {
    const std::int64_t stripes =
        std::min<std::int64_t>(stats.n_cols, std::uniform_int_distribution<std::int64_t>(2, 3)(rng));
    std::vector<std::int64_t> cuts;
    for (std::int64_t i = 1; i < stripes; ++i) cuts.push_back(i * stats.n_cols / stripes);
    p["cuts"] = cuts;
  }
  return p;
}

std::vector<OperatorKind> candidates(const OperatorGraph& g, int node, const MatrixStats& stats,
                                     const BanList& ban, const EnumerateOptions& opt) {
  const BanList b = opt.contextual_bans ? contextual(ban, g, node) : ban;
  std::vector<OperatorKind> out;
  for (auto k : legal_successors(g, node, b)) {
    if (k == OperatorKind::RowDiv && stats.n_rows < 2) continue;
    if (k == OperatorKind::ColDiv && stats.n_cols < 2) continue;
    out.push_back(k);
  }
  return out;
}

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::vector<Point> product(const std::vector<std::vector<std::int64_t>>& axes) {
  std::vector<Point> points{Point{}};
  for (const auto& axis : axes) {
    std::vector<Point> next;
    for (const auto& p : points) {
      for (auto v : axis) {
        next.push_back(p);
        next.back().push_back(v);
      }
    }
    points = std::move(next);
  }
  return points;
}

}  // namespace

bool grow_structure(OperatorGraph& g, int node, std::mt19937_64& rng, const MatrixStats& stats,
                    const BanList& ban, const EnumerateOptions& opt) {
  for (;;) {
    const auto& n = g.node(node);
    if (n.kind == OperatorKind::GmemAtomRed) return true;
    const std::size_t depth = g.path_to(node).size() - 1;
    if (is_div(n.kind)) {
      const auto stripes = static_cast<std::size_t>(stripe_count(n).value_or(1));
      while (g.children(node).size() < stripes) {
        if (depth >= opt.max_depth) return false;
        const auto opts = candidates(g, node, stats, ban, opt);
        if (opts.empty()) return false;
        const auto k = pick(opts, rng);
        const int child = g.add_node(node, k, structural_params(k, rng, stats));
        if (!grow_structure(g, child, rng, stats, ban, opt)) return false;
      }
      return true;
    }
    if (!g.children(node).empty()) {
      for (int c : std::vector<int>(g.children(node))) {
        if (!grow_structure(g, c, rng, stats, ban, opt)) return false;
      }
      return true;
    }
    if (depth >= opt.max_depth) return false;
    const auto opts = candidates(g, node, stats, ban, opt);
    if (opts.empty()) return false;
    const auto k = pick(opts, rng);
    node = g.add_node(node, k, structural_params(k, rng, stats));
  }
}

OperatorGraph enumerate_structure(std::mt19937_64& rng, const MatrixStats& stats, const BanList& ban,
                                  const EnumerateOptions& opt) {
  for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, opt.retries); ++attempt) {
    OperatorGraph g;
    if (grow_structure(g, g.root(), rng, stats, ban, opt)) return g.canonical();
  }
  throw Error(ErrorCode::DeadEnd, "no complete graph after " + std::to_string(opt.retries) + " attempts");
}

namespace {

struct Counter {
  const BanList& ban;
  bool contextual_bans;
  std::map<std::pair<std::uint32_t, std::size_t>, std::uint64_t> memo;

  // Path state is a function of the set of kinds on the path.
  std::uint64_t count(OperatorGraph& g, int node, std::uint32_t mask, std::size_t left) {
    if (g.node(node).kind == OperatorKind::GmemAtomRed) return 1;
    if (left == 0) return 0;
    const auto key = std::make_pair(mask, left);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const BanList b = contextual_bans ? contextual(ban, g, node) : ban;
    std::uint64_t total = 0;
    for (auto k : legal_successors(g, node, b)) {
      const int child = g.add_node(node, k);
      total += count(g, child, mask | (1u << static_cast<unsigned>(k)), left - 1);
      g.remove_subtree(child);
    }
    memo[key] = total;
    return total;
  }
};

}  // namespace

std::uint64_t count_structures(const BanList& ban, std::size_t max_depth, bool contextual_bans) {
  OperatorGraph g;
  Counter c{ban, contextual_bans, {}};
  return c.count(g, g.root(), 0, max_depth);
}

OperatorGraph csr_scalar_graph() {
  OperatorGraph g;
  g.add_chain(g.root(), {{OperatorKind::Compress, {}},
                         {OperatorKind::BmtRowBlock, {{"rows_per_block", std::int64_t{1}}}},
                         {OperatorKind::ThreadTotalRed, {}},
                         {OperatorKind::GmemAtomRed, {}}});
  return g;
}

void write_log_csv(const std::vector<SearchRecord>& log, std::ostream& os) {
  os << "timestamp,graph_id,params,gflops,bytes,kind\n";
  char buf[64];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%.9e", r.timestamp);
    os << buf << ',' << r.graph_id << ',' << r.params << ',';
    std::snprintf(buf, sizeof buf, "%.6f", r.gflops);
    os << buf << ',' << r.bytes << ',' << (r.measured ? "measured" : "predicted") << '\n';
  }
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = std::abs(a[i] - b[i]);
    if (!(e <= d)) d = e;  // NaN propagates
  }
  return d;
}

double oracle_tolerance(const CooMatrix& m, std::span<const double> x, Precision p) {
  std::vector<double> row_sum(static_cast<std::size_t>(m.n_rows), 0.0);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    row_sum[static_cast<std::size_t>(m.row_idx[i])] += std::abs(m.values[i]);
  }
  double a = 0, xm = 0;
  for (double v : row_sum) a = std::max(a, v);
  for (double v : x) xm = std::max(xm, std::abs(v));
  return (p == Precision::F64 ? 1e-12 : 1e-4) * a * xm;
}

Evaluator::Evaluator(const CooMatrix& m, const SearchConfig& cfg) : m_(m), cfg_(cfg), stats_(compute_stats(m)) {
  std::mt19937_64 rng(cfg.seed ^ 0x5eed5eedULL);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  x_.resize(static_cast<std::size_t>(m.n_cols));
  for (auto& v : x_) v = u(rng);
  y_ref_ = spmv_oracle(m, x_);
  tol_ = oracle_tolerance(m, x_, cfg.precision);
}

Evaluator::Design Evaluator::build(const OperatorGraph& g) const {
  const MetadataSet ms = execute_graph(g, m_);
  KernelPlan plan = build_plan(g, ms);
  FormatBundle fmt = build_format(ms, required_keys(plan));
  if (cfg_.compression) {
    CompressionOptions co;
    co.patch_budget = cfg_.patch_budget;
    co.fuse_short_arrays = cfg_.fuse_arrays;
    std::tie(plan, fmt) = apply_compression(plan, fmt, co);
  }
  return {std::move(plan), std::move(fmt)};
}

Evaluator::Result Evaluator::evaluate(const OperatorGraph& g) const {
  Result r;
  try {
    const Design d = build(g);
    BenchOptions bo;
    bo.reps = cfg_.bench_reps;
    bo.timing = cfg_.timing;
    bo.exec.precision = cfg_.precision;
    bo.exec.workers = cfg_.workers;
    bo.exec.mode = cfg_.workers > 1 ? ExecMode::Parallel : ExecMode::Deterministic;
    const auto rep = benchmark(d.plan, d.format, x_, bo);
    const double err = max_abs_diff(rep.y, y_ref_);
    if (!(err <= tol_)) {
      throw Error(ErrorCode::OracleMismatch, describe(g) + ": max error " + std::to_string(err) +
                                                 " exceeds " + std::to_string(tol_));
    }
    r.gflops = rep.gflops;
    r.seconds = rep.elapsed_seconds;
    r.bytes = d.format.total_bytes();
    r.feasible = true;
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::OutOfBoundsRead:
      case ErrorCode::OracleMismatch:
      case ErrorCode::MissingKey:
      case ErrorCode::UnknownFragment:
      case ErrorCode::MissingAdapter: throw;
      default: break;
    }
    r = Result{};
    r.error = e.what();
  }
  return r;
}

CoarseResult coarse_search(const OperatorGraph& structure, const std::vector<Knob>& knobs, const Evaluator& ev,
                           const SearchConfig& cfg, std::mt19937_64& rng, double& clock,
                           const std::function<bool()>& out_of_time) {
  double total = 1;
  for (const auto& k : knobs) total *= static_cast<double>(k.values.size());
  std::vector<Point> points;
  if (total <= static_cast<double>(cfg.max_grid_points)) {
    std::vector<std::vector<std::int64_t>> axes;
    for (const auto& k : knobs) axes.push_back(k.values);
    points = product(axes);
  } else {
    std::set<Point> drawn;
    while (drawn.size() < cfg.max_grid_points) {
      Point p;
      for (const auto& k : knobs) p.push_back(pick(k.values, rng));
      drawn.insert(std::move(p));
    }
    points.assign(drawn.begin(), drawn.end());
  }
  CoarseResult out;
  const std::string id = graph_id(structure);
  for (const auto& p : points) {
    if (out_of_time && out_of_time()) {
      out.truncated = true;
      break;
    }
    const OperatorGraph g = instantiate(structure, knobs, p, ev.stats());
    const auto r = ev.evaluate(g);
    clock += r.seconds * static_cast<double>(cfg.bench_reps);
    out.records.push_back({clock, id, serialize_graph(g), format_point(knobs, p), r.gflops, r.bytes, true, p});
  }
  return out;
}

std::vector<double> features_of(const Point& p, const MatrixStats& stats) {
  std::vector<double> f(p.begin(), p.end());
  f.push_back(static_cast<double>(stats.n_rows));
  f.push_back(stats.avg_row_len);
  f.push_back(stats.row_len_variance);
  f.push_back(static_cast<double>(stats.max_row_len));
  return f;
}

std::vector<Point> fine_grid(const std::vector<Knob>& knobs, const Point& best, std::int64_t factor) {
  factor = std::max<std::int64_t>(1, factor);
  std::vector<std::vector<std::int64_t>> axes;
  for (std::size_t i = 0; i < knobs.size(); ++i) {
    const auto& k = knobs[i];
    std::vector<std::int64_t> vals = k.values;
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    if (!k.ordinal || vals.size() < 2) {
      axes.push_back(vals);
      continue;
    }
    std::size_t at = 0;
    for (std::size_t j = 1; j < vals.size(); ++j) {
      if (std::llabs(vals[j] - best[i]) < std::llabs(vals[at] - best[i])) at = j;
    }
    std::vector<std::int64_t> axis;
    auto span_between = [&](std::int64_t a, std::int64_t b) {
      for (std::int64_t s = 0; s <= factor; ++s) {
        const double v = static_cast<double>(a) + static_cast<double>(b - a) * static_cast<double>(s) /
                                                      static_cast<double>(factor);
        auto iv = static_cast<std::int64_t>(std::llround(v));
        if (k.param == "threads_per_block") iv = std::clamp<std::int64_t>((iv + 16) / 32 * 32, 32, 1024);
        axis.push_back(std::max<std::int64_t>(1, iv));
      }
    };
    if (at > 0) span_between(vals[at - 1], vals[at]);
    if (at + 1 < vals.size()) span_between(vals[at], vals[at + 1]);
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
    axes.push_back(std::move(axis));
  }
  double total = 1;
  for (const auto& axis : axes) total *= static_cast<double>(axis.size());
  if (total <= static_cast<double>(kMaxFinePoints)) return product(axes);
  // Too many knobs for the full product: vary one knob at a time.
  std::set<Point> star{best};
  for (std::size_t i = 0; i < axes.size(); ++i) {
    for (auto v : axes[i]) {
      Point p = best;
      p[i] = v;
      star.insert(std::move(p));
    }
  }
  return {star.begin(), star.end()};
}


std::vector<std::pair<Point, double>> fine_refine(const Surrogate& model, const std::vector<Knob>& knobs,
                                                  const Point& best, const MatrixStats& stats,
                                                  std::int64_t factor, std::size_t k,
                                                  const std::set<Point>& measured) {
  if (k == 0) return {};
  struct Cand {
    Point p;
    double pred;
    double dist;
  };
  std::vector<Cand> cands;
  for (auto& p : fine_grid(knobs, best, factor)) {
    if (measured.count(p)) continue;
    double dist = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto [lo, hi] = std::minmax_element(knobs[i].values.begin(), knobs[i].values.end());
      const double range = std::max<double>(1.0, static_cast<double>(*hi - *lo));
      dist += std::abs(static_cast<double>(p[i] - best[i])) / range;
    }
    const double pred = model.predict(features_of(p, stats));
    cands.push_back({std::move(p), pred, dist});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.pred != b.pred) return a.pred > b.pred;
    if (a.dist != b.dist) return a.dist < b.dist;
    return a.p < b.p;
  });
  std::vector<std::pair<Point, double>> out;
  for (std::size_t i = 0; i < cands.size() && i < k; ++i) out.emplace_back(cands[i].p, cands[i].pred);
  return out;
}

double acceptance_probability(const AnnealState& s, double candidate) {
  if (candidate >= s.best || s.best <= 0) return 1.0;
  if (s.t <= 0) return 0.0;
  return std::exp((candidate - s.best) / (s.t * s.best));
}

bool anneal_step(AnnealState& s, double candidate, std::mt19937_64& rng) {
  const double p = acceptance_probability(s, candidate);
  const bool accept = p >= 1.0 || std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
  if (candidate > s.best) s.best = candidate;
  return accept;
}

namespace {

bool better(const SearchRecord& a, const SearchRecord& b) {
  if (a.gflops != b.gflops) return a.gflops > b.gflops;
  if (a.bytes != b.bytes) return a.bytes < b.bytes;
  return a.graph < b.graph;
}

OperatorGraph neighbor(const OperatorGraph& current, std::mt19937_64& rng, const MatrixStats& stats,
                       const BanList& ban, const EnumerateOptions& opt) {
  for (std::size_t attempt = 0; attempt < opt.retries; ++attempt) {
    OperatorGraph g = current;
    auto ids = g.preorder();
    ids.erase(ids.begin());
    if (ids.empty()) break;
    const int victim = pick(ids, rng);
    const int parent = *g.parent(victim);
    g.remove_subtree(victim);
    if (grow_structure(g, parent, rng, stats, ban, opt)) return g.canonical();
  }
  return enumerate_structure(rng, stats, ban, opt);
}

}  // namespace

SearchResult search(const CooMatrix& m, const SearchConfig& cfg) {
  check_config(cfg);
  using clk = std::chrono::steady_clock;
  const auto start = clk::now();
  auto wall = [&] { return std::chrono::duration<double>(clk::now() - start).count(); };
  auto out_of_time = [&] { return wall() >= cfg.budget_seconds; };

  Evaluator ev(m, cfg);
  const MatrixStats& stats = ev.stats();
  std::mt19937_64 rng(cfg.seed);
  const BanList ban = cfg.pruning ? build_ban_list(stats, {}, cfg.user_bans) : BanList{cfg.user_bans};
  EnumerateOptions eopt;
  eopt.max_depth = cfg.max_depth;
  eopt.contextual_bans = cfg.pruning;

  SearchResult res;
  double clock = 0;
  bool have_best = false;
  std::size_t measured_after_seed = 0;

  auto take = [&](const SearchRecord& r) {
    res.log.push_back(r);
    if (!r.measured) return;
    if (!have_best || better(r, res.best)) {
      res.best = r;
      have_best = true;
    }
  };

  {
    const OperatorGraph seed = csr_scalar_graph();
    const auto r = ev.evaluate(seed);
    clock += r.seconds * static_cast<double>(cfg.bench_reps);
    take({clock, graph_id(seed), serialize_graph(seed), "", r.gflops, r.bytes, true, {}});
    res.floor_gflops = r.gflops;
  }
  auto note_floor = [&](const SearchRecord& r) {
    if (!r.measured || res.iterations_to_floor) return;
    ++measured_after_seed;
    if (r.gflops >= res.floor_gflops && r.gflops > 0) res.iterations_to_floor = measured_after_seed;
  };

  AnnealState sa{cfg.sa.t0, res.best.gflops};
  std::optional<OperatorGraph> current;
  std::set<std::string> seen;
  std::vector<double> shortfalls;
  std::size_t stale = 0;

  for (;;) {
    if (out_of_time()) {
      res.stop_reason = "budget";
      break;
    }
    if (res.structures >= cfg.max_structures) {
      res.stop_reason = "max_structures";
      break;
    }
    std::optional<OperatorGraph> structure;
    for (int attempt = 0; attempt < 20 && !structure; ++attempt) {
      try {
        const bool mutate = current && std::bernoulli_distribution(0.5)(rng);
        OperatorGraph g = mutate ? neighbor(*current, rng, stats, ban, eopt) : enumerate_structure(rng, stats, ban, eopt);
        if (seen.insert(graph_id(g)).second) structure = std::move(g);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DeadEnd) throw;
        if (seen.empty() && !current) throw;
      }
    }
    if (!structure) {
      if (++stale >= 3) {
        res.stop_reason = "exhausted";
        break;
      }
      continue;
    }
    stale = 0;
    ++res.structures;

    const auto knobs = knobs_of(*structure, cfg);
    auto coarse = coarse_search(*structure, knobs, ev, cfg, rng, clock, out_of_time);
    double batch_best = 0;
    std::vector<Sample> samples;
    std::set<Point> measured;
    const SearchRecord* coarse_best = nullptr;
    for (const auto& r : coarse.records) {
      take(r);
      note_floor(r);
      batch_best = std::max(batch_best, r.gflops);
      samples.push_back({features_of(r.point, stats), r.gflops});
      measured.insert(r.point);
      if (!coarse_best || r.gflops > coarse_best->gflops) coarse_best = &r;
    }

    if (!coarse.truncated && coarse_best && coarse_best->gflops > 0 && !knobs.empty()) {
      ForestOptions fo;
      fo.seed = rng();
      const Surrogate model = fit_surrogate(samples, fo);
      const auto picks =
          fine_refine(model, knobs, coarse_best->point, stats, cfg.refine_factor, cfg.refine_top_k, measured);
      const std::string id = graph_id(*structure);
      for (const auto& [p, pred] : picks) {
        if (out_of_time()) break;
        const OperatorGraph g = instantiate(*structure, knobs, p, stats);
        take({clock, id, serialize_graph(g), format_point(knobs, p), pred, 0, false, p});
        const auto r = ev.evaluate(g);
        clock += r.seconds * static_cast<double>(cfg.bench_reps);
        SearchRecord rec{clock, id, serialize_graph(g), format_point(knobs, p), r.gflops, r.bytes, true, p};
        take(rec);
        note_floor(rec);
        batch_best = std::max(batch_best, r.gflops);
      }
    }

    if (cfg.stop_at_floor && res.iterations_to_floor) {
      res.stop_reason = "floor";
      break;
    }
    const double ref = sa.best;
    if (ref > 0) shortfalls.push_back(std::max(0.0, (ref - batch_best) / ref));
    if (anneal_step(sa, batch_best, rng)) current = *structure;
    sa.t *= cfg.sa.alpha;
    sa.best = res.best.gflops;
    if (!shortfalls.empty()) {
      std::vector<double> s = shortfalls;
      std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(s.size() / 2), s.end());
      const double med = s[s.size() / 2];
      if (med > 0 && acceptance_probability(sa, sa.best * (1.0 - med)) < cfg.sa.min_accept) {
        res.stop_reason = "annealed";
        break;
      }
    }
  }

  if (!have_best || res.best.gflops <= 0) throw Error(ErrorCode::NoFeasibleDesign, "no design measured above zero");
  res.best_graph = parse_graph(res.best.graph);
  auto design = ev.build(res.best_graph);
  ExecOptions eo;
  eo.precision = cfg.precision;
  const auto y = execute_plan(design.plan, design.format, ev.x(), eo);
  if (!(max_abs_diff(y, spmv_oracle(m, ev.x())) <= ev.tolerance())) {
    throw Error(ErrorCode::OracleMismatch, "best design failed re-verification");
  }
  res.plan = std::move(design.plan);
  res.format = std::move(design.format);
  res.wall_seconds = wall();
  return res;
}

}  // namespace spmvd
