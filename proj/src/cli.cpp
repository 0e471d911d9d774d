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

#include "spmvd/cli.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "spmvd/designer.hpp"
#include "spmvd/error.hpp"
#include "spmvd/fuzz.hpp"

namespace spmvd {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream o(p, std::ios::binary);
  if (!o) throw Error(ErrorCode::Io, "cannot write " + p.string());
  o << text;
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string sci(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

}  // namespace

std::string checksum(const std::vector<double>& y) {
  std::uint64_t h = 14695981039346656037ULL;
  for (double v : y) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &v, sizeof v);
    for (unsigned char c : b) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int cmd_design(const fs::path& matrix, const Config& cfg, std::ostream& out, std::ostream& err) {
  CooMatrix m;
  try {
    m = read_matrix_market(matrix);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIngest;
  }
  SearchResult res;
  try {
    res = search(m, cfg.search);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::NoFeasibleDesign) return kExitNoDesign;
    if (e.code() == ErrorCode::ConfigError) return kExitIngest;
    return kExitMismatch;
  }
  try {
    fs::create_directories(cfg.out);
    spit(cfg.out / "best.graph.json", serialize_graph(res.best_graph));
    spit(cfg.out / "best.plan.json", serialize_plan(res.plan));
    write_format(res.format, cfg.out / "best.format");
    const std::string kernel = emit_source(res.plan, res.format);
    spit(cfg.out / "best.kernel.txt", kernel);
    std::ostringstream log;
    write_log_csv(res.log, log);
    spit(cfg.out / "search.log.csv", log.str());

    out << "best gflops: " << fixed(res.best.gflops) << " (floor " << fixed(res.floor_gflops) << ")\n";
    out << "design: " << describe(res.best_graph) << '\n';
    out << "params: " << (res.best.params.empty() ? "-" : res.best.params) << '\n';
    out << "format bytes: " << res.format.total_bytes() << '\n';
    out << "structures: " << res.structures << ", records: " << res.log.size() << ", stop: " << res.stop_reason
        << '\n';
    if (cfg.dump_metadata) dump_metadata(execute_graph(res.best_graph, m), out);
    if (cfg.emit_kernel) out << kernel;
    if (cfg.emit_format) {
      for (const auto& name : res.format.names()) {
        const auto& a = res.format.at(name);
        out << name << ' ' << to_string(a.dtype) << ' ' << a.size() << '\n';
      }
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIngest;
  }
  return kExitOk;
}

int cmd_run(const fs::path& graph, const fs::path& matrix, const std::optional<fs::path>& x_path,
            const Config& cfg, std::ostream& out, std::ostream& err) {
  CooMatrix m;
  OperatorGraph g;
  std::vector<double> x;
  try {
    m = read_matrix_market(matrix);
    g = parse_graph(slurp(graph));
    if (x_path) {
      std::istringstream in(slurp(*x_path));
      double v;
      while (in >> v) x.push_back(v);
      if (!in.eof()) throw Error(ErrorCode::ParseError, "bad number in " + x_path->string());
      if (static_cast<Index>(x.size()) != m.n_cols) {
        throw Error(ErrorCode::DimensionMismatch,
                    "x has " + std::to_string(x.size()) + " entries, matrix has " + std::to_string(m.n_cols) + " columns");
      }
    } else {
      x.assign(static_cast<std::size_t>(m.n_cols), 1.0);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIngest;
  }

  try {
    KernelPlan plan;
    FormatBundle fmt;
    std::string stem = graph.filename().string();
    const std::string suffix = ".graph.json";
    const bool saved_name = stem.size() > suffix.size() && stem.ends_with(suffix);
    stem = saved_name ? stem.substr(0, stem.size() - suffix.size()) : "";
    const fs::path plan_path = graph.parent_path() / (stem + ".plan.json");
    const fs::path fmt_path = graph.parent_path() / (stem + ".format");
    if (saved_name && fs::exists(plan_path) && fs::exists(fmt_path)) {
      plan = parse_plan(slurp(plan_path));
      fmt = read_format(fmt_path);
    } else {
      const auto ms = execute_graph(g, m);
      plan = build_plan(g, ms);
      fmt = build_format(ms, required_keys(plan));
    }
    BenchOptions bo;
    bo.exec.precision = cfg.search.precision;
    bo.exec.workers = cfg.search.workers;
    bo.exec.mode = cfg.search.workers > 1 ? ExecMode::Parallel : ExecMode::Deterministic;
    bo.timing = cfg.search.timing;
    bo.reps = cfg.search.bench_reps;
    const auto rep = benchmark(plan, fmt, x, bo);
    const double e = max_abs_diff(rep.y, spmv_oracle(m, x));
    const double tol = oracle_tolerance(m, x, cfg.search.precision);
    out << "checksum: " << checksum(rep.y) << '\n';
    out << "gflops: " << fixed(rep.gflops) << '\n';
    out << "max_abs_error: " << sci(e) << " (tolerance " << sci(tol) << ")\n";
    if (!(e <= tol)) {
      err << "error: output differs from the reference product\n";
      return kExitMismatch;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.code()) {
      case ErrorCode::OutOfBoundsRead:
      case ErrorCode::OracleMismatch:
      case ErrorCode::DimensionMismatch:
      case ErrorCode::ScratchOverflow:
      case ErrorCode::MissingAdapter:
      case ErrorCode::MissingKey: return kExitMismatch;
      default: return kExitIngest;
    }
  }
  return kExitOk;
}

namespace {

struct Failure {
  std::string what;
};

/// Empty when the case passes in every mode.
std::optional<Failure> run_case(const CooMatrix& m, const OperatorGraph& g, const VerifyOptions& opt,
                                std::uint64_t x_seed) {
  std::mt19937_64 rng(x_seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(static_cast<std::size_t>(m.n_cols));
  for (auto& v : x) v = u(rng);
  try {
    for (auto mode : {ExecMode::Deterministic, ExecMode::Parallel}) {
      for (bool compress : {false, true}) {
        ExecOptions eo;
        eo.mode = mode;
        eo.workers = mode == ExecMode::Parallel ? std::max<std::size_t>(2, opt.workers) : 1;
        eo.inject_fault = opt.inject_fault;
        const auto r = check_design(m, g, x, eo, compress);
        if (!r.ok()) {
          return Failure{std::string(mode == ExecMode::Parallel ? "parallel" : "deterministic") +
                         (compress ? " compressed" : "") + " error " + sci(r.error) + " > " + sci(r.tolerance)};
        }
      }
    }
  } catch (const Error& e) {
    return Failure{e.what()};
  }
  return std::nullopt;
}

/// Drops entries (keeping every row non-empty) while the case keeps failing.
CooMatrix shrink(CooMatrix m, const OperatorGraph& g, const VerifyOptions& opt, std::uint64_t x_seed) {
  bool progress = true;
  while (progress) {
    progress = false;
    for (std::size_t i = 0; i < m.values.size(); ++i) {
      const Index r = m.row_idx[i];
      const bool alone = (i == 0 || m.row_idx[i - 1] != r) && (i + 1 == m.values.size() || m.row_idx[i + 1] != r);
      if (alone) continue;
      auto rows = m.row_idx, cols = m.col_idx;
      auto vals = m.values;
      rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(i));
      cols.erase(cols.begin() + static_cast<std::ptrdiff_t>(i));
      vals.erase(vals.begin() + static_cast<std::ptrdiff_t>(i));
      auto smaller = CooMatrix::from_triplets(m.n_rows, m.n_cols, rows, cols, vals);
      if (run_case(smaller, g, opt, x_seed)) {
        m = std::move(smaller);
        progress = true;
        break;
      }
    }
  }
  return m;
}

}  // namespace

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  std::mt19937_64 rng(opt.seed);
  for (std::size_t i = 0; i < opt.count; ++i) {
    CooMatrix m;
    OperatorGraph g;
    try {
      m = random_matrix(rng);
      g = random_design(rng, m);
    } catch (const Error& e) {
      err << "case " << i << ": generator failed: " << e.what() << '\n';
      return kExitVerifyFailed;
    }
    const std::uint64_t x_seed = rng();
    auto fail = run_case(m, g, opt, x_seed);
    if (!fail) continue;
    const CooMatrix small = shrink(m, g, opt, x_seed);
    try {
      fs::create_directories(opt.repro_dir);
      spit(opt.repro_dir / "matrix.mtx", write_matrix_market(small));
      spit(opt.repro_dir / "design.graph.json", serialize_graph(g));
      spit(opt.repro_dir / "failure.txt", "case " + std::to_string(i) + " seed " + std::to_string(opt.seed) +
                                              " x_seed " + std::to_string(x_seed) + "\n" + fail->what + "\n");
    } catch (const Error& e) {
      err << "error: " << e.what() << '\n';
    }
    err << "case " << i << " failed: " << fail->what << '\n';
    err << "repro: " << opt.repro_dir.string() << '\n';
    return kExitVerifyFailed;
  }
  out << "verified " << opt.count << " cases\n";
  return kExitOk;
}

}  // namespace spmvd
