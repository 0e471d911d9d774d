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

#include <iostream>

#include "CLI11.hpp"
#include "spmvd/cli.hpp"
#include "spmvd/error.hpp"

namespace {

struct Overrides {
  std::string config;
  std::optional<double> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> precision;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
  bool dump_metadata = false;
  bool emit_kernel = false;
  bool emit_format = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--budget-seconds", o.budget, "Wall-clock search budget");
  cmd->add_option("--seed", o.seed, "Random seed");
  cmd->add_option("--precision", o.precision, "f64 or f32")->check(CLI::IsMember({"f64", "f32"}));
  cmd->add_option("--workers", o.workers, "Executor workers");
  cmd->add_option("--out", o.out, "Output directory");
  cmd->add_flag("--dump-metadata", o.dump_metadata, "Print the best design's metadata");
  cmd->add_flag("--emit-kernel", o.emit_kernel, "Print the kernel listing");
  cmd->add_flag("--emit-format", o.emit_format, "Print the format arrays");
}

spmvd::Config resolve(const Overrides& o) {
  spmvd::Config c = o.config.empty() ? spmvd::Config{} : spmvd::load_config(o.config);
  if (o.budget) c.search.budget_seconds = *o.budget;
  if (o.seed) c.search.seed = *o.seed;
  if (o.precision) c.search.precision = *o.precision == "f32" ? spmvd::Precision::F32 : spmvd::Precision::F64;
  if (o.workers) c.search.workers = *o.workers;
  if (o.out) c.out = *o.out;
  c.dump_metadata = c.dump_metadata || o.dump_metadata;
  c.emit_kernel = c.emit_kernel || o.emit_kernel;
  c.emit_format = c.emit_format || o.emit_format;
  spmvd::check_config(c.search);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse matrix-vector format and kernel designer"};
  app.require_subcommand(1);

  Overrides design_o, run_o;
  std::string matrix, graph;
  std::optional<std::string> x_path;
  auto* design = app.add_subcommand("design", "Search a format and kernel for a matrix");
  design->add_option("matrix", matrix, "Matrix Market file")->required();
  add_common(design, design_o);

  auto* run = app.add_subcommand("run", "Execute a saved design");
  run->add_option("graph", graph, "best.graph.json")->required();
  run->add_option("matrix", matrix, "Matrix Market file")->required();
  run->add_option("--x", x_path, "Whitespace-separated x values (default: ones)");
  add_common(run, run_o);

  spmvd::VerifyOptions vo;
  std::string repro;
  auto* verify = app.add_subcommand("verify", "Fuzz designs against the reference product");
  verify->add_option("-n,--count", vo.count, "Number of cases");
  verify->add_option("--seed", vo.seed, "Random seed");
  verify->add_option("--workers", vo.workers, "Workers in parallel mode");
  verify->add_option("--repro-dir", repro, "Where to write a failing case");
  verify->add_flag("--inject-fault", vo.inject_fault, "Perturb the output to exercise failure reporting");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : spmvd::kExitIngest;
  }

  try {
    if (*design) return spmvd::cmd_design(matrix, resolve(design_o), std::cout, std::cerr);
    if (*run) return spmvd::cmd_run(graph, matrix, x_path, resolve(run_o), std::cout, std::cerr);
    if (!repro.empty()) vo.repro_dir = repro;
    return spmvd::cmd_verify(vo, std::cout, std::cerr);
  } catch (const spmvd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return spmvd::kExitIngest;
  }
}
