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
#include <random>

#include "spmvd/executor.hpp"
#include "spmvd/graph.hpp"
#include "spmvd/matrix.hpp"

namespace spmvd {

struct RandomMatrixOptions {
  Index max_rows = 64;
  Index max_cols = 64;
  double min_density = 0.01;
  double max_density = 0.30;
};

/// Every row gets at least one entry; values in [-2, 2] away from zero.
CooMatrix random_matrix(std::mt19937_64& rng, const RandomMatrixOptions& opt = {});

/// Complete graph with every parameter drawn at random, retried until the
/// designer and kernel generator accept it for `m`.
OperatorGraph random_design(std::mt19937_64& rng, const CooMatrix& m, std::size_t max_attempts = 200);

/// Max |y - oracle| for one execution of `g` over `m` with x drawn from `rng`,
/// and the tolerance 1e-12 * ||A||_inf * ||x||_inf.
struct CaseResult {
  double error = 0;
  double tolerance = 0;
  bool ok() const { return error <= tolerance; }
};
CaseResult check_design(const CooMatrix& m, const OperatorGraph& g, std::span<const double> x,
                        const ExecOptions& exec, bool compress = false);

}  // namespace spmvd
