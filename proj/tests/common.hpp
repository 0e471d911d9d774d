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

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "spmvd/graph.hpp"
#include "spmvd/matrix.hpp"

namespace testing_support {

/// 4x4 matrix with rows of lengths [2,1,3,1] and values 1..7 in storage order.
inline spmvd::CooMatrix canonical_a() {
  return spmvd::CooMatrix::from_triplets(4, 4, {0, 0, 1, 2, 2, 2, 3}, {0, 2, 1, 0, 1, 3, 3},
                                         {1, 2, 3, 4, 5, 6, 7});
}

inline Eigen::MatrixXd dense(const spmvd::CooMatrix& m) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(m.n_rows, m.n_cols);
  for (std::size_t i = 0; i < m.values.size(); ++i) d(m.row_idx[i], m.col_idx[i]) += m.values[i];
  return d;
}

/// Dense product, independent of the library's oracle.
inline std::vector<double> dense_spmv(const spmvd::CooMatrix& m, const std::vector<double>& x) {
  Eigen::VectorXd xv = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  Eigen::VectorXd y = dense(m) * xv;
  return {y.data(), y.data() + y.size()};
}

inline std::vector<double> random_x(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> x(n);
  for (auto& v : x) v = u(rng);
  return x;
}

using K = spmvd::OperatorKind;

inline spmvd::ParamMap rows(std::int64_t r) { return {{"rows_per_block", r}}; }
inline spmvd::ParamMap nnz(std::int64_t n) { return {{"nnz_per_block", n}}; }
inline spmvd::ParamMap scope(const char* s) { return {{"scope", std::string(s)}}; }

inline spmvd::OperatorGraph chain(const std::vector<std::pair<K, spmvd::ParamMap>>& ops) {
  spmvd::OperatorGraph g;
  g.add_chain(g.root(), ops);
  return g;
}

inline spmvd::OperatorGraph csr_scalar() {
  return chain({{K::Compress, {}}, {K::BmtRowBlock, rows(1)}, {K::ThreadTotalRed, {}}, {K::GmemAtomRed, {}}});
}

inline spmvd::OperatorGraph ell_like() {
  return chain({{K::Compress, {}},
                {K::BmtRowBlock, rows(1)},
                {K::BmtPad, scope("global")},
                {K::ThreadTotalRed, {}},
                {K::GmemAtomRed, {}}});
}

inline spmvd::OperatorGraph sell_like() {
  return chain({{K::Sort, {}},
                {K::Compress, {}},
                {K::BmtbRowBlock, rows(2)},
                {K::BmtRowBlock, rows(1)},
                {K::BmtPad, scope("per_bmtb")},
                {K::ThreadTotalRed, {}},
                {K::GmemAtomRed, {}}});
}

}  // namespace testing_support
