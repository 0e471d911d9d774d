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

#include "spmvd/matrix.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spmvd/error.hpp"

namespace spmvd {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

Index parse_index(std::string_view tok, std::size_t line_no) {
  Index v = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size()) {
    throw Error(ErrorCode::MalformedHeader,
                "line " + std::to_string(line_no) + ": expected integer, got '" + std::string(tok) + "'");
  }
  return v;
}

double parse_real(std::string_view tok, std::size_t line_no) {
  // Fortran-style exponents (1.0D+00) show up in older collections.
  std::string s(tok);
  for (char& c : s) {
    if (c == 'd' || c == 'D') c = 'e';
  }
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw Error(ErrorCode::MalformedHeader,
                "line " + std::to_string(line_no) + ": expected real, got '" + std::string(tok) + "'");
  }
  return v;
}

template <typename T>
void put_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get_le(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error(ErrorCode::Io, "truncated coo cache");
  return v;
}

constexpr std::array<char, 8> kCooMagic = {'S', 'P', 'M', 'V', 'C', 'O', 'O', '1'};

}  // namespace

CooMatrix CooMatrix::from_triplets(Index n_rows, Index n_cols, std::vector<Index> rows,
                                   std::vector<Index> cols, std::vector<double> vals) {
  if (n_rows < 0 || n_cols < 0) {
    throw Error(ErrorCode::MalformedHeader, "negative matrix dimension");
  }
  if (rows.size() != cols.size() || rows.size() != vals.size()) {
    throw Error(ErrorCode::DimensionMismatch, "triplet arrays differ in length");
  }
  const std::size_t n = rows.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i] < 0 || rows[i] >= n_rows || cols[i] < 0 || cols[i] >= n_cols) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "entry (" + std::to_string(rows[i] + 1) + "," + std::to_string(cols[i] + 1) +
                      ") outside " + std::to_string(n_rows) + "x" + std::to_string(n_cols));
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return rows[a] != rows[b] ? rows[a] < rows[b] : cols[a] < cols[b];
  });

  CooMatrix m;
  m.n_rows = n_rows;
  m.n_cols = n_cols;
  m.row_idx.reserve(n);
  m.col_idx.reserve(n);
  m.values.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = order[k];
    if (k > 0 && rows[i] == m.row_idx.back() && cols[i] == m.col_idx.back()) {
      throw Error(ErrorCode::DuplicateEntry, "duplicate entry (" + std::to_string(rows[i] + 1) +
                                                 "," + std::to_string(cols[i] + 1) + ")");
    }
    m.row_idx.push_back(rows[i]);
    m.col_idx.push_back(cols[i]);
    m.values.push_back(vals[i]);
  }

  std::vector<bool> seen(static_cast<std::size_t>(n_rows), false);
  for (Index r : m.row_idx) seen[static_cast<std::size_t>(r)] = true;
  for (Index r = 0; r < n_rows; ++r) {
    if (!seen[static_cast<std::size_t>(r)]) {
      throw Error(ErrorCode::EmptyRow, "row " + std::to_string(r + 1) + " has no entries");
    }
  }
  return m;
}

CooMatrix parse_matrix_market(std::string_view text) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= text.size()) return false;
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = end + 1;
    ++line_no;
    return true;
  };

  std::string_view line;
  if (!next_line(line)) throw Error(ErrorCode::MalformedHeader, "empty input");
  auto head = split_ws(line);
  if (head.size() != 5 || lower(head[0]) != "%%matrixmarket" || lower(head[1]) != "matrix") {
    throw Error(ErrorCode::MalformedHeader, "missing %%MatrixMarket matrix banner");
  }
  if (lower(head[2]) != "coordinate") {
    throw Error(ErrorCode::MalformedHeader, "only coordinate format is supported");
  }
  const std::string field = lower(head[3]);
  const std::string symmetry = lower(head[4]);
  const bool pattern = field == "pattern";
  if (!pattern && field != "real" && field != "integer") {
    throw Error(ErrorCode::MalformedHeader, "unsupported field '" + field + "'");
  }
  const bool symmetric = symmetry == "symmetric";
  if (!symmetric && symmetry != "general") {
    throw Error(ErrorCode::MalformedHeader, "unsupported symmetry '" + symmetry + "'");
  }

  std::vector<std::string_view> size_tok;
  while (next_line(line)) {
    if (line.empty() || line.front() == '%') continue;
    size_tok = split_ws(line);
    if (!size_tok.empty()) break;
  }
  if (size_tok.size() != 3) throw Error(ErrorCode::MalformedHeader, "missing or malformed size line");
  const Index n_rows = parse_index(size_tok[0], line_no);
  const Index n_cols = parse_index(size_tok[1], line_no);
  const Index declared = parse_index(size_tok[2], line_no);
  if (n_rows < 0 || n_cols < 0 || declared < 0) {
    throw Error(ErrorCode::MalformedHeader, "negative size on size line");
  }
  if (symmetric && n_rows != n_cols) {
    throw Error(ErrorCode::MalformedHeader, "symmetric matrix must be square");
  }

  std::vector<Index> rows, cols;
  std::vector<double> vals;
  rows.reserve(static_cast<std::size_t>(declared) * (symmetric ? 2 : 1));
  Index read = 0;
  while (next_line(line)) {
    if (line.empty() || line.front() == '%') continue;
    auto tok = split_ws(line);
    if (tok.empty()) continue;
    const std::size_t want = pattern ? 2 : 3;
    if (tok.size() != want) {
      throw Error(ErrorCode::MalformedHeader, "line " + std::to_string(line_no) + ": expected " +
                                                  std::to_string(want) + " fields");
    }
    const Index r = parse_index(tok[0], line_no) - 1;
    const Index c = parse_index(tok[1], line_no) - 1;
    const double v = pattern ? 1.0 : parse_real(tok[2], line_no);
    if (r < 0 || r >= n_rows || c < 0 || c >= n_cols) {
      throw Error(ErrorCode::IndexOutOfRange, "line " + std::to_string(line_no) + ": entry (" +
                                                  std::to_string(r + 1) + "," + std::to_string(c + 1) +
                                                  ") outside matrix");
    }
    rows.push_back(r);
    cols.push_back(c);
    vals.push_back(v);
    if (symmetric && r != c) {
      rows.push_back(c);
      cols.push_back(r);
      vals.push_back(v);
    }
    ++read;
  }
  if (read != declared) {
    throw Error(ErrorCode::MalformedHeader, "declared " + std::to_string(declared) +
                                                " entries, found " + std::to_string(read));
  }
  return CooMatrix::from_triplets(n_rows, n_cols, std::move(rows), std::move(cols), std::move(vals));
}

CooMatrix read_matrix_market(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_matrix_market(ss.str());
}

std::string write_matrix_market(const CooMatrix& m) {
  std::ostringstream os;
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << m.n_rows << ' ' << m.n_cols << ' ' << m.nnz() << '\n';
  os.precision(17);
  for (Index i = 0; i < m.nnz(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    os << m.row_idx[k] + 1 << ' ' << m.col_idx[k] + 1 << ' ' << m.values[k] << '\n';
  }
  return os.str();
}

std::vector<Index> row_lengths(const CooMatrix& m) {
  std::vector<Index> len(static_cast<std::size_t>(m.n_rows), 0);
  for (Index r : m.row_idx) ++len[static_cast<std::size_t>(r)];
  return len;
}

MatrixStats compute_stats(const CooMatrix& m) {
  MatrixStats s;
  s.n_rows = m.n_rows;
  s.n_cols = m.n_cols;
  s.nnz = m.nnz();
  if (m.n_rows == 0) return s;
  const auto len = row_lengths(m);
  s.avg_row_len = static_cast<double>(s.nnz) / static_cast<double>(m.n_rows);
  double acc = 0.0;
  for (Index l : len) {
    const double d = static_cast<double>(l) - s.avg_row_len;
    acc += d * d;
  }
  s.row_len_variance = acc / static_cast<double>(m.n_rows);
  auto [lo, hi] = std::minmax_element(len.begin(), len.end());
  s.min_row_len = *lo;
  s.max_row_len = *hi;
  return s;
}

std::vector<double> spmv_oracle(const CooMatrix& m, std::span<const double> x) {
  if (static_cast<Index>(x.size()) != m.n_cols) {
    throw Error(ErrorCode::DimensionMismatch, "x has " + std::to_string(x.size()) +
                                                  " entries, matrix has " + std::to_string(m.n_cols) +
                                                  " columns");
  }
  std::vector<double> y(static_cast<std::size_t>(m.n_rows), 0.0);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    y[static_cast<std::size_t>(m.row_idx[i])] += m.values[i] * x[static_cast<std::size_t>(m.col_idx[i])];
  }
  return y;
}

void write_coo_cache(const CooMatrix& m, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os.write(kCooMagic.data(), kCooMagic.size());
  put_le<std::int64_t>(os, m.n_rows);
  put_le<std::int64_t>(os, m.n_cols);
  put_le<std::int64_t>(os, m.nnz());
  for (Index r : m.row_idx) put_le<std::int64_t>(os, r);
  for (Index c : m.col_idx) put_le<std::int64_t>(os, c);
  for (double v : m.values) put_le<double>(os, v);
}

CooMatrix read_coo_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::array<char, 8> magic{};
  is.read(magic.data(), magic.size());
  if (!is || magic != kCooMagic) throw Error(ErrorCode::MalformedHeader, "bad coo cache magic");
  const auto n_rows = get_le<std::int64_t>(is);
  const auto n_cols = get_le<std::int64_t>(is);
  const auto nnz = get_le<std::int64_t>(is);
  if (nnz < 0) throw Error(ErrorCode::MalformedHeader, "negative nnz in coo cache");
  std::vector<Index> rows(static_cast<std::size_t>(nnz)), cols(static_cast<std::size_t>(nnz));
  std::vector<double> vals(static_cast<std::size_t>(nnz));
  for (auto& r : rows) r = get_le<std::int64_t>(is);
  for (auto& c : cols) c = get_le<std::int64_t>(is);
  for (auto& v : vals) v = get_le<double>(is);
  return CooMatrix::from_triplets(n_rows, n_cols, std::move(rows), std::move(cols), std::move(vals));
}

}  // namespace spmvd
