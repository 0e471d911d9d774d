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
#include <map>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "spmvd/matrix.hpp"

namespace spmvd {

using IntArray = std::vector<std::int64_t>;
using RealArray = std::vector<double>;
using Entry = std::variant<std::int64_t, IntArray, RealArray>;

/// Key-value record of one sub-matrix. Scalars describe shape and the
/// operators applied so far; arrays describe the converted layout.
class Namespace {
 public:
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  void erase(const std::string& key) { entries_.erase(key); }

  std::int64_t scalar(const std::string& key) const;
  std::int64_t scalar_or(const std::string& key, std::int64_t fallback) const;
  const IntArray& ints(const std::string& key) const;
  IntArray& ints(const std::string& key);
  const RealArray& reals(const std::string& key) const;
  RealArray& reals(const std::string& key);

  void set(const std::string& key, std::int64_t v) { put(key, v); }
  void set(const std::string& key, IntArray v) { put(key, std::move(v)); }
  void set(const std::string& key, RealArray v) { put(key, std::move(v)); }

  const std::map<std::string, Entry>& entries() const { return entries_; }

  /// Node id charged with later writes (0 = input).
  void set_writer(int node) { writer_ = node; }
  int writer() const { return writer_; }
  /// Node that last wrote `key`, 0 when it came from the input matrix.
  int provenance(const std::string& key) const {
    auto it = provenance_.find(key);
    return it == provenance_.end() ? 0 : it->second;
  }

 private:
  void put(const std::string& key, Entry e) {
    entries_[key] = std::move(e);
    provenance_[key] = writer_;
  }

  std::map<std::string, Entry> entries_;
  std::map<std::string, int> provenance_;
  int writer_ = 0;
};

struct MetadataSet {
  Index n_rows = 0;
  Index n_cols = 0;
  /// One namespace per leaf path of the operator graph, in depth-first order.
  std::vector<Namespace> namespaces;
};

/// Debug listing: one line per key with its length and first eight values.
void dump_metadata(const MetadataSet& ms, std::ostream& os);

}  // namespace spmvd
