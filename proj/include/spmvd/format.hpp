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
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "spmvd/metadata.hpp"

namespace spmvd {

enum class DType { I32, U32, I64, F64 };

std::string_view to_string(DType t);
std::size_t dtype_size(DType t);

/// Integer arrays keep their values in `ints`, real arrays in `reals`; the
/// dtype records the stored width.
struct TypedArray {
  DType dtype = DType::I64;
  std::vector<std::int64_t> ints;
  std::vector<double> reals;

  bool is_real() const { return dtype == DType::F64; }
  std::size_t size() const { return is_real() ? reals.size() : ints.size(); }
  std::size_t bytes() const { return size() * dtype_size(dtype); }

  friend bool operator==(const TypedArray&, const TypedArray&) = default;
};

/// Narrowest lossless width: int32, then uint32, then int64.
TypedArray narrow_ints(std::vector<std::int64_t> v);

/// Arrays read by a kernel plan, in first-use order.
class FormatBundle {
 public:
  void add(const std::string& name, TypedArray a, int provenance = 0);
  void remove(const std::string& name);
  bool has(const std::string& name) const { return arrays_.count(name) != 0; }
  /// Throws MissingKey.
  const TypedArray& at(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  int provenance(const std::string& name) const;
  std::size_t total_bytes() const;

  friend bool operator==(const FormatBundle&, const FormatBundle&) = default;

 private:
  std::vector<std::string> names_;
  std::map<std::string, TypedArray> arrays_;
  std::map<std::string, int> provenance_;
};

/// Splits "p<k>.name" into (k, name). Names without the prefix address namespace 0.
std::pair<std::size_t, std::string> split_key(const std::string& key);

/// Copies the named metadata arrays; MissingKey when one is absent.
FormatBundle build_format(const MetadataSet& ms, const std::vector<std::string>& keys);

/// One raw little-endian file per array plus manifest.json (name, dtype, length, provenance, file).
void write_format(const FormatBundle& fmt, const std::filesystem::path& dir);
FormatBundle read_format(const std::filesystem::path& dir);

}  // namespace spmvd
