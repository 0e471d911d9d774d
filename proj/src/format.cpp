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

#include "spmvd/format.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "spmvd/error.hpp"

namespace spmvd {

static_assert(std::endian::native == std::endian::little, "format files assume a little-endian host");

std::string_view to_string(DType t) {
  switch (t) {
    case DType::I32: return "int32";
    case DType::U32: return "uint32";
    case DType::I64: return "int64";
    case DType::F64: return "float64";
  }
  return "?";
}

std::size_t dtype_size(DType t) { return t == DType::I32 || t == DType::U32 ? 4 : 8; }

TypedArray narrow_ints(std::vector<std::int64_t> v) {
  TypedArray a;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (v.empty() || (*lo >= std::numeric_limits<std::int32_t>::min() && *hi <= std::numeric_limits<std::int32_t>::max())) {
    a.dtype = DType::I32;
  } else if (*lo >= 0 && *hi <= std::numeric_limits<std::uint32_t>::max()) {
    a.dtype = DType::U32;
  } else {
    a.dtype = DType::I64;
  }
  a.ints = std::move(v);
  return a;
}

void FormatBundle::add(const std::string& name, TypedArray a, int provenance) {
  if (!has(name)) names_.push_back(name);
  arrays_[name] = std::move(a);
  provenance_[name] = provenance;
}

void FormatBundle::remove(const std::string& name) {
  arrays_.erase(name);
  provenance_.erase(name);
  names_.erase(std::remove(names_.begin(), names_.end(), name), names_.end());
}

const TypedArray& FormatBundle::at(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw Error(ErrorCode::MissingKey, name);
  return it->second;
}

int FormatBundle::provenance(const std::string& name) const {
  auto it = provenance_.find(name);
  return it == provenance_.end() ? 0 : it->second;
}

std::size_t FormatBundle::total_bytes() const {
  std::size_t sum = 0;
  for (const auto& [_, a] : arrays_) sum += a.bytes();
  return sum;
}

std::pair<std::size_t, std::string> split_key(const std::string& key) {
  if (key.size() > 2 && key[0] == 'p') {
    const auto dot = key.find('.');
    if (dot != std::string::npos && dot > 1 &&
        std::all_of(key.begin() + 1, key.begin() + static_cast<std::ptrdiff_t>(dot),
                    [](char c) { return c >= '0' && c <= '9'; })) {
      return {std::stoul(key.substr(1, dot - 1)), key.substr(dot + 1)};
    }
  }
  return {0, key};
}

FormatBundle build_format(const MetadataSet& ms, const std::vector<std::string>& keys) {
  FormatBundle fmt;
  for (const auto& full : keys) {
    const auto [part, name] = split_key(full);
    if (part >= ms.namespaces.size()) throw Error(ErrorCode::MissingKey, full);
    const auto& ns = ms.namespaces[part];
    if (!ns.has(name)) throw Error(ErrorCode::MissingKey, full);
    const auto& e = ns.entries().at(name);
    TypedArray a;
    if (std::holds_alternative<IntArray>(e)) {
      a = narrow_ints(std::get<IntArray>(e));
    } else if (std::holds_alternative<RealArray>(e)) {
      a.dtype = DType::F64;
      a.reals = std::get<RealArray>(e);
    } else {
      throw Error(ErrorCode::MissingKey, full + " is a scalar, not an array");
    }
    fmt.add(full, std::move(a), ns.provenance(name));
  }
  return fmt;
}

namespace {

std::string file_name(const std::string& name) {
  std::string f = name;
  std::replace(f.begin(), f.end(), '/', '_');
  return f + ".bin";
}

template <typename T>
void write_raw(std::ofstream& os, const std::vector<T>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_raw(std::ifstream& is, std::size_t n) {
  std::vector<T> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (static_cast<std::size_t>(is.gcount()) != n * sizeof(T)) throw Error(ErrorCode::Io, "short array file");
  return v;
}

}  // namespace

void write_format(const FormatBundle& fmt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest = nlohmann::ordered_json::array();
  for (const auto& name : fmt.names()) {
    const auto& a = fmt.at(name);
    const auto file = file_name(name);
    std::ofstream os(dir / file, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + (dir / file).string());
    switch (a.dtype) {
      case DType::I32: {
        std::vector<std::int32_t> v(a.ints.begin(), a.ints.end());
        write_raw(os, v);
        break;
      }
      case DType::U32: {
        std::vector<std::uint32_t> v(a.ints.begin(), a.ints.end());
        write_raw(os, v);
        break;
      }
      case DType::I64: write_raw(os, a.ints); break;
      case DType::F64: write_raw(os, a.reals); break;
    }
    manifest.push_back({{"name", name},
                        {"dtype", std::string(to_string(a.dtype))},
                        {"length", a.size()},
                        {"provenance", fmt.provenance(name)},
                        {"file", file}});
  }
  nlohmann::ordered_json doc = {{"arrays", manifest}, {"total_bytes", fmt.total_bytes()}};
  std::ofstream(dir / "manifest.json") << doc.dump(2) << "\n";
}

FormatBundle read_format(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw Error(ErrorCode::Io, "cannot read " + (dir / "manifest.json").string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ms);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("manifest: ") + e.what());
  }
  FormatBundle fmt;
  for (const auto& entry : doc.at("arrays")) {
    const auto name = entry.at("name").get<std::string>();
    const auto dtype = entry.at("dtype").get<std::string>();
    const auto n = entry.at("length").get<std::size_t>();
    std::ifstream is(dir / entry.at("file").get<std::string>(), std::ios::binary);
    if (!is) throw Error(ErrorCode::Io, "missing array file for " + name);
    TypedArray a;
    if (dtype == "int32") {
      a.dtype = DType::I32;
      auto v = read_raw<std::int32_t>(is, n);
      a.ints.assign(v.begin(), v.end());
    } else if (dtype == "uint32") {
      a.dtype = DType::U32;
      auto v = read_raw<std::uint32_t>(is, n);
      a.ints.assign(v.begin(), v.end());
    } else if (dtype == "int64") {
      a.dtype = DType::I64;
      a.ints = read_raw<std::int64_t>(is, n);
    } else if (dtype == "float64") {
      a.dtype = DType::F64;
      a.reals = read_raw<double>(is, n);
    } else {
      throw Error(ErrorCode::ParseError, "unknown dtype " + dtype);
    }
    fmt.add(name, std::move(a), entry.value("provenance", 0));
  }
  return fmt;
}

}  // namespace spmvd
