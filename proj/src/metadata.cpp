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

#include "spmvd/metadata.hpp"

#include "spmvd/error.hpp"

namespace spmvd {

namespace {

template <typename T>
const T& get_as(const std::map<std::string, Entry>& m, const std::string& key) {
  auto it = m.find(key);
  if (it == m.end()) throw Error(ErrorCode::MissingKey, key);
  if (!std::holds_alternative<T>(it->second)) throw Error(ErrorCode::MissingKey, key + " has another type");
  return std::get<T>(it->second);
}

}  // namespace

std::int64_t Namespace::scalar(const std::string& key) const { return get_as<std::int64_t>(entries_, key); }

std::int64_t Namespace::scalar_or(const std::string& key, std::int64_t fallback) const {
  return has(key) ? scalar(key) : fallback;
}

const IntArray& Namespace::ints(const std::string& key) const { return get_as<IntArray>(entries_, key); }
IntArray& Namespace::ints(const std::string& key) {
  return const_cast<IntArray&>(get_as<IntArray>(entries_, key));
}

const RealArray& Namespace::reals(const std::string& key) const { return get_as<RealArray>(entries_, key); }
RealArray& Namespace::reals(const std::string& key) {
  return const_cast<RealArray&>(get_as<RealArray>(entries_, key));
}

void dump_metadata(const MetadataSet& ms, std::ostream& os) {
  os << "matrix " << ms.n_rows << "x" << ms.n_cols << ", " << ms.namespaces.size() << " namespace(s)\n";
  for (std::size_t i = 0; i < ms.namespaces.size(); ++i) {
    os << "[" << i << "]\n";
    for (const auto& [key, e] : ms.namespaces[i].entries()) {
      os << "  " << key;
      std::visit(
          [&](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, std::int64_t>) {
              os << " = " << v;
            } else {
              os << " len=" << v.size() << " [";
              for (std::size_t k = 0; k < v.size() && k < 8; ++k) os << (k ? ", " : "") << v[k];
              if (v.size() > 8) os << ", ...";
              os << "]";
            }
          },
          e);
      os << "\n";
    }
  }
}

}  // namespace spmvd
