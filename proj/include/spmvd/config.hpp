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

#include <filesystem>
#include <string>

#include "spmvd/search.hpp"

namespace spmvd {

struct Config {
  SearchConfig search;
  std::filesystem::path out = "spmvd_out";
  bool dump_metadata = false;
  bool emit_kernel = false;
  bool emit_format = false;
};

/// Keys: every SearchConfig field by name ("sa" is an object with t0, alpha,
/// min_accept; "timing" is modeled|wall; "precision" is f32|f64; "user_bans"
/// lists operator names), plus out, dump_metadata, emit_kernel, emit_format.
/// Unknown keys and wrong types throw ConfigError.
Config parse_config(const std::string& json_text);
Config load_config(const std::filesystem::path& path);

std::string to_json(const Config& cfg);

}  // namespace spmvd
