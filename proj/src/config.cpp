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

#include "spmvd/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"
#include "spmvd/error.hpp"

namespace spmvd {

namespace {

using json = nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

template <class T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail("wrong type for '" + key + "'");
  }
}

std::size_t get_count(const json& j, const std::string& key) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    fail("'" + key + "' must be a non-negative integer");
  }
  return j.get<std::size_t>();
}

double get_real(const json& j, const std::string& key) {
  if (!j.is_number()) fail("'" + key + "' must be a number");
  return j.get<double>();
}

bool get_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) fail("'" + key + "' must be a boolean");
  return j.get<bool>();
}

}  // namespace

Config parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) fail("config must be a JSON object");
  Config c;
  auto& s = c.search;
  for (const auto& [key, v] : root.items()) {
    if (key == "budget_seconds") {
      s.budget_seconds = get_real(v, key);
    } else if (key == "coarse_grids") {
      if (!v.is_object()) fail("coarse_grids must be an object");
      for (const auto& [name, vals] : v.items()) {
        if (!default_coarse_grids().count(name)) fail("unknown grid '" + name + "'");
        s.coarse_grids[name] = get_as<std::vector<std::int64_t>>(vals, "coarse_grids." + name);
      }
    } else if (key == "refine_factor") {
      s.refine_factor = static_cast<std::int64_t>(get_count(v, key));
    } else if (key == "refine_top_k") {
      s.refine_top_k = get_count(v, key);
    } else if (key == "sa") {
      if (!v.is_object()) fail("sa must be an object");
      for (const auto& [sk, sv] : v.items()) {
        if (sk == "t0") {
          s.sa.t0 = get_real(sv, "sa.t0");
        } else if (sk == "alpha") {
          s.sa.alpha = get_real(sv, "sa.alpha");
        } else if (sk == "min_accept") {
          s.sa.min_accept = get_real(sv, "sa.min_accept");
        } else {
          fail("unknown key 'sa." + sk + "'");
        }
      }
    } else if (key == "seed") {
      s.seed = get_count(v, key);
    } else if (key == "bench_reps") {
      s.bench_reps = get_count(v, key);
    } else if (key == "timing") {
      const auto t = get_as<std::string>(v, key);
      if (t == "modeled") {
        s.timing = TimingMode::Modeled;
      } else if (t == "wall") {
        s.timing = TimingMode::Wall;
      } else {
        fail("timing must be modeled or wall");
      }
    } else if (key == "precision") {
      const auto p = get_as<std::string>(v, key);
      if (p == "f64") {
        s.precision = Precision::F64;
      } else if (p == "f32") {
        s.precision = Precision::F32;
      } else {
        fail("precision must be f32 or f64");
      }
    } else if (key == "workers") {
      s.workers = get_count(v, key);
    } else if (key == "max_structures") {
      s.max_structures = get_count(v, key);
    } else if (key == "max_grid_points") {
      s.max_grid_points = get_count(v, key);
    } else if (key == "patch_budget") {
      s.patch_budget = get_count(v, key);
    } else if (key == "compression") {
      s.compression = get_bool(v, key);
    } else if (key == "fuse_arrays") {
      s.fuse_arrays = get_bool(v, key);
    } else if (key == "pruning") {
      s.pruning = get_bool(v, key);
    } else if (key == "stop_at_floor") {
      s.stop_at_floor = get_bool(v, key);
    } else if (key == "max_depth") {
      s.max_depth = get_count(v, key);
    } else if (key == "user_bans") {
      for (const auto& name : get_as<std::vector<std::string>>(v, key)) {
        auto k = operator_kind_from_string(name);
        if (!k || *k == OperatorKind::Input) fail("unknown operator '" + name + "' in user_bans");
        s.user_bans.insert(*k);
      }
    } else if (key == "out") {
      c.out = get_as<std::string>(v, key);
    } else if (key == "dump_metadata") {
      c.dump_metadata = get_bool(v, key);
    } else if (key == "emit_kernel") {
      c.emit_kernel = get_bool(v, key);
    } else if (key == "emit_format") {
      c.emit_format = get_bool(v, key);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  check_config(s);
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const Config& c) {
  const auto& s = c.search;
  json j;
  j["budget_seconds"] = s.budget_seconds;
  j["coarse_grids"] = s.coarse_grids;
  j["refine_factor"] = s.refine_factor;
  j["refine_top_k"] = s.refine_top_k;
  j["sa"] = {{"t0", s.sa.t0}, {"alpha", s.sa.alpha}, {"min_accept", s.sa.min_accept}};
  j["seed"] = s.seed;
  j["bench_reps"] = s.bench_reps;
  j["timing"] = s.timing == TimingMode::Modeled ? "modeled" : "wall";
  j["precision"] = s.precision == Precision::F64 ? "f64" : "f32";
  j["workers"] = s.workers;
  j["max_structures"] = s.max_structures;
  j["max_grid_points"] = s.max_grid_points;
  j["patch_budget"] = s.patch_budget;
  j["compression"] = s.compression;
  j["fuse_arrays"] = s.fuse_arrays;
  j["pruning"] = s.pruning;
  j["stop_at_floor"] = s.stop_at_floor;
  j["max_depth"] = s.max_depth;
  std::vector<std::string> bans;
  for (auto k : s.user_bans) bans.emplace_back(to_string(k));
  j["user_bans"] = bans;
  j["out"] = c.out.string();
  j["dump_metadata"] = c.dump_metadata;
  j["emit_kernel"] = c.emit_kernel;
  j["emit_format"] = c.emit_format;
  return j.dump(2);
}

}  // namespace spmvd
