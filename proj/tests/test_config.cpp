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

#include <optional>

#include "doctest.h"
#include "spmvd/config.hpp"
#include "spmvd/error.hpp"

using namespace spmvd;

namespace {

std::optional<ErrorCode> code_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("empty config keeps the defaults") {
  const auto c = parse_config("{}");
  CHECK(c.search.budget_seconds == 600);
  CHECK(c.search.sa.alpha == 0.9);
  CHECK(c.search.seed == 1);
  CHECK(c.out == "spmvd_out");
}

TEST_CASE("overrides") {
  const auto c = parse_config(R"({"budget_seconds": 30, "seed": 7, "sa": {"alpha": 0.5},
    "coarse_grids": {"threads_per_block": [32, 64]}, "precision": "f32", "timing": "wall",
    "user_bans": ["BIN", "SORT"], "out": "o", "emit_kernel": true})");
  CHECK(c.search.budget_seconds == 30);
  CHECK(c.search.seed == 7);
  CHECK(c.search.sa.alpha == 0.5);
  CHECK(c.search.sa.t0 == 0.3);
  CHECK(c.search.coarse_grids.at("threads_per_block") == std::vector<std::int64_t>{32, 64});
  CHECK(c.search.precision == Precision::F32);
  CHECK(c.search.timing == TimingMode::Wall);
  CHECK(c.search.user_bans == std::set<OperatorKind>{OperatorKind::Bin, OperatorKind::Sort});
  CHECK(c.out == "o");
  CHECK(c.emit_kernel);
}

TEST_CASE("bad configs") {
  CHECK(code_of(R"({"budget": 1})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"sa": {"beta": 1}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"sa": {"alpha": 1.5}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"budget_seconds": "ten"})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"budget_seconds": 0})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"coarse_grids": {"warps": [1]}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"coarse_grids": {"group": []}})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"user_bans": ["TELEPORT"]})") == ErrorCode::ConfigError);
  CHECK(code_of(R"({"seed": -1})") == ErrorCode::ConfigError);
  CHECK(code_of("[1]") == ErrorCode::ConfigError);
  CHECK(code_of("{") == ErrorCode::ConfigError);
}

TEST_CASE("to_json round trip") {
  const auto c = parse_config(R"({"budget_seconds": 12.5, "seed": 3, "user_bans": ["BMT_PAD"],
    "coarse_grids": {"group": [32]}, "stop_at_floor": true, "dump_metadata": true})");
  const auto back = parse_config(to_json(c));
  CHECK(to_json(back) == to_json(c));
  CHECK(back.search.stop_at_floor);
  CHECK(back.search.user_bans.count(OperatorKind::BmtPad) == 1);
}
