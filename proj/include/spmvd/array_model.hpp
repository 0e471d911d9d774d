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
#include <optional>
#include <span>
#include <string>

namespace spmvd {

enum class ModelKind { Linear, PeriodicLinear, Step };

std::string_view to_string(ModelKind k);
std::optional<ModelKind> model_kind_from_string(std::string_view s);

/// Closed form for an integer array:
///   Linear          b + k*i
///   PeriodicLinear  b + k*(i mod period)
///   Step            b + k*(i / period)
/// `patches` override single indices where the form is off.
struct ArrayModel {
  ModelKind kind = ModelKind::Linear;
  std::int64_t k = 0;
  std::int64_t b = 0;
  std::int64_t period = 1;
  std::int64_t length = 0;
  std::map<std::int64_t, std::int64_t> patches;

  std::int64_t eval(std::int64_t i) const;
  /// Expression text such as "64*i" or "3*(i%32) + 1".
  std::string expression(const std::string& var) const;

  friend bool operator==(const ArrayModel&, const ArrayModel&) = default;
};

inline constexpr std::size_t kDefaultPatchBudget = 8;

/// Periods tried for periodic_linear and step forms.
std::span<const std::int64_t> model_periods();

/// Exact fit with at most `patch_budget` patches, or nullopt. Fewest patches
/// wins; ties go to linear, then periodic_linear, then step.
std::optional<ArrayModel> fit_array_model(std::span<const std::int64_t> a,
                                          std::size_t patch_budget = kDefaultPatchBudget);

}  // namespace spmvd
