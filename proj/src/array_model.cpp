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

#include "spmvd/array_model.hpp"

#include <array>
#include <vector>

namespace spmvd {

namespace {

constexpr std::array<std::int64_t, 12> kPeriods{2, 4, 8, 16, 32, 64, 96, 128, 160, 192, 224, 256};

std::int64_t base_eval(const ArrayModel& m, std::int64_t i) {
  switch (m.kind) {
    case ModelKind::Linear: return m.b + m.k * i;
    case ModelKind::PeriodicLinear: return m.b + m.k * (i % m.period);
    case ModelKind::Step: return m.b + m.k * (i / m.period);
  }
  return 0;
}

// Fills patches; gives up once the budget is exceeded.
bool patch_against(ArrayModel& m, std::span<const std::int64_t> a, std::size_t budget) {
  m.patches.clear();
  m.length = static_cast<std::int64_t>(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto idx = static_cast<std::int64_t>(i);
    if (base_eval(m, idx) == a[i]) continue;
    if (m.patches.size() == budget) return false;
    m.patches[idx] = a[i];
  }
  return true;
}

}  // namespace

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Linear: return "linear";
    case ModelKind::PeriodicLinear: return "periodic_linear";
    case ModelKind::Step: return "step";
  }
  return "?";
}

std::optional<ModelKind> model_kind_from_string(std::string_view s) {
  for (auto k : {ModelKind::Linear, ModelKind::PeriodicLinear, ModelKind::Step}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

std::int64_t ArrayModel::eval(std::int64_t i) const {
  if (auto it = patches.find(i); it != patches.end()) return it->second;
  return base_eval(*this, i);
}

std::string ArrayModel::expression(const std::string& var) const {
  const bool simple = var.find_first_not_of("abcdefghijklmnopqrstuvwxyz_0123456789") == std::string::npos;
  const std::string v = simple ? var : "(" + var + ")";
  std::string idx = v;
  if (kind == ModelKind::PeriodicLinear) idx = "(" + v + "%" + std::to_string(period) + ")";
  if (kind == ModelKind::Step) idx = "(" + v + "/" + std::to_string(period) + ")";
  std::string out;
  if (k != 0) out = (k == 1 ? "" : std::to_string(k) + "*") + idx;
  if (b != 0 || out.empty()) {
    if (out.empty()) {
      out = std::to_string(b);
    } else {
      out += b < 0 ? " - " + std::to_string(-b) : " + " + std::to_string(b);
    }
  }
  return out;
}

std::span<const std::int64_t> model_periods() { return kPeriods; }

std::optional<ArrayModel> fit_array_model(std::span<const std::int64_t> a, std::size_t patch_budget) {
  if (a.size() < 2) return std::nullopt;
  const auto n = static_cast<std::int64_t>(a.size());
  std::vector<ArrayModel> candidates;

  // Linear: slope proposed from a few leading pairs so one early outlier still fits.
  for (auto [i, j] : {std::pair<std::int64_t, std::int64_t>{0, 1}, {1, 2}, {0, 2}}) {
    if (j >= n) continue;
    const auto di = a[static_cast<std::size_t>(j)] - a[static_cast<std::size_t>(i)];
    if (di % (j - i) != 0) continue;
    ArrayModel m;
    m.kind = ModelKind::Linear;
    m.k = di / (j - i);
    m.b = a[static_cast<std::size_t>(i)] - m.k * i;
    candidates.push_back(m);
  }
  for (auto p : kPeriods) {
    if (p >= n) break;
    ArrayModel m;
    m.kind = ModelKind::PeriodicLinear;
    m.period = p;
    m.b = a[0];
    m.k = a[1] - a[0];
    candidates.push_back(m);
  }
  // Step: the run length of the leading value is the natural period guess.
  std::vector<std::int64_t> step_periods(kPeriods.begin(), kPeriods.end());
  std::int64_t run = 1;
  while (run < n && a[static_cast<std::size_t>(run)] == a[0]) ++run;
  if (run > 1) step_periods.insert(step_periods.begin(), run);
  for (auto p : step_periods) {
    if (p >= n) continue;
    ArrayModel m;
    m.kind = ModelKind::Step;
    m.period = p;
    m.b = a[0];
    m.k = a[static_cast<std::size_t>(p)] - a[0];
    candidates.push_back(m);
  }

  std::optional<ArrayModel> best;
  for (auto& m : candidates) {
    const auto limit = best ? std::min(patch_budget, best->patches.size()) : patch_budget;
    if (!patch_against(m, a, limit)) continue;
    if (!best || m.patches.size() < best->patches.size()) best = m;
  }
  return best;
}

}  // namespace spmvd
