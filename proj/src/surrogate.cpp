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

#include "spmvd/surrogate.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

#include "spmvd/error.hpp"

namespace spmvd {

namespace {

double mean_of(const std::vector<const Sample*>& s) {
  double sum = 0;
  for (auto* p : s) sum += p->target;
  return s.empty() ? 0.0 : sum / static_cast<double>(s.size());
}

int grow(Forest::Tree& tree, std::vector<const Sample*> s, std::size_t min_leaf) {
  const int id = static_cast<int>(tree.size());
  tree.push_back({});
  tree[static_cast<std::size_t>(id)].value = mean_of(s);
  if (s.size() < 2 * min_leaf) return id;

  const std::size_t nf = s.front()->features.size();
  double best_gain = 0;
  int best_f = -1;
  double best_thr = 0;
  double total = 0, total_sq = 0;
  for (auto* p : s) {
    total += p->target;
    total_sq += p->target * p->target;
  }
  const double n = static_cast<double>(s.size());
  const double parent_sse = total_sq - total * total / n;
  for (std::size_t f = 0; f < nf; ++f) {
    std::sort(s.begin(), s.end(), [f](auto* a, auto* b) { return a->features[f] < b->features[f]; });
    double ls = 0, lsq = 0;
    for (std::size_t i = 0; i + 1 < s.size(); ++i) {
      ls += s[i]->target;
      lsq += s[i]->target * s[i]->target;
      const auto left_n = static_cast<double>(i + 1);
      if (i + 1 < min_leaf || s.size() - i - 1 < min_leaf) continue;
      if (s[i]->features[f] == s[i + 1]->features[f]) continue;
      const double rs = total - ls, rsq = total_sq - lsq;
      const double sse = (lsq - ls * ls / left_n) + (rsq - rs * rs / (n - left_n));
      const double gain = parent_sse - sse;
      if (gain > best_gain + 1e-12) {
        best_gain = gain;
        best_f = static_cast<int>(f);
        best_thr = 0.5 * (s[i]->features[f] + s[i + 1]->features[f]);
      }
    }
  }
  if (best_f < 0) return id;
  std::vector<const Sample*> l, r;
  for (auto* p : s) (p->features[static_cast<std::size_t>(best_f)] <= best_thr ? l : r).push_back(p);
  const int li = grow(tree, std::move(l), min_leaf);
  const int ri = grow(tree, std::move(r), min_leaf);
  auto& node = tree[static_cast<std::size_t>(id)];
  node.feature = best_f;
  node.threshold = best_thr;
  node.left = li;
  node.right = ri;
  return id;
}

double eval_tree(const Forest::Tree& t, const std::vector<double>& f) {
  std::size_t i = 0;
  while (t[i].feature >= 0) {
    i = static_cast<std::size_t>(f[static_cast<std::size_t>(t[i].feature)] <= t[i].threshold ? t[i].left : t[i].right);
  }
  return t[i].value;
}

}  // namespace

double Forest::predict(const std::vector<double>& f) const {
  if (trees.empty()) return 0.0;
  double sum = 0;
  for (const auto& t : trees) sum += eval_tree(t, f);
  return sum / static_cast<double>(trees.size());
}

Forest fit_forest(const std::vector<Sample>& samples, const ForestOptions& opt) {
  if (samples.size() < kMinSurrogateSamples) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(samples.size()) + " samples, need " +
                                              std::to_string(kMinSurrogateSamples));
  }
  Forest forest;
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, samples.size() - 1);
  const std::size_t count = std::max<std::size_t>(1, opt.trees);
  for (std::size_t t = 0; t < count; ++t) {
    std::vector<const Sample*> s;
    s.reserve(samples.size());
    if (opt.bootstrap) {
      for (std::size_t i = 0; i < samples.size(); ++i) s.push_back(&samples[pick(rng)]);
    } else {
      for (const auto& x : samples) s.push_back(&x);
    }
    Forest::Tree tree;
    grow(tree, std::move(s), std::max<std::size_t>(1, opt.min_leaf));
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

double Surrogate::predict(const std::vector<double>& f) const {
  double v = 0;
  if (forest_) {
    v = forest_->predict(f);
  } else {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : samples_) {
      double d = 0;
      for (std::size_t i = 0; i < f.size() && i < s.features.size(); ++i) {
        d += (f[i] - s.features[i]) * (f[i] - s.features[i]);
      }
      if (d < best) {
        best = d;
        v = s.target;
      }
    }
  }
  return std::clamp(v, 0.0, 1.5 * max_target_);
}

Surrogate fit_surrogate(const std::vector<Sample>& samples, const ForestOptions& opt) {
  Surrogate s;
  for (const auto& x : samples) s.max_target_ = std::max(s.max_target_, x.target);
  try {
    s.forest_ = std::make_shared<const Forest>(fit_forest(samples, opt));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TooFewSamples) throw;
    s.samples_ = samples;
  }
  return s;
}

}  // namespace spmvd
