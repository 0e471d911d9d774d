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
#include <memory>
#include <vector>

namespace spmvd {

struct Sample {
  std::vector<double> features;
  double target = 0;
};

struct ForestOptions {
  std::size_t trees = 16;
  bool bootstrap = true;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 1;
};

/// Piecewise-constant regressor: regression trees grown by greedy variance
/// reduction, averaged over bootstrap resamples.
class Forest {
 public:
  double predict(const std::vector<double>& f) const;

  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0;
    double value = 0;
    int left = -1;
    int right = -1;
  };
  using Tree = std::vector<Node>;

  std::vector<Tree> trees;
};

/// Minimum number of samples for a tree model.
inline constexpr std::size_t kMinSurrogateSamples = 8;

/// Throws TooFewSamples below kMinSurrogateSamples.
Forest fit_forest(const std::vector<Sample>& samples, const ForestOptions& opt = {});

/// Forest when there are enough samples, otherwise nearest neighbour over the
/// samples. Predictions are clamped to [0, 1.5 * max target].
class Surrogate {
 public:
  double predict(const std::vector<double>& f) const;
  bool is_fallback() const { return !forest_; }

  friend Surrogate fit_surrogate(const std::vector<Sample>& samples, const ForestOptions& opt);

 private:
  std::shared_ptr<const Forest> forest_;
  std::vector<Sample> samples_;
  double max_target_ = 0;
};

Surrogate fit_surrogate(const std::vector<Sample>& samples, const ForestOptions& opt = {});

}  // namespace spmvd
