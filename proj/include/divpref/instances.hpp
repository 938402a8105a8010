// Copyright 2026 The divpref Authors.
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

// Seeded instance generators.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "divpref/core.hpp"
#include "divpref/random.hpp"
#include "divpref/synthpop.hpp"

namespace divpref {

// One prompt, responses y0 = (1, 0) and y1 = (0, 1); group A (id 0) rewards
// y0 with eta 0.8 and group B (id 1) rewards y1 with eta 0.2.
inline Population two_arm_population(int annotators_per_group = 30) {
  Vector y0(2), y1(2), a(2), b(2);
  y0 << 1.0, 0.0;
  y1 << 0.0, 1.0;
  a << 1.0, 0.0;
  b << 0.0, 1.0;
  FeatureWorld world(2, {Prompt{"x0", 1.0, {{"y0", y0}, {"y1", y1}}}});
  return Population(std::move(world),
                    {{0, RewardParams(a), 0.8, annotators_per_group},
                     {1, RewardParams(b), 0.2, annotators_per_group}});
}

// Responses spread over the quarter circle of unit features, each prompt
// rotated by `twist` radians relative to the previous one.
inline FeatureWorld arc_world(int prompts = 4, int responses = 4, double twist = 0.1) {
  std::vector<Prompt> ps;
  for (int x = 0; x < prompts; ++x) {
    Prompt p{"x" + std::to_string(x), 0.0, {}};
    for (int y = 0; y < responses; ++y) {
      const double angle = 0.5 * std::numbers::pi * y / (responses - 1) + twist * x;
      Vector f(2);
      f << std::cos(angle), std::sin(angle);
      p.responses.push_back({"y" + std::to_string(y), f});
    }
    ps.push_back(std::move(p));
  }
  return FeatureWorld::with_uniform_weights(2, std::move(ps));
}

struct InstanceShape {
  int min_dim = 2, max_dim = 4;
  int min_groups = 2, max_groups = 3;
  int min_prompts = 1, max_prompts = 3;
  int min_responses = 2, max_responses = 4;
  double feature_range = 1.0;
  double param_range = 2.0;
  int annotators_per_group = 10;
};

// Features uniform in [-feature_range, feature_range], group parameters
// uniform in [-param_range, param_range], prompt weights uniform, and etas
// drawn uniform in (0.05, 1) and normalized.
inline Population random_population(std::uint64_t seed, std::uint64_t index,
                                    const InstanceShape& shape = {}) {
  std::mt19937_64 rng = substream(seed, "instance", index);
  auto uniform_int = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  const int d = uniform_int(shape.min_dim, shape.max_dim);
  const int k = uniform_int(shape.min_groups, shape.max_groups);
  const int prompts = uniform_int(shape.min_prompts, shape.max_prompts);
  std::uniform_real_distribution<double> feature(-shape.feature_range, shape.feature_range);
  std::uniform_real_distribution<double> param(-shape.param_range, shape.param_range);
  std::uniform_real_distribution<double> eta(0.05, 1.0);

  std::vector<Prompt> ps;
  for (int x = 0; x < prompts; ++x) {
    Prompt p{"x" + std::to_string(x), 0.0, {}};
    const int n = uniform_int(shape.min_responses, shape.max_responses);
    for (int y = 0; y < n; ++y) {
      Vector f(d);
      for (int i = 0; i < d; ++i) f[i] = feature(rng);
      p.responses.push_back({"y" + std::to_string(y), f});
    }
    ps.push_back(std::move(p));
  }
  FeatureWorld world = FeatureWorld::with_uniform_weights(d, std::move(ps));

  std::vector<double> etas(static_cast<std::size_t>(k));
  double eta_sum = 0.0;
  for (double& e : etas) eta_sum += (e = eta(rng));
  std::vector<GroupSpec> groups;
  double assigned = 0.0;
  for (int u = 0; u < k; ++u) {
    Vector phi(d);
    for (int i = 0; i < d; ++i) phi[i] = param(rng);
    const double w = (u + 1 == k) ? 1.0 - assigned : etas[u] / eta_sum;
    assigned += w;
    groups.push_back({u, RewardParams(phi), w, shape.annotators_per_group});
  }
  return Population(std::move(world), std::move(groups));
}

}  // namespace divpref
