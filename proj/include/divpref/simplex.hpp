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

// Euclidean projection onto the probability simplex and a projected-gradient
// minimizer with backtracking, shared by the bandit and gridworld max-min duals.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <utility>
#include <vector>

#include "divpref/error.hpp"

namespace divpref {

// Sort-based projection (Held, Wolfe & Crowder).
inline std::vector<double> project_to_simplex(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("cannot project an empty vector");
  std::vector<double> u = v;
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumulative = 0.0;
  double theta = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    cumulative += u[i];
    const double t = (cumulative - 1.0) / static_cast<double>(i + 1);
    if (u[i] - t > 0.0) theta = t;
  }
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::max(v[i] - theta, 0.0);
  const double s = std::accumulate(out.begin(), out.end(), 0.0);
  for (double& x : out) x /= s;
  return out;
}

struct SimplexOracleValue {
  double value = 0.0;
  std::vector<double> gradient;
};

struct SimplexMinimum {
  std::vector<double> point;
  SimplexOracleValue at;
  int steps = 0;
  bool converged = false;
};

// Projected gradient descent on the simplex. The step size is found by
// backtracking on the quadratic upper-bound test
//   f(x+) <= f(x) + <g, x+ - x> + |x+ - x|^2 / (2 step)
// and doubled after every accepted step. `done(point, value)` is checked
// before each step and ends the run successfully.
template <class Oracle, class Done>
SimplexMinimum minimize_on_simplex(Oracle&& oracle, std::vector<double> start,
                                   int max_steps, double initial_step, Done&& done) {
  SimplexMinimum m;
  m.point = project_to_simplex(start);
  m.at = oracle(m.point);
  double step = initial_step;
  for (m.steps = 0; m.steps < max_steps; ++m.steps) {
    if (done(m.point, m.at)) {
      m.converged = true;
      return m;
    }
    bool moved = false;
    for (int halving = 0; halving < 80; ++halving, step *= 0.5) {
      std::vector<double> trial(m.point.size());
      for (std::size_t i = 0; i < trial.size(); ++i) {
        trial[i] = m.point[i] - step * m.at.gradient[i];
      }
      trial = project_to_simplex(trial);
      double lin = 0.0;
      double sq = 0.0;
      for (std::size_t i = 0; i < trial.size(); ++i) {
        const double d = trial[i] - m.point[i];
        lin += m.at.gradient[i] * d;
        sq += d * d;
      }
      if (sq == 0.0) break;  // projected gradient vanishes: stationary
      SimplexOracleValue next = oracle(trial);
      if (next.value <= m.at.value + lin + sq / (2.0 * step)) {
        m.point = std::move(trial);
        m.at = std::move(next);
        moved = true;
        break;
      }
    }
    if (!moved) {
      m.converged = done(m.point, m.at);
      return m;
    }
    step *= 2.0;
  }
  m.converged = done(m.point, m.at);
  return m;
}

}  // namespace divpref
