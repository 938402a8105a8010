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

// Max-min (egalitarian) alignment
//   max_pi  min_u E_pi[r_u] - beta KL(pi || ref)
// solved two ways: a mirror-ascent iteration that follows the min-utility
// group (Algorithm-1 style), and the exact convex dual over group weights.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/policy.hpp"
#include "divpref/simplex.hpp"
#include "divpref/synthpop.hpp"

namespace divpref {

enum class MaxMinMode { Iterate, Dual, Both };

struct MaxMinConfig {
  int steps = 20000;
  double step_size0 = 1.0;
  double tol = 1e-6;
  MaxMinMode mode = MaxMinMode::Both;

  void validate() const {
    if (steps < 1) throw DomainError("maxmin steps must be at least 1");
    if (!(step_size0 >= 0.0)) throw DomainError("step_size0 must be nonnegative");
    if (!(tol > 0.0)) throw DomainError("maxmin tol must be positive");
  }
};

struct MaxMinTraceEntry {
  int group = 0;             // argmin group at this step
  double objective = 0.0;    // G(pi_t)
  double group_reward = 0.0; // E_pi_t[r_group], no KL term
  double kl = 0.0;
  double step_size = 0.0;    // iterate: alpha_t actually used
  std::optional<double> dual_value;
  int rejected_steps = 0;
};

struct MaxMinResult {
  Policy policy;
  std::optional<std::vector<double>> lambda;
  double objective = 0.0;
  int group = 0;
  std::vector<MaxMinTraceEntry> trace;
  std::optional<double> duality_gap;
  std::optional<double> iterate_objective;  // set in Both mode
};

struct GroupObjective {
  int group = 0;
  double value = 0.0;
  double kl = 0.0;
  std::vector<double> group_rewards;
};

inline std::vector<RewardTable> group_reward_tables(const Population& pop) {
  std::vector<RewardTable> out;
  for (const GroupSpec& g : pop.groups()) out.push_back(reward_table(g.phi_star, pop.world()));
  return out;
}

namespace detail {

inline GroupObjective min_group(const Policy& pi, const std::vector<RewardTable>& rewards,
                                const Policy& ref, double beta, const FeatureWorld& world) {
  GroupObjective out;
  out.kl = mean_kl(pi, ref, world);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < rewards.size(); ++u) {
    const double v = expected_reward(pi, rewards[u], world);
    out.group_rewards.push_back(v);
    if (v < best) {
      best = v;
      out.group = static_cast<int>(u);
    }
  }
  out.value = best - beta * out.kl;
  return out;
}

}  // namespace detail

// G(pi) = min_u E_pi[r_u] - beta KL(pi || ref); the KL is subtracted once,
// outside the minimum. Ties go to the lowest group id.
inline GroupObjective min_group_objective(const Policy& pi, const Population& pop,
                                          const Policy& ref, double beta) {
  check_shape(pi, pop.world());
  check_shape(ref, pop.world());
  return detail::min_group(pi, group_reward_tables(pop), ref, beta, pop.world());
}

// Starting from ref, each step picks the min-utility group u and applies
//   pi(y|x) <- pi(y|x) exp(alpha_t [r_u(y,x) - beta log(pi(y|x)/ref(y|x))]) / Z
// with alpha_t = step_size0 / sqrt(t + 1). Returns the best iterate seen.
inline MaxMinResult maxmin_iterate(const Population& pop, const Policy& ref,
                                   double beta, const MaxMinConfig& config) {
  config.validate();
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (!(ref.floor() > 0.0)) throw DomainError("reference policy must be strictly positive");
  const FeatureWorld& world = pop.world();
  check_shape(ref, world);
  const std::vector<RewardTable> rewards = group_reward_tables(pop);

  Policy::Table current = ref.table();
  std::vector<MaxMinTraceEntry> trace;
  Policy::Table best_table = current;
  double best_value = -std::numeric_limits<double>::infinity();

  for (int t = 0; t <= config.steps; ++t) {
    const Policy pi(current);
    const GroupObjective g = detail::min_group(pi, rewards, ref, beta, world);
    if (g.value > best_value) {
      best_value = g.value;
      best_table = current;
    }
    if (t == config.steps) break;

    MaxMinTraceEntry entry;
    entry.group = g.group;
    entry.objective = g.value;
    entry.group_reward = g.group_rewards[static_cast<std::size_t>(g.group)];
    entry.kl = g.kl;
    double alpha = config.step_size0 / std::sqrt(static_cast<double>(t) + 1.0);
    const RewardTable& r = rewards[static_cast<std::size_t>(g.group)];
    Policy::Table next(current.size());
    for (;;) {
      bool finite = true;
      for (std::size_t x = 0; x < current.size() && finite; ++x) {
        const auto& p = current[x];
        std::vector<double> logits(p.size());
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t y = 0; y < p.size(); ++y) {
          const double log_ratio = std::log(p[y]) - std::log(ref.prob(x, y));
          logits[y] = std::log(p[y]) + alpha * (r[x][y] - beta * log_ratio);
          m = std::max(m, logits[y]);
        }
        double s = 0.0;
        for (double l : logits) s += std::exp(l - m);
        next[x].resize(p.size());
        double row = 0.0;
        for (std::size_t y = 0; y < p.size(); ++y) {
          next[x][y] = std::exp(logits[y] - m) / s;
          if (!std::isfinite(next[x][y]) || !(next[x][y] > 0.0)) finite = false;
          row += next[x][y];
        }
        for (double& v : next[x]) v /= row;
        if (!std::isfinite(m)) finite = false;
      }
      if (finite) break;
      // Underflow to an exact zero would freeze log(pi); halve and retry.
      alpha *= 0.5;
      ++entry.rejected_steps;
      if (entry.rejected_steps > 200) {
        throw NonConvergenceError("maxmin_iterate step could not be stabilized", {}, alpha);
      }
    }
    entry.step_size = alpha;
    trace.push_back(entry);
    current = std::move(next);
  }

  Policy best(best_table);
  const GroupObjective final_g = detail::min_group(best, rewards, ref, beta, world);
  return MaxMinResult{std::move(best), std::nullopt, final_g.value, final_g.group,
                      std::move(trace), std::nullopt, std::nullopt};
}

// Minimizes the dual D(lambda) = beta E_x log sum_y ref exp(sum_u lambda_u r_u / beta)
// over the group simplex. dD/dlambda_u = E_{pi_lambda}[r_u]. Stops once the
// duality gap D(lambda) - G(pi_lambda) is at most config.tol.
inline MaxMinResult maxmin_dual(const Population& pop, const Policy& ref, double beta,
                                const MaxMinConfig& config) {
  config.validate();
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  const FeatureWorld& world = pop.world();
  check_shape(ref, world);
  const std::vector<RewardTable> rewards = group_reward_tables(pop);
  const std::size_t k = rewards.size();

  auto mix = [&](const std::vector<double>& lambda) {
    Vector phi = Vector::Zero(world.dim());
    for (std::size_t u = 0; u < k; ++u) phi += lambda[u] * pop.groups()[u].phi_star.phi;
    return RewardParams(phi);
  };
  auto oracle = [&](const std::vector<double>& lambda) {
    const GibbsPolicy gp = gibbs_policy(mix(lambda), ref, beta, world);
    SimplexOracleValue out;
    for (std::size_t x = 0; x < world.num_prompts(); ++x) {
      out.value += world.prompt_weight(x) * beta * gp.log_partition[x];
    }
    for (std::size_t u = 0; u < k; ++u) {
      out.gradient.push_back(expected_reward(gp.policy, rewards[u], world));
    }
    return out;
  };

  std::vector<MaxMinTraceEntry> trace;
  double last_gap = std::numeric_limits<double>::infinity();
  auto done = [&](const std::vector<double>& lambda, const SimplexOracleValue& at) {
    const Policy pi = gibbs_policy(mix(lambda), ref, beta, world).policy;
    const GroupObjective g = detail::min_group(pi, rewards, ref, beta, world);
    last_gap = at.value - g.value;
    MaxMinTraceEntry e;
    e.group = g.group;
    e.objective = g.value;
    e.group_reward = g.group_rewards[static_cast<std::size_t>(g.group)];
    e.kl = g.kl;
    e.dual_value = at.value;
    trace.push_back(e);
    return last_gap <= config.tol;
  };

  double reward_range = 0.0;
  for (const RewardTable& table : rewards) {
    for (const auto& row : table) {
      const auto [lo, hi] = std::minmax_element(row.begin(), row.end());
      reward_range = std::max(reward_range, *hi - *lo);
    }
  }
  const double initial_step = reward_range > 0.0 ? 4.0 * beta / (reward_range * reward_range) : 1.0;

  const SimplexMinimum m = minimize_on_simplex(
      oracle, std::vector<double>(k, 1.0 / static_cast<double>(k)), config.steps,
      initial_step, done);
  if (!m.converged) {
    throw NonConvergenceError(
        "maxmin_dual duality gap " + std::to_string(last_gap) + " above tol", m.point,
        last_gap);
  }
  Policy pi = gibbs_policy(mix(m.point), ref, beta, world).policy;
  const GroupObjective g = detail::min_group(pi, rewards, ref, beta, world);
  return MaxMinResult{std::move(pi), m.point, g.value, g.group,
                      std::move(trace), m.at.value - g.value, std::nullopt};
}

inline MaxMinResult maxmin_solve(const Population& pop, const Policy& ref, double beta,
                                 const MaxMinConfig& config) {
  switch (config.mode) {
    case MaxMinMode::Iterate:
      return maxmin_iterate(pop, ref, beta, config);
    case MaxMinMode::Dual:
      return maxmin_dual(pop, ref, beta, config);
    case MaxMinMode::Both: {
      MaxMinResult dual = maxmin_dual(pop, ref, beta, config);
      dual.iterate_objective = maxmin_iterate(pop, ref, beta, config).objective;
      return dual;
    }
  }
  throw DomainError("unknown maxmin mode");
}

}  // namespace divpref
