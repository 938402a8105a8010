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

// Per-prompt response distributions, the closed-form KL-regularized optimum
// pi(y|x) = ref(y|x) exp(r(y,x)/beta) / Z(x), objective evaluation and the
// per-group alignment gap.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/synthpop.hpp"

namespace divpref {

class Policy {
 public:
  using Table = std::vector<std::vector<double>>;

  explicit Policy(Table table) : table_(std::move(table)) {
    if (table_.empty()) throw StructuralError("policy has no prompts");
    floor_ = std::numeric_limits<double>::infinity();
    for (const auto& row : table_) {
      if (row.empty()) throw StructuralError("policy row is empty");
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) {
          throw StructuralError("policy entries must be finite and nonnegative");
        }
        sum += p;
        floor_ = std::min(floor_, p);
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        throw StructuralError("policy row does not sum to 1");
      }
    }
  }

  static Policy uniform(const FeatureWorld& world) {
    Table t(world.num_prompts());
    for (std::size_t x = 0; x < t.size(); ++x) {
      const std::size_t n = world.num_responses(x);
      t[x].assign(n, 1.0 / static_cast<double>(n));
    }
    return Policy(std::move(t));
  }

  const Table& table() const { return table_; }
  const std::vector<double>& row(std::size_t x) const { return table_.at(x); }
  double prob(std::size_t x, std::size_t y) const { return table_.at(x).at(y); }
  std::size_t num_prompts() const { return table_.size(); }
  // Smallest entry over the whole table.
  double floor() const { return floor_; }

 private:
  Table table_;
  double floor_ = 0.0;
};

using RewardTable = std::vector<std::vector<double>>;

inline RewardTable reward_table(const RewardParams& params, const FeatureWorld& world) {
  RewardTable r(world.num_prompts());
  for (std::size_t x = 0; x < r.size(); ++x) {
    r[x].resize(world.num_responses(x));
    for (std::size_t y = 0; y < r[x].size(); ++y) {
      r[x][y] = linear_reward(params, world, x, y);
    }
  }
  return r;
}

inline void check_shape(const Policy& pi, const FeatureWorld& world) {
  if (pi.num_prompts() != world.num_prompts()) {
    throw DomainError("policy does not match the world's prompts");
  }
  for (std::size_t x = 0; x < world.num_prompts(); ++x) {
    if (pi.row(x).size() != world.num_responses(x)) {
      throw DomainError("policy row does not match the world's responses");
    }
  }
}

struct GibbsPolicy {
  Policy policy;
  std::vector<double> log_partition;  // log Z(x), per prompt

  double partition(std::size_t x) const { return std::exp(log_partition.at(x)); }
};

inline GibbsPolicy gibbs_from_rewards(const RewardTable& rewards, const Policy& ref,
                                      double beta) {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw DomainError("beta must be positive");
  if (!(ref.floor() > 0.0)) throw DomainError("reference policy must be strictly positive");
  if (rewards.size() != ref.num_prompts()) throw DomainError("reward table shape mismatch");
  Policy::Table t(rewards.size());
  std::vector<double> log_z(rewards.size());
  for (std::size_t x = 0; x < rewards.size(); ++x) {
    const auto& r = rewards[x];
    const auto& q = ref.row(x);
    if (r.size() != q.size()) throw DomainError("reward table shape mismatch");
    std::vector<double> logits(r.size());
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t y = 0; y < r.size(); ++y) {
      logits[y] = std::log(q[y]) + r[y] / beta;
      m = std::max(m, logits[y]);
    }
    double s = 0.0;
    for (double l : logits) s += std::exp(l - m);
    log_z[x] = m + std::log(s);
    t[x].resize(r.size());
    double row_sum = 0.0;
    for (std::size_t y = 0; y < r.size(); ++y) {
      t[x][y] = std::exp(logits[y] - log_z[x]);
      row_sum += t[x][y];
    }
    for (double& p : t[x]) p /= row_sum;
  }
  return {Policy(std::move(t)), std::move(log_z)};
}

inline GibbsPolicy gibbs_policy(const RewardParams& params, const Policy& ref,
                                double beta, const FeatureWorld& world) {
  check_shape(ref, world);
  return gibbs_from_rewards(reward_table(params, world), ref, beta);
}

// Prompt-weighted KL(pi || ref), natural log.
inline double mean_kl(const Policy& pi, const Policy& ref, const FeatureWorld& world) {
  double kl = 0.0;
  for (std::size_t x = 0; x < world.num_prompts(); ++x) {
    double row = 0.0;
    for (std::size_t y = 0; y < pi.row(x).size(); ++y) {
      const double p = pi.prob(x, y);
      if (p == 0.0) continue;
      const double q = ref.prob(x, y);
      if (q == 0.0) throw DomainError("policy puts mass where the reference has none");
      row += p * std::log(p / q);
    }
    kl += world.prompt_weight(x) * row;
  }
  return kl;
}

inline double expected_reward(const Policy& pi, const RewardTable& rewards,
                              const FeatureWorld& world) {
  double v = 0.0;
  for (std::size_t x = 0; x < world.num_prompts(); ++x) {
    double row = 0.0;
    for (std::size_t y = 0; y < pi.row(x).size(); ++y) row += pi.prob(x, y) * rewards[x][y];
    v += world.prompt_weight(x) * row;
  }
  return v;
}

struct ObjectiveValue {
  double value = 0.0;            // expected_reward - beta * kl
  double expected_reward = 0.0;
  double kl = 0.0;
};

inline ObjectiveValue regularized_objective(const Policy& pi, const RewardParams& params,
                                            const Policy& ref, double beta,
                                            const FeatureWorld& world) {
  check_shape(pi, world);
  check_shape(ref, world);
  ObjectiveValue out;
  out.expected_reward = expected_reward(pi, reward_table(params, world), world);
  out.kl = mean_kl(pi, ref, world);
  out.value = out.expected_reward - beta * out.kl;
  return out;
}

// F_u(pi_u*) - F_u(pi) for group u, pi_u* the group's own Gibbs optimum.
inline double align_gap(const Policy& pi, int u, const Population& pop,
                        const Policy& ref, double beta) {
  const RewardParams& phi_u = pop.group(u).phi_star;
  const Policy own = gibbs_policy(phi_u, ref, beta, pop.world()).policy;
  return regularized_objective(own, phi_u, ref, beta, pop.world()).value -
         regularized_objective(pi, phi_u, ref, beta, pop.world()).value;
}

// Largest per-prompt total variation between two policies.
inline double max_row_tv(const Policy& a, const Policy& b) {
  if (a.num_prompts() != b.num_prompts()) throw DomainError("policy shape mismatch");
  double worst = 0.0;
  for (std::size_t x = 0; x < a.num_prompts(); ++x) {
    if (a.row(x).size() != b.row(x).size()) throw DomainError("policy shape mismatch");
    double tv = 0.0;
    for (std::size_t y = 0; y < a.row(x).size(); ++y) tv += std::abs(a.prob(x, y) - b.prob(x, y));
    worst = std::max(worst, 0.5 * tv);
  }
  return worst;
}

}  // namespace divpref
