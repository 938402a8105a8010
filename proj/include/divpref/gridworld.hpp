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

// Deterministic tabular navigation with KL-regularized planning.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "divpref/error.hpp"
#include "divpref/random.hpp"
#include "divpref/simplex.hpp"

namespace divpref::grid {

using Cell = std::pair<int, int>;  // (row, col)

inline constexpr std::size_t kActions = 4;
using ActionRow = std::array<double, kActions>;

enum class Action : std::size_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr std::array<Cell, kActions> kMoves{{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

class GridSpec {
 public:
  GridSpec(int width, int height, std::set<Cell> walls, Cell start,
           std::set<Cell> terminals, double discount = 0.95, int max_horizon = 200)
      : width_(width),
        height_(height),
        walls_(std::move(walls)),
        start_(start),
        terminals_(std::move(terminals)),
        discount_(discount),
        max_horizon_(max_horizon) {
    if (width_ < 1 || height_ < 1) throw StructuralError("grid dimensions must be positive");
    if (!(discount_ > 0.0 && discount_ < 1.0)) {
      throw StructuralError("discount must lie in (0, 1)");
    }
    if (max_horizon_ < 1) throw StructuralError("max_horizon must be positive");
    for (const Cell& w : walls_) {
      if (!in_bounds(w)) throw StructuralError("wall outside the grid");
    }
    if (!in_bounds(start_) || walls_.count(start_)) {
      throw StructuralError("start must be an in-bounds floor cell");
    }
    for (const Cell& t : terminals_) {
      if (!in_bounds(t) || walls_.count(t)) {
        throw StructuralError("terminals must be in-bounds floor cells");
      }
    }
    index_.assign(static_cast<std::size_t>(width_ * height_), -1);
    for (int r = 0; r < height_; ++r) {
      for (int c = 0; c < width_; ++c) {
        if (walls_.count({r, c})) continue;
        index_[static_cast<std::size_t>(r * width_ + c)] = static_cast<int>(cells_.size());
        cells_.push_back({r, c});
      }
    }
    next_.resize(cells_.size());
    for (std::size_t s = 0; s < cells_.size(); ++s) {
      for (std::size_t a = 0; a < kActions; ++a) {
        const Cell to{cells_[s].first + kMoves[a].first, cells_[s].second + kMoves[a].second};
        next_[s][a] = (in_bounds(to) && !walls_.count(to)) ? state_of(to) : s;
      }
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  const std::set<Cell>& walls() const { return walls_; }
  const std::set<Cell>& terminals() const { return terminals_; }
  Cell start() const { return start_; }
  double discount() const { return discount_; }
  int max_horizon() const { return max_horizon_; }

  std::size_t num_states() const { return cells_.size(); }
  const Cell& cell_of(std::size_t s) const { return cells_.at(s); }
  std::size_t start_state() const { return state_of(start_); }
  bool is_terminal(std::size_t s) const { return terminals_.count(cells_.at(s)) > 0; }
  std::size_t next_state(std::size_t s, std::size_t a) const { return next_.at(s).at(a); }

  bool in_bounds(const Cell& c) const {
    return c.first >= 0 && c.first < height_ && c.second >= 0 && c.second < width_;
  }

  std::size_t state_of(const Cell& c) const {
    if (!in_bounds(c)) throw LookupError("cell outside the grid");
    const int s = index_[static_cast<std::size_t>(c.first * width_ + c.second)];
    if (s < 0) throw LookupError("cell is a wall");
    return static_cast<std::size_t>(s);
  }

 private:
  int width_;
  int height_;
  std::set<Cell> walls_;
  Cell start_;
  std::set<Cell> terminals_;
  double discount_;
  int max_horizon_;
  std::vector<int> index_;
  std::vector<Cell> cells_;
  std::vector<std::array<std::size_t, kActions>> next_;
};

struct GroupRewardGrid {
  int group_id = 0;
  std::vector<ActionRow> reward;  // indexed by state

  double r_max() const {
    double m = 0.0;
    for (const ActionRow& row : reward) {
      for (double v : row) m = std::max(m, std::abs(v));
    }
    return m;
  }
};

inline void check_reward(const GridSpec& grid, const GroupRewardGrid& r) {
  if (r.reward.size() != grid.num_states()) {
    throw StructuralError("reward table does not cover every state");
  }
  for (const ActionRow& row : r.reward) {
    for (double v : row) {
      if (!std::isfinite(v)) throw DomainError("rewards must be finite");
    }
  }
}

inline GroupRewardGrid zero_reward(const GridSpec& grid, int group_id = 0) {
  return {group_id, std::vector<ActionRow>(grid.num_states(), ActionRow{})};
}

// Reward `value` for every action taken in each of `cells`.
inline GroupRewardGrid cell_reward(const GridSpec& grid, int group_id,
                                   const std::set<Cell>& cells, double value) {
  GroupRewardGrid r = zero_reward(grid, group_id);
  for (const Cell& c : cells) r.reward[grid.state_of(c)].fill(value);
  return r;
}

inline constexpr ActionRow kUniformActions{0.25, 0.25, 0.25, 0.25};

inline void check_action_row(const ActionRow& row, bool strictly_positive) {
  double s = 0.0;
  for (double p : row) {
    if (!(strictly_positive ? p > 0.0 : p >= 0.0)) {
      throw DomainError("invalid action distribution entry");
    }
    s += p;
  }
  if (std::abs(s - 1.0) > 1e-12) throw DomainError("action distribution must sum to 1");
}

struct GridPolicyValue {
  std::vector<ActionRow> policy;
  std::vector<double> values;
  int sweeps = 0;
  std::vector<double> residuals;  // sup-norm change per sweep
};

namespace detail {

inline double soft_q(const GridSpec& grid, const GroupRewardGrid& r,
                     const std::vector<double>& v, std::size_t s, std::size_t a) {
  const double q = r.reward[s][a];
  return grid.is_terminal(s) ? q : q + grid.discount() * v[grid.next_state(s, a)];
}

}  // namespace detail

// Terminal states end the episode after their action, so their backup has no
// continuation term.
//   V(s) = beta log sum_a ref(a) exp((r(s,a) + gamma V(s'(s,a))) / beta)
inline GridPolicyValue soft_value_iteration(const GridSpec& grid,
                                            const GroupRewardGrid& reward, double beta,
                                            const ActionRow& ref = kUniformActions,
                                            double tol = 1e-10, int max_sweeps = 100000) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  check_reward(grid, reward);
  check_action_row(ref, true);
  const std::size_t n = grid.num_states();
  GridPolicyValue out;
  out.values.assign(n, 0.0);
  std::vector<double> next(n);
  auto backup = [&](std::size_t s, const std::vector<double>& v, ActionRow* pi) {
    ActionRow logits{};
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < kActions; ++a) {
      logits[a] = std::log(ref[a]) + detail::soft_q(grid, reward, v, s, a) / beta;
      top = std::max(top, logits[a]);
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l - top);
    if (pi) {
      for (std::size_t a = 0; a < kActions; ++a) (*pi)[a] = std::exp(logits[a] - top) / z;
    }
    return beta * (top + std::log(z));
  };
  bool converged = false;
  for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
    double delta = 0.0;
    for (std::size_t s = 0; s < n; ++s) {
      next[s] = backup(s, out.values, nullptr);
      delta = std::max(delta, std::abs(next[s] - out.values[s]));
    }
    out.values.swap(next);
    out.residuals.push_back(delta);
    if (delta <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw NonConvergenceError("soft value iteration did not reach tol", out.values,
                              out.residuals.back());
  }
  out.policy.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    backup(s, out.values, &out.policy[s]);
    double sum = 0.0;
    for (double p : out.policy[s]) sum += p;
    for (double& p : out.policy[s]) p /= sum;
  }
  return out;
}

inline GroupRewardGrid weighted_reward(const GridSpec& grid,
                                       const std::vector<GroupRewardGrid>& rewards,
                                       const std::vector<double>& lambda) {
  GroupRewardGrid mix = zero_reward(grid, -1);
  for (std::size_t u = 0; u < rewards.size(); ++u) {
    for (std::size_t s = 0; s < grid.num_states(); ++s) {
      for (std::size_t a = 0; a < kActions; ++a) {
        mix.reward[s][a] += lambda[u] * rewards[u].reward[s][a];
      }
    }
  }
  return mix;
}

// Discounted return from every state, by a linear solve of
//   V = r_pi - kl_weight * KL(pi(.|s) || ref) + gamma P_pi V.
inline std::vector<double> evaluate_all(const GridSpec& grid,
                                        const std::vector<ActionRow>& policy,
                                        const GroupRewardGrid& reward, double kl_weight = 0.0,
                                        const ActionRow& ref = kUniformActions) {
  check_reward(grid, reward);
  const std::size_t n = grid.num_states();
  if (policy.size() != n) throw StructuralError("policy does not cover every state");
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(ni, ni);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(ni);
  for (std::size_t s = 0; s < n; ++s) {
    check_action_row(policy[s], false);
    const auto si = static_cast<Eigen::Index>(s);
    for (std::size_t k = 0; k < kActions; ++k) {
      const double p = policy[s][k];
      if (p == 0.0) continue;
      b[si] += p * reward.reward[s][k];
      if (kl_weight != 0.0) b[si] -= kl_weight * p * std::log(p / ref[k]);
      if (!grid.is_terminal(s)) {
        a(si, static_cast<Eigen::Index>(grid.next_state(s, k))) -= grid.discount() * p;
      }
    }
  }
  const Eigen::VectorXd v = a.partialPivLu().solve(b);
  return {v.data(), v.data() + v.size()};
}

// Exact expected discounted reward from the start state.
inline double evaluate_policy(const GridSpec& grid, const std::vector<ActionRow>& policy,
                              const GroupRewardGrid& reward) {
  return evaluate_all(grid, policy, reward)[grid.start_state()];
}

// Regularized return from the start state: reward minus beta times the
// discounted per-step KL to ref.
inline double evaluate_regularized(const GridSpec& grid, const std::vector<ActionRow>& policy,
                                   const GroupRewardGrid& reward, double beta,
                                   const ActionRow& ref = kUniformActions) {
  return evaluate_all(grid, policy, reward, beta, ref)[grid.start_state()];
}

struct GridMaxMinResult {
  std::vector<double> lambda;
  GridPolicyValue solution;
  double dual_value = 0.0;
  std::vector<double> group_returns;  // regularized, from start
  double min_return = 0.0;
  double certificate_gap = 0.0;       // dual_value - min_return
  int steps = 0;
};

// Minimizes D(lambda) = V_lambda(start) over the group simplex, where V_lambda
// is the soft value under the lambda-weighted reward. The envelope gradient is
// the regularized group return of the lambda-optimal policy. Stops once
// D(lambda) - min_u return_u(pi_lambda) <= tol.
inline GridMaxMinResult grid_maxmin(const GridSpec& grid,
                                    const std::vector<GroupRewardGrid>& rewards, double beta,
                                    double tol = 1e-6, const ActionRow& ref = kUniformActions,
                                    int max_steps = 5000) {
  if (rewards.empty()) throw DomainError("grid_maxmin needs at least one group");
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  const std::size_t k = rewards.size();
  const double vi_tol = std::min(1e-10, tol * (1.0 - grid.discount()) * 1e-2);

  struct Eval {
    GridPolicyValue solution;
    std::vector<double> returns;
  };
  std::map<std::vector<double>, Eval> cache;
  auto evaluate = [&](const std::vector<double>& lambda) -> const Eval& {
    auto it = cache.find(lambda);
    if (it != cache.end()) return it->second;
    Eval e;
    e.solution = soft_value_iteration(grid, weighted_reward(grid, rewards, lambda), beta, ref,
                                      vi_tol);
    for (const GroupRewardGrid& r : rewards) {
      e.returns.push_back(evaluate_regularized(grid, e.solution.policy, r, beta, ref));
    }
    if (cache.size() > 64) cache.clear();
    return cache.emplace(lambda, std::move(e)).first->second;
  };
  auto oracle = [&](const std::vector<double>& lambda) {
    const Eval& e = evaluate(lambda);
    return SimplexOracleValue{e.solution.values[grid.start_state()], e.returns};
  };
  double last_gap = std::numeric_limits<double>::infinity();
  auto done = [&](const std::vector<double>& lambda, const SimplexOracleValue& at) {
    const Eval& e = evaluate(lambda);
    last_gap = at.value - *std::min_element(e.returns.begin(), e.returns.end());
    return last_gap <= tol;
  };

  double range = 0.0;
  for (const GroupRewardGrid& r : rewards) range = std::max(range, r.r_max());
  const double horizon = 1.0 / (1.0 - grid.discount());
  const double initial_step = range > 0.0 ? beta / (range * range * horizon * horizon) : 1.0;
  const SimplexMinimum m =
      minimize_on_simplex(oracle, std::vector<double>(k, 1.0 / static_cast<double>(k)),
                          max_steps, initial_step, done);
  if (!m.converged) {
    throw NonConvergenceError("grid_maxmin certificate gap above tol", m.point, last_gap);
  }
  const Eval& e = evaluate(m.point);
  GridMaxMinResult out;
  out.lambda = m.point;
  out.solution = e.solution;
  out.dual_value = m.at.value;
  out.group_returns = e.returns;
  out.min_return = *std::min_element(e.returns.begin(), e.returns.end());
  out.certificate_gap = out.dual_value - out.min_return;
  out.steps = m.steps;
  return out;
}

// Samples actions from `policy` starting at the start cell until a terminal
// cell has been entered or `max_steps` moves were made.
inline std::vector<Cell> rollout(const GridSpec& grid, const std::vector<ActionRow>& policy,
                                 std::uint64_t seed, int max_steps) {
  if (policy.size() != grid.num_states()) {
    throw StructuralError("policy does not cover every state");
  }
  for (const ActionRow& row : policy) check_action_row(row, false);
  std::mt19937_64 rng = substream(seed, "rollout");
  std::size_t s = grid.start_state();
  std::vector<Cell> path{grid.cell_of(s)};
  for (int t = 0; t < max_steps && !grid.is_terminal(s); ++t) {
    std::discrete_distribution<std::size_t> pick(policy[s].begin(), policy[s].end());
    s = grid.next_state(s, pick(rng));
    path.push_back(grid.cell_of(s));
  }
  return path;
}

}  // namespace divpref::grid
