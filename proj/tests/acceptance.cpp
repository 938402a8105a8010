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


// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "divpref.hpp"
#include "oracles.hpp"

using namespace divpref;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string printf_string(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

const Population& two_arm() {
  static const Population pop = two_arm_population();
  return pop;
}

Outcome lemma1() {
  const auto t0 = Clock::now();
  const BoundReport r = verify_lemma1(two_arm(), FitConfig{});
  bool ok = r.status == BoundReport::Status::Ok && std::abs(r.lhs - 1.316) <= 0.002 &&
            std::abs(r.rhs_stated - 0.0924) <= 5e-5 && r.holds_stated();
  int applicable = 0, holds = 0;
  for (std::uint64_t i = 0; applicable < 100 && i < 10000; ++i) {
    const BoundReport b = verify_lemma1(random_population(1001, i), FitConfig{});
    if (b.status != BoundReport::Status::Ok) continue;
    ++applicable;
    holds += b.holds_stated();
  }
  const double secs = seconds_since(t0);
  ok = ok && applicable == 100 && holds == 100 && secs < 60;
  return {ok, printf_string("two-arm lhs %.4f rhs %.4f; random holds %d/%d; %.1fs", r.lhs,
                            r.rhs_stated, holds, applicable, secs)};
}

Outcome theorem1() {
  const auto t0 = Clock::now();
  const BoundReport r = verify_theorem1(two_arm(), 1.0, FitConfig{});
  bool ok = r.status == BoundReport::Status::Ok && std::abs(r.lhs - 0.2977) <= 0.001 &&
            std::abs(r.rhs_proof - 0.000574) <= 5e-7 && std::abs(r.rhs_stated - 0.001554) <= 5e-7 &&
            r.holds_proof() && r.holds_stated();
  int applicable = 0, proof = 0, stated = 0;
  for (std::uint64_t i = 0; applicable < 100 && i < 10000; ++i) {
    const BoundReport b = verify_theorem1(random_population(1002, i), 1.0, FitConfig{});
    if (b.status != BoundReport::Status::Ok) continue;
    ++applicable;
    proof += b.holds_proof();
    stated += b.holds_stated();
  }
  const double secs = seconds_since(t0);
  ok = ok && applicable == 100 && proof == 100 && secs < 120;
  return {ok, printf_string("two-arm gap %.4f rhs_proof %.6f rhs_stated %.6f; random holds_proof "
                            "%d/%d, holds_stated %d/%d; %.1fs",
                            r.lhs, r.rhs_proof, r.rhs_stated, proof, applicable, stated, applicable, secs)};
}

Outcome lipschitz() {
  double worst_margin = 1e300;
  bool ok = true;
  for (std::uint64_t i = 0; i < 10; ++i) {
    const FeatureWorld w = random_population(1003, i).world();
    const double ratio = lipschitz_check(w, 10000, derive_seed(1003, "trials", i));
    const double bound = 4.0 * w.feature_bound();
    ok = ok && ratio <= bound;
    worst_margin = std::min(worst_margin, bound / ratio);
  }
  ok = ok && worst_margin >= 4.0;
  return {ok, printf_string("smallest margin 4D / max ratio = %.3f over 10 worlds", worst_margin)};
}

Outcome decomposition() {
  double worst_diff = 0.0, worst_min = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Population pop = random_population(1004, i);
    std::mt19937_64 rng = substream(1004, "phi", i);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    Vector phi(pop.world().dim());
    for (Eigen::Index k = 0; k < phi.size(); ++k) phi[k] = u(rng);
    const DecompositionCheck c =
        loss_decomposition_check(pop, RewardParams(phi), enumerate_comparisons(pop.world()));
    worst_diff = std::max(worst_diff, std::abs(c.direct - c.decomposed));
    worst_min = std::max(worst_min, c.minimizer_error);
  }
  return {worst_diff <= 1e-9 && worst_min <= 1e-9,
          printf_string("max |direct - decomposed| %.2e, max minimizer error %.2e", worst_diff, worst_min)};
}

Outcome gibbs_optimality() {
  const auto grid = oracle::simplex_grid(3, 100);
  double worst = -1e300;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const Population pop =
        random_population(1005, i, InstanceShape{2, 4, 1, 1, 1, 1, 3, 3, 1.0, 2.0, 1});
    const FeatureWorld& w = pop.world();
    const Policy ref = Policy::uniform(w);
    const RewardParams& phi = pop.group(0).phi_star;
    const double beta = 0.25 + 0.25 * static_cast<double>(i % 4);
    const double best = regularized_objective(gibbs_policy(phi, ref, beta, w).policy, phi, ref, beta, w).value;
    for (const auto& p : grid) {
      worst = std::max(worst, regularized_objective(Policy({p}), phi, ref, beta, w).value - best);
    }
  }
  return {worst <= 1e-9, printf_string("max grid excess over closed form %.2e (%zu grid policies)", worst, grid.size())};
}

MaxMinConfig both_mode() {
  MaxMinConfig c;
  c.mode = MaxMinMode::Both;
  return c;
}

Outcome solver_agreement() {
  const Policy ref = Policy::uniform(two_arm().world());
  const MaxMinResult r = maxmin_solve(two_arm(), ref, 1.0, both_mode());
  bool ok = std::abs(r.objective - 0.5) <= 1e-3 && std::abs(*r.iterate_objective - 0.5) <= 1e-3 &&
            std::abs((*r.lambda)[0] - 0.5) <= 1e-3 && std::abs((*r.lambda)[1] - 0.5) <= 1e-3;
  double worst = 0.0, worst_gap = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Population pop = random_population(1006, i);
    const MaxMinResult m = maxmin_solve(pop, Policy::uniform(pop.world()), 1.0, both_mode());
    worst = std::max(worst, std::abs(*m.iterate_objective - m.objective));
    worst_gap = std::max(worst_gap, *m.duality_gap);
  }
  ok = ok && worst <= 1e-3 && worst_gap <= 1e-6;
  return {ok, printf_string("two-arm G %.6f (iterate %.6f), lambda (%.4f, %.4f); random max "
                            "|G_it - G_dual| %.2e, max gap %.2e",
                            r.objective, *r.iterate_objective, (*r.lambda)[0], (*r.lambda)[1], worst, worst_gap)};
}

double single_reward_min(const Population& pop, const Policy& ref, double beta) {
  const RewardParams star = fit_population_reward(pop, enumerate_comparisons(pop.world()), FitConfig{});
  return min_group_objective(gibbs_policy(star, ref, beta, pop.world()).policy, pop, ref, beta).value;
}

Outcome dominance() {
  const Policy ref = Policy::uniform(two_arm().world());
  const double single = single_reward_min(two_arm(), ref, 1.0);
  const double maxmin = maxmin_solve(two_arm(), ref, 1.0, MaxMinConfig{}).objective;
  bool ok = maxmin - single >= 0.15;
  int dominated = 0;
  double worst = 1e300;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const Population pop = random_population(1007, i);
    const Policy r = Policy::uniform(pop.world());
    const double diff = maxmin_solve(pop, r, 1.0, MaxMinConfig{}).objective - single_reward_min(pop, r, 1.0);
    worst = std::min(worst, diff);
    dominated += diff >= 0.0;
  }
  ok = ok && dominated == 50;
  return {ok, printf_string("two-arm maxmin %.4f vs single %.4f; random maxmin >= single on %d/50 "
                            "(smallest margin %.2e)",
                            maxmin, single, dominated, worst)};
}

Outcome em_recovery() {
  const auto t0 = Clock::now();
  const Population pop = two_arm_population(30);
  int recovered = 0, max_iters = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const PreferenceDataset d = sample_dataset(pop, 50, derive_seed(seed, "gen"));
    const MixtureRewardModel m = em_fit(d.records(), pop.world(), 2, FitConfig{}, 5, derive_seed(seed, "em"));
    const int iters = static_cast<int>(m.history.size());
    max_iters = std::max(max_iters, iters);
    recovered += cluster_accuracy(m, d.hidden_labels()) == 1.0 && iters <= 10;
  }
  const double secs = seconds_since(t0);
  return {recovered >= 19 && secs < 30,
          printf_string("perfect recovery within 10 iterations on %d/20 seeds (max %d iterations); %.1fs",
                        recovered, max_iters, secs)};
}

Outcome sweep_trend() {
  const ExperimentConfig c;
  SweepSettings s;
  s.ratios = {1, 2, 6, 10};
  for (int i = 0; i < 10; ++i) s.seeds.push_back(derive_seed(c.seed, "sweep-seed", static_cast<std::uint64_t>(i)));
  const SweepTable t = minority_sweep(arc_world(), RewardParams(c.sweep.majority), RewardParams(c.sweep.minority), s);
  bool ok = true;
  std::string minority = "minority", majority = "majority";
  for (std::size_t i = 0; i < t.summary.size(); ++i) {
    minority += printf_string(" %.3f", t.summary[i].acc_minority);
    majority += printf_string(" %.3f", t.summary[i].acc_majority);
    if (i == 0) continue;
    ok = ok && t.summary[i].acc_minority <= t.summary[i - 1].acc_minority;
    ok = ok && t.summary[i].acc_majority >= t.summary[i - 1].acc_majority - 0.02;
  }
  const double drop = t.summary.front().acc_minority - t.summary.back().acc_minority;
  ok = ok && drop >= 0.05;
  return {ok, minority + "; " + majority + printf_string("; drop %.3f", drop)};
}

bool path_visits(const std::vector<grid::Cell>& path, const std::set<grid::Cell>& region) {
  for (const grid::Cell& c : path) {
    if (region.count(c)) return true;
  }
  return false;
}

Outcome gridworld() {
  const GridConfig gc;
  const io::GridMap m = io::parse_map(kDefaultMap, gc.discount, gc.max_horizon);
  const grid::GroupRewardGrid ra = grid::cell_reward(m.spec, 0, m.region_a, gc.reward_a);
  const grid::GroupRewardGrid rb = grid::cell_reward(m.spec, 1, m.region_b, gc.reward_b);
  const grid::GridMaxMinResult mm = grid::grid_maxmin(m.spec, {ra, rb}, gc.beta, gc.tol);
  const double a = grid::evaluate_policy(m.spec, mm.solution.policy, ra);
  const double b = grid::evaluate_policy(m.spec, mm.solution.policy, rb);
  const double rel = std::abs(a - b) / std::max(std::abs(a), std::abs(b));
  const auto pa = grid::soft_value_iteration(m.spec, ra, gc.beta).policy;
  const auto pb = grid::soft_value_iteration(m.spec, rb, gc.beta).policy;
  int own = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto ta = grid::rollout(m.spec, pa, seed, gc.max_horizon);
    const auto tb = grid::rollout(m.spec, pb, seed, gc.max_horizon);
    own += path_visits(ta, m.region_a) && !path_visits(ta, m.region_b) &&
           path_visits(tb, m.region_b) && !path_visits(tb, m.region_a);
  }
  return {rel <= 0.01 && own == 10,
          printf_string("maxmin returns %.5f / %.5f (rel diff %.2e, lambda %.4f); single-group rollouts "
                        "reach only their own region on %d/10 seeds",
                        a, b, rel, mm.lambda[0], own)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"lemma1 bound", lemma1},
      {"theorem1 bound", theorem1},
      {"lipschitz", lipschitz},
      {"loss decomposition", decomposition},
      {"closed-form policy optimality", gibbs_optimality},
      {"maxmin solver agreement", solver_agreement},
      {"maxmin dominance", dominance},
      {"em recovery", em_recovery},
      {"minority sweep trend", sweep_trend},
      {"gridworld", gridworld}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
