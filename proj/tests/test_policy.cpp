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


#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace divpref;
using oracle::vec;

namespace {

const RewardParams kStar(vec({oracle::kPhiStarHalf, -oracle::kPhiStarHalf}));

}  // namespace

TEST(Policy, Validation) {
  EXPECT_THROW(Policy({}), StructuralError);
  EXPECT_THROW(Policy(Policy::Table{{}}), StructuralError);
  EXPECT_THROW(Policy({{0.5, 0.6}}), StructuralError);
  EXPECT_THROW(Policy({{-0.1, 1.1}}), StructuralError);
  EXPECT_THROW(Policy({{std::nan(""), 1.0}}), StructuralError);
  const Policy p({{0.25, 0.75}, {0.1, 0.2, 0.7}});
  EXPECT_DOUBLE_EQ(p.floor(), 0.1);
}

TEST(GibbsPolicy, TwoPointSoftmax) {
  const Population pop = two_arm_population();
  const Policy ref = Policy::uniform(pop.world());
  const GibbsPolicy g = gibbs_policy(RewardParams(vec({1, 0})), ref, 1.0, pop.world());
  EXPECT_NEAR(g.policy.prob(0, 0), oracle::kSigmoid1, 1e-15);
  EXPECT_NEAR(g.partition(0), 0.5 * (std::exp(1.0) + 1.0), 1e-14);
}

TEST(GibbsPolicy, LargeBetaAndZeroRewardGiveReference) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Population pop = random_population(50, i);
    const Policy ref = Policy::uniform(pop.world());
    EXPECT_LE(max_row_tv(gibbs_policy(pop.group(0).phi_star, ref, 1e6, pop.world()).policy, ref), 1e-5);
    const Policy zero = gibbs_policy(RewardParams::zeros(pop.world().dim()), ref, 0.7, pop.world()).policy;
    EXPECT_EQ(zero.table(), ref.table());
  }
}

TEST(GibbsPolicy, Errors) {
  const Population pop = two_arm_population();
  const Policy ref = Policy::uniform(pop.world());
  EXPECT_THROW(gibbs_policy(kStar, ref, 0.0, pop.world()), DomainError);
  EXPECT_THROW(gibbs_policy(kStar, ref, -1.0, pop.world()), DomainError);
  EXPECT_THROW(gibbs_policy(kStar, Policy(Policy::Table{{1.0, 0.0}}), 1.0, pop.world()), DomainError);
}

TEST(GibbsPolicy, ShiftInvariance) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Population pop = random_population(51, i);
    const FeatureWorld& w = pop.world();
    const Policy ref = Policy::uniform(w);
    RewardTable r = reward_table(pop.group(0).phi_star, w);
    const Policy base = gibbs_from_rewards(r, ref, 0.8).policy;
    for (std::size_t x = 0; x < r.size(); ++x) {
      for (double& v : r[x]) v += 3.5 * static_cast<double>(x) - 1.25;
    }
    const Policy shifted = gibbs_from_rewards(r, ref, 0.8).policy;
    EXPECT_LE(max_row_tv(base, shifted), 1e-12);
  }
}

TEST(GibbsPolicy, DistanceToReferenceShrinksWithBeta) {
  const Population pop = random_population(52, 3);
  const Policy ref = Policy::uniform(pop.world());
  double previous = 1.0;
  for (double beta : {0.01, 0.05, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 100.0}) {
    const double tv = max_row_tv(gibbs_policy(pop.group(0).phi_star, ref, beta, pop.world()).policy, ref);
    EXPECT_LE(tv, previous + 1e-15);
    previous = tv;
  }
}

TEST(RegularizedObjective, WorkedValues) {
  const Population pop = two_arm_population();
  const FeatureWorld& w = pop.world();
  const Policy ref = Policy::uniform(w);
  const RewardParams phi_b = pop.group(1).phi_star;

  const ObjectiveValue at_ref = regularized_objective(ref, phi_b, ref, 1.0, w);
  EXPECT_DOUBLE_EQ(at_ref.kl, 0.0);
  EXPECT_DOUBLE_EQ(at_ref.value, 0.5);

  const ObjectiveValue own = regularized_objective(gibbs_policy(phi_b, ref, 1.0, w).policy, phi_b, ref, 1.0, w);
  EXPECT_NEAR(own.value, oracle::kObjectiveBOwn, 1e-14);
  EXPECT_NEAR(own.kl, oracle::kKlOwn, 1e-14);
  EXPECT_NEAR(own.expected_reward, oracle::kSigmoid1, 1e-14);

  const ObjectiveValue rlhf = regularized_objective(gibbs_policy(kStar, ref, 1.0, w).policy, phi_b, ref, 1.0, w);
  EXPECT_NEAR(rlhf.value, oracle::kObjectiveBRlhf, 1e-14);
  EXPECT_NEAR(rlhf.kl, oracle::kKlRlhf, 1e-14);
  EXPECT_NEAR(rlhf.expected_reward, 1.0 - oracle::kMixture, 1e-14);
}

TEST(RegularizedObjective, MassOutsideReferenceSupportIsDomainError) {
  const Population pop = two_arm_population();
  EXPECT_THROW(mean_kl(Policy(Policy::Table{{0.5, 0.5}}), Policy(Policy::Table{{1.0, 0.0}}), pop.world()), DomainError);
  EXPECT_THROW(regularized_objective(Policy(Policy::Table{{0.5, 0.5}}), kStar, Policy(Policy::Table{{1.0, 0.0}}), 1.0, pop.world()),
               DomainError);
}

TEST(AlignGap, WorkedValues) {
  const Population pop = two_arm_population();
  const FeatureWorld& w = pop.world();
  const Policy ref = Policy::uniform(w);
  const Policy rlhf = gibbs_policy(kStar, ref, 1.0, w).policy;
  EXPECT_NEAR(align_gap(rlhf, 1, pop, ref, 1.0), oracle::kGapB, 1e-14);
  EXPECT_NEAR(align_gap(rlhf, 0, pop, ref, 1.0), oracle::kGapA, 1e-14);
  EXPECT_NEAR(align_gap(gibbs_policy(pop.group(1).phi_star, ref, 1.0, w).policy, 1, pop, ref, 1.0), 0.0, 1e-10);
  EXPECT_NEAR(align_gap(gibbs_policy(kStar, ref, 10.0, w).policy, 1, pop, ref, 10.0), oracle::kGapBeta10, 1e-14);
}

TEST(AlignGapProperty, ZeroOnlyAtGroupOptimum) {
  for (std::uint64_t i = 0; i < 10; ++i) {
    const Population pop = random_population(53, i);
    const Policy ref = Policy::uniform(pop.world());
    const Policy own = gibbs_policy(pop.group(0).phi_star, ref, 0.7, pop.world()).policy;
    EXPECT_NEAR(align_gap(own, 0, pop, ref, 0.7), 0.0, 1e-10);
    const Policy other = gibbs_policy(pop.group(1).phi_star, ref, 0.7, pop.world()).policy;
    const double gap = align_gap(other, 0, pop, ref, 0.7);
    EXPECT_GE(gap, -1e-10);
    if (max_row_tv(own, other) > 1e-3) EXPECT_GT(gap, 0.0);
  }
}

// The closed form beats every policy on a 0.01 simplex grid.
TEST(GibbsPolicyProperty, OptimalAgainstSimplexGrid) {
  const auto grid = oracle::simplex_grid(3, 100);
  for (std::uint64_t i = 0; i < 5; ++i) {
    const Population pop = random_population(54, i, InstanceShape{2, 3, 1, 1, 1, 1, 3, 3, 1.0, 2.0, 1});
    const FeatureWorld& w = pop.world();
    const Policy ref = Policy::uniform(w);
    const RewardParams& phi = pop.group(0).phi_star;
    const double best = regularized_objective(gibbs_policy(phi, ref, 0.5, w).policy, phi, ref, 0.5, w).value;
    for (const auto& p : grid) {
      EXPECT_LE(regularized_objective(Policy({p}), phi, ref, 0.5, w).value, best + 1e-9);
    }
  }
}

TEST(MaxRowTv, ShapeMismatch) {
  EXPECT_THROW(max_row_tv(Policy(Policy::Table{{1.0}}), Policy(Policy::Table{{0.5, 0.5}})), DomainError);
  EXPECT_DOUBLE_EQ(max_row_tv(Policy(Policy::Table{{1.0, 0.0}}), Policy(Policy::Table{{0.5, 0.5}})), 0.5);
}
