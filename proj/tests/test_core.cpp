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
#include <limits>
#include <random>

#include "oracles.hpp"

using namespace divpref;
using oracle::vec;

namespace {

FeatureWorld world_with(std::vector<std::size_t> responses_per_prompt) {
  std::vector<Prompt> prompts;
  for (std::size_t x = 0; x < responses_per_prompt.size(); ++x) {
    Prompt p{"x" + std::to_string(x), 0.0, {}};
    for (std::size_t y = 0; y < responses_per_prompt[x]; ++y) {
      p.responses.push_back({"y" + std::to_string(y), vec({double(y), 1.0})});
    }
    prompts.push_back(p);
  }
  return FeatureWorld::with_uniform_weights(2, prompts);
}

}  // namespace

TEST(LinearReward, InnerProducts) {
  const FeatureWorld w = two_arm_population().world();
  EXPECT_DOUBLE_EQ(linear_reward(RewardParams(vec({1, 0})), w, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(linear_reward(RewardParams(vec({0, 0})), w, 0, 1), 0.0);
  EXPECT_DOUBLE_EQ(linear_reward(RewardParams(vec({1, 0})), w, 0, 1), 0.0);
}

TEST(LinearReward, UnknownPairIsLookupError) {
  const FeatureWorld w = two_arm_population().world();
  EXPECT_THROW(linear_reward(RewardParams(vec({1, 0})), w, 0, 2), LookupError);
  EXPECT_THROW(linear_reward(RewardParams(vec({1, 0})), w, 1, 0), LookupError);
  EXPECT_THROW(w.prompt_index("nope"), LookupError);
  EXPECT_THROW(linear_reward(RewardParams(vec({1, 0, 0})), w, 0, 0), DomainError);
}

TEST(BtProb, WorkedValues) {
  EXPECT_DOUBLE_EQ(bt_prob(0, 0), 0.5);
  EXPECT_NEAR(bt_prob(std::log(3.0), 0), 0.75, 1e-15);
  EXPECT_NEAR(bt_prob(1, 0), oracle::kSigmoid1, 1e-15);
}

TEST(BtProb, RejectsNonFinite) {
  EXPECT_THROW(bt_prob(std::numeric_limits<double>::infinity(), 0), DomainError);
  EXPECT_THROW(bt_prob(0, std::nan("")), DomainError);
}

TEST(BtProb, ExtremeGapsStayInRange) {
  EXPECT_GT(bt_prob(-700, 0), 0.0);
  EXPECT_LT(bt_prob(-700, 0), 1e-300);
  EXPECT_EQ(bt_prob(800, 0), 1.0);
  EXPECT_NEAR(log_sigmoid(-800), -800, 1e-12);
}

TEST(BtProbProperty, ComplementShiftAndMonotonicity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    EXPECT_NEAR(bt_prob(a, b) + bt_prob(b, a), 1.0, 1e-15);
    EXPECT_NEAR(bt_prob(a + c, b + c), bt_prob(a, b), 1e-12);
    const double d = std::abs(u(rng)) * 0.01 + 1e-3;
    EXPECT_GE(bt_prob(a + d, b), bt_prob(a, b));
  }
  for (double a = -5; a < 5; a += 0.25) EXPECT_LT(bt_prob(a, 0), bt_prob(a + 0.25, 0));
}

TEST(EnumerateComparisons, Counts) {
  EXPECT_EQ(enumerate_comparisons(world_with({2})).size(), 1u);
  EXPECT_EQ(enumerate_comparisons(world_with({3})).size(), 3u);
  EXPECT_EQ(enumerate_comparisons(world_with({2, 3})).size(), 4u);
}

TEST(EnumerateComparisons, CanonicalOrderAndStable) {
  const FeatureWorld w = world_with({3, 2});
  const auto a = enumerate_comparisons(w);
  const auto b = enumerate_comparisons(w);
  EXPECT_EQ(a, b);
  const std::vector<ComparisonTriple> expected{{0, 0, 1}, {0, 0, 2}, {0, 1, 2}, {1, 0, 1}};
  EXPECT_EQ(a, expected);
  for (const auto& z : a) EXPECT_LT(z.first, z.second);
}

TEST(FeatureWorld, Validation) {
  const Vector f = vec({1, 0});
  EXPECT_THROW(FeatureWorld(0, {Prompt{"x", 1.0, {{"a", f}, {"b", f}}}}), StructuralError);
  EXPECT_THROW(FeatureWorld(2, {}), StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 1.0, {{"a", f}}}}), StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 1.0, {{"a", f}, {"a", f}}}}), StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 0.9, {{"a", f}, {"b", f}}}}), StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 1.0, {{"a", f}, {"b", vec({1})}}}}), StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 1.0, {{"a", vec({0, 0})}, {"b", vec({0, 0})}}}}),
               StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 1.0, {{"a", f}, {"b", vec({std::nan(""), 0})}}}}),
               StructuralError);
  EXPECT_THROW(FeatureWorld(2, {Prompt{"x", 0.5, {{"a", f}, {"b", f}}},
                                Prompt{"x", 0.5, {{"a", f}, {"b", f}}}}),
               StructuralError);
}

TEST(FeatureWorld, BoundIsMaxNorm) {
  const FeatureWorld w(2, {Prompt{"x", 1.0, {{"a", vec({3, 4})}, {"b", vec({1, 0})}}}});
  EXPECT_DOUBLE_EQ(w.feature_bound(), 5.0);
  const FeatureWorld u = world_with({2, 4});
  double m = 0;
  for (const auto& p : u.prompts()) {
    for (const auto& r : p.responses) m = std::max(m, r.features.norm());
  }
  EXPECT_DOUBLE_EQ(u.feature_bound(), m);
}

TEST(FeatureWorld, FingerprintTracksContent) {
  const FeatureWorld a = world_with({2, 3});
  EXPECT_EQ(a.fingerprint(), world_with({2, 3}).fingerprint());
  EXPECT_NE(a.fingerprint(), world_with({3, 2}).fingerprint());
  EXPECT_EQ(a.fingerprint().size(), 16u);
}

TEST(TripleWeights, PromptWeightSplitOverPairs) {
  std::vector<Prompt> prompts = world_with({2, 3}).prompts();
  prompts[0].weight = 0.25;
  prompts[1].weight = 0.75;
  const FeatureWorld w(2, prompts);
  const auto t = enumerate_comparisons(w);
  const auto weights = triple_weights(w, t);
  ASSERT_EQ(weights.size(), 4u);
  EXPECT_NEAR(weights[0], 0.25, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(weights[i], 0.25, 1e-15);
  EXPECT_THROW(triple_weights(w, {}), DomainError);
}

TEST(PrefProb, MatchesBtOnFeatureDifference) {
  const FeatureWorld w = two_arm_population().world();
  const RewardParams phi(vec({1, 0}));
  EXPECT_NEAR(pref_prob(phi, w, {0, 0, 1}), oracle::kSigmoid1, 1e-15);
  EXPECT_TRUE(feature_difference(w, {0, 0, 1}).isApprox(vec({1, -1})));
}
