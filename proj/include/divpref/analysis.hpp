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

// Diversity between sub-populations, the minority epsilon-gap, and numerical
// checks of the reward-mismatch and alignment-gap lower bounds.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/maxmin.hpp"
#include "divpref/policy.hpp"
#include "divpref/random.hpp"
#include "divpref/reward.hpp"
#include "divpref/synthpop.hpp"

namespace divpref {

// Prompt-weighted mean over the enumerated comparisons of |p_i(z) - p_j(z)|,
// the total variation of the two Bernoulli preference laws at z.
inline double diversity(const Population& pop, int i, int j) {
  pop.group(i);
  pop.group(j);
  const auto triples = enumerate_comparisons(pop.world());
  const auto w = triple_weights(pop.world(), triples);
  double d = 0.0;
  for (std::size_t t = 0; t < triples.size(); ++t) {
    d += w[t] * std::abs(group_pref_prob(pop, i, triples[t]) -
                         group_pref_prob(pop, j, triples[t]));
  }
  return d;
}

struct MinorityGap {
  int minority = 0;   // u*
  int reference = 0;  // j*
  double epsilon = 0.0;
};

// Picks the most diverse pair (i*, j*), takes as minority u* the member with
// the larger maximum diversity to the groups outside the pair (ties: smaller
// eta, then lower id), and returns
//   epsilon = Diversity(u*, j*) - max_{k != u*} Diversity(k, j*).
// epsilon <= 0 is returned as-is.
inline MinorityGap minority_epsilon(const Population& pop) {
  const int k = static_cast<int>(pop.num_groups());
  if (k < 2) throw DomainError("minority_epsilon needs at least two groups");
  std::vector<std::vector<double>> div(k, std::vector<double>(k, 0.0));
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) div[i][j] = div[j][i] = diversity(pop, i, j);
  }
  int pi = 0, pj = 1;
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      if (div[i][j] > div[pi][pj]) {
        pi = i;
        pj = j;
      }
    }
  }
  auto outside_max = [&](int member, int partner) {
    double m = -std::numeric_limits<double>::infinity();
    for (int q = 0; q < k; ++q) {
      if (q != member && q != partner) m = std::max(m, div[member][q]);
    }
    return m;
  };
  const double score_i = outside_max(pi, pj);
  const double score_j = outside_max(pj, pi);
  int u = pi;
  if (score_j > score_i ||
      (score_j == score_i && pop.group(pj).eta < pop.group(pi).eta)) {
    u = pj;
  }
  const int j = (u == pi) ? pj : pi;
  double rest = -std::numeric_limits<double>::infinity();
  for (int q = 0; q < k; ++q) {
    if (q != u) rest = std::max(rest, div[q][j]);
  }
  return {u, j, div[u][j] - rest};
}

struct BoundReport {
  enum class Status { Ok, NotApplicable, Degenerate };

  Status status = Status::Ok;
  double lhs = 0.0;
  double rhs_stated = 0.0;
  double rhs_proof = 0.0;
  std::map<std::string, double> witnesses;
  std::string note;

  bool holds_stated() const { return status == Status::Ok && lhs >= rhs_stated; }
  bool holds_proof() const { return status == Status::Ok && lhs >= rhs_proof; }
};

inline const char* to_string(BoundReport::Status s) {
  switch (s) {
    case BoundReport::Status::Ok: return "ok";
    case BoundReport::Status::NotApplicable: return "not_applicable";
    case BoundReport::Status::Degenerate: return "degenerate";
  }
  return "unknown";
}

struct RidgeProjection {
  RewardParams phi;  // extrapolated to ridge 0
  std::vector<std::pair<double, RewardParams>> fits;
};

// Population KL projection fitted along ridge {1e-4, 1e-6, 1e-8} and linearly
// extrapolated to zero from the two smallest ridges.
inline RidgeProjection ridge_extrapolated_projection(const Population& pop,
                                                     const FitConfig& config) {
  const auto triples = enumerate_comparisons(pop.world());
  RidgeProjection out;
  for (double ridge : {1e-4, 1e-6, 1e-8}) {
    FitConfig c = config;
    c.ridge = ridge;
    if (!out.fits.empty()) c.init = out.fits.back().second;
    out.fits.emplace_back(ridge, fit_population_reward(pop, triples, c));
  }
  const auto& [r1, p1] = out.fits[1];
  const auto& [r2, p2] = out.fits[2];
  out.phi = RewardParams(p2.phi - r2 * (p1.phi - p2.phi) / (r1 - r2));
  return out;
}

inline void add_vector_witness(BoundReport& report, const std::string& name,
                               const Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    report.witnesses[name + "_" + std::to_string(i)] = v[i];
  }
}

// Diversities are sums of rounded probabilities; a gap this small is zero.
inline constexpr double kEpsilonFloor = 1e-12;

// Reward mismatch |phi* - phi_u*| against epsilon (1 - eta(u*)) / (4 D).

inline BoundReport verify_lemma1(const Population& pop, const FitConfig& config) {
  BoundReport report;
  if (pop.num_groups() < 2) {
    report.status = BoundReport::Status::NotApplicable;
    report.note = "single group: no minority";
    return report;
  }
  const MinorityGap gap = minority_epsilon(pop);
  const double eta = pop.group(gap.minority).eta;
  const double d = pop.world().feature_bound();
  const RidgeProjection proj = ridge_extrapolated_projection(pop, config);
  const Vector& phi_u = pop.group(gap.minority).phi_star.phi;

  report.lhs = (proj.phi.phi - phi_u).norm();
  report.rhs_stated = gap.epsilon * (1.0 - eta) / (4.0 * d);
  report.rhs_proof = report.rhs_stated;
  bool stable = true;
  for (const auto& [ridge, fit] : proj.fits) {
    if (((fit.phi - phi_u).norm() >= report.rhs_stated) !=
        (report.lhs >= report.rhs_stated)) {
      stable = false;
    }
  }
  report.witnesses = {{"epsilon", gap.epsilon},
                      {"u_star", gap.minority},
                      {"j_star", gap.reference},
                      {"eta_u", eta},
                      {"D", d},
                      {"mismatch_norm", report.lhs},
                      {"ridge_verdict_stable", stable ? 1.0 : 0.0}};
  add_vector_witness(report, "phi_star", proj.phi.phi);
  if (!(gap.epsilon > kEpsilonFloor)) {
    report.status = BoundReport::Status::NotApplicable;
    report.note = "epsilon is zero: minority group is not unique";
  }
  return report;
}

// Alignment gap of the single-reward policy for u* against
//   stated: lambda_psi eps (1-eta) / (64 L_pi beta^2 D^2)
//   proof:  lambda_psi eps^2 (1-eta)^2 / (64 L_pi beta^2 D^2)
// with L_pi = 1/c and c the smallest probability among {pi_u* for all u,
// pi_RLHF}.
inline BoundReport verify_theorem1(const Population& pop, double beta,
                                   const FitConfig& config,
                                   const std::optional<Policy>& reference = std::nullopt) {
  if (!(beta > 0.0)) throw DomainError("beta must be positive");
  BoundReport report;
  if (pop.num_groups() < 2) {
    report.status = BoundReport::Status::NotApplicable;
    report.note = "single group: no minority";
    return report;
  }
  const FeatureWorld& world = pop.world();
  const Policy ref = reference ? *reference : Policy::uniform(world);
  const MinorityGap gap = minority_epsilon(pop);
  const double eta = pop.group(gap.minority).eta;
  const double d = world.feature_bound();
  const RidgeProjection proj = ridge_extrapolated_projection(pop, config);
  const Policy rlhf = gibbs_policy(proj.phi, ref, beta, world).policy;

  double c = rlhf.floor();
  for (const GroupSpec& g : pop.groups()) {
    c = std::min(c, gibbs_policy(g.phi_star, ref, beta, world).policy.floor());
  }
  const double lipschitz = 1.0 / c;

  std::size_t rows = 0;
  for (const Prompt& p : world.prompts()) rows += p.responses.size();
  Matrix psi(static_cast<Eigen::Index>(rows), world.dim());
  Eigen::Index row = 0;
  for (const Prompt& p : world.prompts()) {
    for (const Response& r : p.responses) psi.row(row++) = r.features.transpose();
  }
  const Matrix gram = psi.transpose() * psi;
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const double lambda_psi = eig.eigenvalues().minCoeff();
  const double lambda_max = eig.eigenvalues().maxCoeff();

  report.lhs = align_gap(rlhf, gap.minority, pop, ref, beta);
  const double denom = 64.0 * lipschitz * beta * beta * d * d;
  report.rhs_stated = lambda_psi * gap.epsilon * (1.0 - eta) / denom;
  report.rhs_proof =
      lambda_psi * gap.epsilon * gap.epsilon * (1.0 - eta) * (1.0 - eta) / denom;
  report.witnesses = {{"epsilon", gap.epsilon},
                      {"u_star", gap.minority},
                      {"j_star", gap.reference},
                      {"eta_u", eta},
                      {"D", d},
                      {"lambda_psi", lambda_psi},
                      {"c", c},
                      {"L_pi", lipschitz},
                      {"beta", beta},
                      {"mismatch_norm", (proj.phi.phi - pop.group(gap.minority).phi_star.phi).norm()}};
  add_vector_witness(report, "phi_star", proj.phi.phi);
  if (!(gap.epsilon > kEpsilonFloor)) {
    report.status = BoundReport::Status::NotApplicable;
    report.note = "epsilon is zero: minority group is not unique";
  } else if (!(lambda_psi > 1e-12 * std::max(1.0, lambda_max))) {
    report.status = BoundReport::Status::Degenerate;
    report.note = "feature Gram matrix is rank deficient";
  }
  return report;
}

// |p_phi(z) - p_phi'(z)| / |phi - phi'|; nullopt when phi == phi'.
inline std::optional<double> lipschitz_ratio(const FeatureWorld& world,
                                             const RewardParams& a,
                                             const RewardParams& b,
                                             const ComparisonTriple& z) {
  const double dist = (a.phi - b.phi).norm();
  if (dist == 0.0) return std::nullopt;
  return std::abs(pref_prob(a, world, z) - pref_prob(b, world, z)) / dist;
}

// Largest observed Lipschitz ratio over random (phi, phi', z) with parameter
// components uniform in [-3, 3].
inline double lipschitz_check(const FeatureWorld& world, int trials, std::uint64_t seed) {
  if (trials < 1) throw DomainError("lipschitz_check needs at least one trial");
  const auto triples = enumerate_comparisons(world);
  std::mt19937_64 rng = substream(seed, "lipschitz");
  std::uniform_real_distribution<double> comp(-3.0, 3.0);
  std::uniform_int_distribution<std::size_t> pick(0, triples.size() - 1);
  double worst = 0.0;
  for (int t = 0; t < trials; ++t) {
    RewardParams a = RewardParams::zeros(world.dim());
    RewardParams b = RewardParams::zeros(world.dim());
    for (int i = 0; i < world.dim(); ++i) a.phi[i] = comp(rng);
    for (int i = 0; i < world.dim(); ++i) b.phi[i] = comp(rng);
    const ComparisonTriple& z = triples[pick(rng)];
    if (const auto r = lipschitz_ratio(world, a, b, z)) worst = std::max(worst, *r);
  }
  return worst;
}

struct DecompositionCheck {
  double direct = 0.0;
  double decomposed = 0.0;
  double minimizer_error = 0.0;  // max_z |argmin_q CE_z(q) - sum_u eta_u p_u(z)|
};

// Cross-entropy to the mixture computed directly and as
//   sum_u eta_u [KL(p_u || p_phi) + H(p_u)]
// and the per-comparison unconstrained minimizer of the direct form found by
// bisection on its derivative.
inline DecompositionCheck loss_decomposition_check(const Population& pop,
                                                   const RewardParams& params,
                                                   const std::vector<ComparisonTriple>& triples) {
  const FeatureWorld& world = pop.world();
  const auto w = triple_weights(world, triples);
  DecompositionCheck out;
  out.direct = population_ce(params, pop, triples);
  auto xlogx = [](double p) { return p > 0.0 ? p * std::log(p) : 0.0; };
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const double s = params.phi.dot(feature_difference(world, triples[t]));
    const double log_p = log_sigmoid(s);
    const double log_q = log_sigmoid(-s);
    double term = 0.0;
    double mixture = 0.0;
    for (const GroupSpec& g : pop.groups()) {
      const double pu = group_pref_prob(pop, g.group_id, triples[t]);
      const double kl = xlogx(pu) + xlogx(1.0 - pu) - pu * log_p - (1.0 - pu) * log_q;
      const double h = -xlogx(pu) - xlogx(1.0 - pu);
      term += g.eta * (kl + h);
      mixture += g.eta * pu;
    }
    out.decomposed += w[t] * term;

    const double target = mixture_pref_prob(pop, triples[t]);
    double lo = 0.0, hi = 1.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid == lo || mid == hi) break;
      const double slope = -target / mid + (1.0 - target) / (1.0 - mid);
      (slope > 0.0 ? hi : lo) = mid;
    }
    out.minimizer_error = std::max(out.minimizer_error, std::abs(0.5 * (lo + hi) - mixture));
  }
  return out;
}

struct SweepRow {
  int ratio = 1;
  std::uint64_t seed = 0;
  double acc_total = 0.0;
  double acc_majority = 0.0;
  double acc_minority = 0.0;
  double util_min_single = 0.0;
  double util_min_maxmin = 0.0;
};

struct SweepTable {
  std::vector<SweepRow> rows;     // ratio-major, then seed order
  std::vector<SweepRow> summary;  // per-ratio means (seed field = number of seeds)
};

struct SweepSettings {
  std::vector<int> ratios{1, 2, 6, 10};
  int annotators_base = 30;
  int comparisons = 50;
  std::vector<std::uint64_t> seeds;
  FitConfig fit;
  double beta = 1.0;
  MaxMinConfig maxmin;
};

// Single-reward degradation for the minority as the majority:minority ratio
// grows. For each ratio r the population has r * base majority annotators and
// base minority annotators; the minority is group 0 so its annotator streams
// are shared across ratios. Accuracy is measured on an independently sampled
// test set with the same composition; utilities are min-group regularized
// objectives under the true group rewards.
inline SweepTable minority_sweep(const FeatureWorld& world, const RewardParams& majority,
                                 const RewardParams& minority, const SweepSettings& s) {
  if (s.seeds.empty()) throw DomainError("minority_sweep needs at least one seed");
  for (int r : s.ratios) {
    if (r < 1) throw DomainError("sweep ratios must be positive integers");
  }
  SweepTable table;
  const Policy ref = Policy::uniform(world);
  for (int r : s.ratios) {
    const double total = static_cast<double>(r + 1);
    const Population pop(world, {{0, minority, 1.0 / total, s.annotators_base},
                                 {1, majority, static_cast<double>(r) / total,
                                  r * s.annotators_base}});
    const double util_maxmin = maxmin_dual(pop, ref, s.beta, s.maxmin).objective;
    SweepRow mean;
    mean.ratio = r;
    mean.seed = s.seeds.size();
    for (std::uint64_t seed : s.seeds) {
      const PreferenceDataset train =
          sample_dataset(pop, s.comparisons, derive_seed(seed, "sweep-train"));
      const PreferenceDataset test =
          sample_dataset(pop, s.comparisons, derive_seed(seed, "sweep-test"));
      const RewardParams fitted = fit_single_reward(train.records(), world, s.fit);

      double hits[2] = {0, 0}, counts[2] = {0, 0};
      for (const PreferenceRecord& rec : test.records()) {
        const int g = test.hidden_labels().at(rec.annotator);
        const Winner predicted =
            pref_prob(fitted, world, rec.triple) > 0.5 ? Winner::First : Winner::Second;
        counts[g] += 1.0;
        if (predicted == rec.winner) hits[g] += 1.0;
      }
      SweepRow row;
      row.ratio = r;
      row.seed = seed;
      row.acc_minority = hits[0] / counts[0];
      row.acc_majority = hits[1] / counts[1];
      row.acc_total = (hits[0] + hits[1]) / (counts[0] + counts[1]);
      const Policy single = gibbs_policy(fitted, ref, s.beta, world).policy;
      row.util_min_single = min_group_objective(single, pop, ref, s.beta).value;
      row.util_min_maxmin = util_maxmin;
      table.rows.push_back(row);

      const double n = static_cast<double>(s.seeds.size());
      mean.acc_total += row.acc_total / n;
      mean.acc_majority += row.acc_majority / n;
      mean.acc_minority += row.acc_minority / n;
      mean.util_min_single += row.util_min_single / n;
      mean.util_min_maxmin += row.util_min_maxmin / n;
    }
    table.summary.push_back(mean);
  }
  return table;
}

}  // namespace divpref
