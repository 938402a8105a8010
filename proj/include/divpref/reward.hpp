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

// Reward learning: single Bradley-Terry MLE, the population-exact KL
// projection, and the hard-EM mixture learner.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/random.hpp"
#include "divpref/synthpop.hpp"

namespace divpref {

struct FitConfig {
  double ridge = 1e-6;
  double grad_tol = 1e-9;
  int max_iters = 100;
  std::optional<RewardParams> init;  // nullopt: start from phi = 0

  void validate() const {
    if (!(ridge >= 0.0)) throw DomainError("ridge must be nonnegative");
    if (!(grad_tol > 0.0)) throw DomainError("grad_tol must be positive");
    if (max_iters < 1) throw DomainError("max_iters must be at least 1");
  }
};

namespace detail {

// One weighted soft-label logistic term:
//   weight * -[target log sigma(phi.diff) + (1 - target) log sigma(-phi.diff)]
// Empirical fits use target = observed first-win rate; population fits use the
// mixture probability.
struct SoftLabelTerm {
  Vector diff;
  double target = 0.5;
  double weight = 0.0;
};

inline double soft_label_loss(const Vector& phi,
                              const std::vector<SoftLabelTerm>& terms,
                              double ridge) {
  double value = 0.5 * ridge * phi.squaredNorm();
  for (const SoftLabelTerm& t : terms) {
    const double s = phi.dot(t.diff);
    value -= t.weight * (t.target * log_sigmoid(s) +
                         (1.0 - t.target) * log_sigmoid(-s));
  }
  return value;
}

inline Vector soft_label_gradient(const Vector& phi,
                                  const std::vector<SoftLabelTerm>& terms,
                                  double ridge) {
  Vector g = ridge * phi;
  for (const SoftLabelTerm& t : terms) {
    g += t.weight * (sigmoid(phi.dot(t.diff)) - t.target) * t.diff;
  }
  return g;
}

inline Matrix soft_label_hessian(const Vector& phi,
                                 const std::vector<SoftLabelTerm>& terms,
                                 double ridge) {
  const Eigen::Index d = phi.size();
  Matrix h = ridge * Matrix::Identity(d, d);
  for (const SoftLabelTerm& t : terms) {
    const double p = sigmoid(phi.dot(t.diff));
    h.noalias() += t.weight * p * (1.0 - p) * t.diff * t.diff.transpose();
  }
  return h;
}

// Damped Newton with a fixed Armijo backtracking rule. The Newton system is
// solved in the least-squares minimum-norm sense, so with ridge = 0 and a
// zero start the iterates stay in the span of the feature differences.
inline Vector minimize_soft_label(const std::vector<SoftLabelTerm>& terms,
                                  Eigen::Index dim, const FitConfig& config) {
  config.validate();
  Vector phi = config.init ? config.init->phi : Vector::Zero(dim);
  if (phi.size() != dim) throw DomainError("initial parameter has the wrong dimension");
  double value = soft_label_loss(phi, terms, config.ridge);
  double grad_norm = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < config.max_iters; ++iter) {
    const Vector g = soft_label_gradient(phi, terms, config.ridge);
    grad_norm = g.norm();
    if (grad_norm <= config.grad_tol) return phi;
    const Matrix h = soft_label_hessian(phi, terms, config.ridge);
    Vector step = -h.completeOrthogonalDecomposition().solve(g);
    double slope = g.dot(step);
    if (!step.allFinite() || !(slope < 0.0)) {
      step = -g;
      slope = -g.squaredNorm();
    }
    if (-slope <= 1e-12 * (1.0 + std::abs(value))) {
      // The loss is flat to rounding here; accept a full step that still
      // shrinks the gradient.
      const Vector trial = phi + step;
      if (!(soft_label_gradient(trial, terms, config.ridge).norm() < grad_norm)) break;
      phi = trial;
      value = soft_label_loss(phi, terms, config.ridge);
      continue;
    }
    double t = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving, t *= 0.5) {
      const Vector trial = phi + t * step;
      const double trial_value = soft_label_loss(trial, terms, config.ridge);
      if (trial_value <= value + 1e-4 * t * slope) {
        phi = trial;
        value = trial_value;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  const double final_norm = soft_label_gradient(phi, terms, config.ridge).norm();
  if (final_norm <= config.grad_tol) return phi;
  throw NonConvergenceError(
      "reward fit did not reach grad_tol (gradient norm " +
          std::to_string(final_norm) + ")",
      std::vector<double>(phi.data(), phi.data() + phi.size()),
      std::min(final_norm, grad_norm));
}

// Collapses records into per-triple first-win rates weighted by record count.
inline std::vector<SoftLabelTerm> empirical_terms(
    std::span<const PreferenceRecord> records, const FeatureWorld& world) {
  std::map<ComparisonTriple, std::pair<double, double>> counts;  // wins, total
  for (const PreferenceRecord& r : records) {
    auto& c = counts[r.triple];
    if (r.winner == Winner::First) c.first += 1.0;
    c.second += 1.0;
  }
  const double n = static_cast<double>(records.size());
  std::vector<SoftLabelTerm> terms;
  terms.reserve(counts.size());
  for (const auto& [z, c] : counts) {
    terms.push_back({feature_difference(world, z), c.first / c.second, c.second / n});
  }
  return terms;
}

inline std::vector<SoftLabelTerm> population_terms(
    const Population& pop, const std::vector<ComparisonTriple>& triples) {
  const std::vector<double> w = triple_weights(pop.world(), triples);
  std::vector<SoftLabelTerm> terms;
  terms.reserve(triples.size());
  for (std::size_t i = 0; i < triples.size(); ++i) {
    terms.push_back({feature_difference(pop.world(), triples[i]),
                     mixture_pref_prob(pop, triples[i]), w[i]});
  }
  return terms;
}

}  // namespace detail

// Mean Bradley-Terry negative log-likelihood plus ridge * |phi|^2 / 2.
inline double empirical_nll(const RewardParams& params,
                            std::span<const PreferenceRecord> records,
                            const FeatureWorld& world, double ridge) {
  if (records.empty()) throw DomainError("empirical_nll needs at least one record");
  if (params.dim() != world.dim()) throw DomainError("parameter dimension mismatch");
  double total = 0.0;
  for (const PreferenceRecord& r : records) {
    const double s = params.phi.dot(feature_difference(world, r.triple));
    total -= log_sigmoid(r.winner == Winner::First ? s : -s);
  }
  return total / static_cast<double>(records.size()) +
         0.5 * ridge * params.phi.squaredNorm();
}

inline RewardParams fit_single_reward(std::span<const PreferenceRecord> records,
                                      const FeatureWorld& world,
                                      const FitConfig& config) {
  if (records.empty()) throw DomainError("fit_single_reward needs at least one record");
  return RewardParams(detail::minimize_soft_label(
      detail::empirical_terms(records, world), world.dim(), config));
}

// Exact expected cross-entropy between the population mixture and p_phi.
inline double population_ce(const RewardParams& params, const Population& pop,
                            const std::vector<ComparisonTriple>& triples) {
  if (params.dim() != pop.world().dim()) throw DomainError("parameter dimension mismatch");
  return detail::soft_label_loss(params.phi, detail::population_terms(pop, triples), 0.0);
}

// The KL projection of the mixture onto the Bradley-Terry family: the
// infinite-data limit of single-reward MLE.
inline RewardParams fit_population_reward(const Population& pop,
                                          const std::vector<ComparisonTriple>& triples,
                                          const FitConfig& config) {
  return RewardParams(detail::minimize_soft_label(
      detail::population_terms(pop, triples), pop.world().dim(), config));
}

struct EmIteration {
  int changed = 0;
  double loglik = 0.0;  // ridge-penalized total log-likelihood after the E-step
  std::vector<int> empty_clusters;
};

struct MixtureRewardModel {
  std::vector<RewardParams> cluster_params;
  std::map<int, int> assignment;  // annotator -> cluster
  std::vector<EmIteration> history;
  int restart = 0;

  std::size_t k() const { return cluster_params.size(); }
  double final_loglik() const {
    return history.empty() ? -std::numeric_limits<double>::infinity()
                           : history.back().loglik;
  }
};

namespace detail {

struct AnnotatorCounts {
  int annotator = 0;
  std::vector<PreferenceRecord> records;
  std::vector<std::size_t> term_index;
  std::vector<double> wins;
  std::vector<double> total;
};

inline std::vector<AnnotatorCounts> group_by_annotator(
    std::span<const PreferenceRecord> records,
    const std::map<ComparisonTriple, std::size_t>& triple_index) {
  std::map<int, AnnotatorCounts> by_id;
  for (const PreferenceRecord& r : records) {
    AnnotatorCounts& a = by_id[r.annotator];
    a.annotator = r.annotator;
    a.records.push_back(r);
  }
  std::vector<AnnotatorCounts> out;
  for (auto& [id, a] : by_id) {
    std::map<std::size_t, std::pair<double, double>> counts;
    for (const PreferenceRecord& r : a.records) {
      auto& c = counts[triple_index.at(r.triple)];
      if (r.winner == Winner::First) c.first += 1.0;
      c.second += 1.0;
    }
    for (const auto& [i, c] : counts) {
      a.term_index.push_back(i);
      a.wins.push_back(c.first);
      a.total.push_back(c.second);
    }
    out.push_back(std::move(a));
  }
  return out;
}

// Sum of log w over the annotator's records minus the per-record ridge
// penalty, so E- and M-steps ascend the same objective.
inline double annotator_loglik(const AnnotatorCounts& a, const Vector& margins,
                               double penalty_per_record) {
  double ll = 0.0;
  double n = 0.0;
  for (std::size_t k = 0; k < a.term_index.size(); ++k) {
    const double s = margins[static_cast<Eigen::Index>(a.term_index[k])];
    ll += a.wins[k] * log_sigmoid(s) + (a.total[k] - a.wins[k]) * log_sigmoid(-s);
    n += a.total[k];
  }
  return ll - n * penalty_per_record;
}

}  // namespace detail

// Hard EM over annotators. Each restart starts from a seeded uniform random
// assignment (or from `pretrained` cluster parameters, E-step first) and
// alternates M-step refits with hard E-step reassignment until no annotator
// moves or config.max_iters is reached. The restart with the highest final
// log-likelihood wins; ties go to the lower restart index.
inline MixtureRewardModel em_fit(
    std::span<const PreferenceRecord> records, const FeatureWorld& world, int k,
    const FitConfig& config, int restarts, std::uint64_t seed,
    const std::optional<std::vector<RewardParams>>& pretrained = std::nullopt) {
  config.validate();
  if (k < 1) throw DomainError("em_fit needs K >= 1");
  if (restarts < 1) throw DomainError("em_fit needs at least one restart");
  if (records.empty()) throw DomainError("em_fit needs records");
  if (pretrained && pretrained->size() != static_cast<std::size_t>(k)) {
    throw DomainError("pretrained parameters must have K entries");
  }

  const std::vector<ComparisonTriple> triples = enumerate_comparisons(world);
  std::map<ComparisonTriple, std::size_t> triple_index;
  Matrix diffs(world.dim(), static_cast<Eigen::Index>(triples.size()));
  for (std::size_t i = 0; i < triples.size(); ++i) {
    triple_index[triples[i]] = i;
    diffs.col(static_cast<Eigen::Index>(i)) = feature_difference(world, triples[i]);
  }
  const std::vector<detail::AnnotatorCounts> annotators =
      detail::group_by_annotator(records, triple_index);
  const std::size_t kk = static_cast<std::size_t>(k);

  auto e_step = [&](const std::vector<RewardParams>& params,
                    std::vector<int>& assign) {
    std::vector<Vector> margins(kk);
    std::vector<double> penalty(kk);
    for (std::size_t c = 0; c < kk; ++c) {
      margins[c] = diffs.transpose() * params[c].phi;
      penalty[c] = 0.5 * config.ridge * params[c].phi.squaredNorm();
    }
    int changed = 0;
    double total = 0.0;
    for (std::size_t h = 0; h < annotators.size(); ++h) {
      int best = 0;
      double best_ll = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < kk; ++c) {
        const double ll = detail::annotator_loglik(annotators[h], margins[c], penalty[c]);
        if (ll > best_ll) {
          best_ll = ll;
          best = static_cast<int>(c);
        }
      }
      if (assign[h] != best) ++changed;
      assign[h] = best;
      total += best_ll;
    }
    return std::pair{changed, total};
  };

  std::optional<MixtureRewardModel> best_model;
  for (int r = 0; r < restarts; ++r) {
    std::vector<RewardParams> params(kk, RewardParams::zeros(world.dim()));
    std::vector<int> assign(annotators.size(), -1);
    if (pretrained) {
      params = *pretrained;
      e_step(params, assign);
    } else {
      std::mt19937_64 rng = substream(seed, "em-restart", static_cast<std::uint64_t>(r));
      std::uniform_int_distribution<int> pick(0, k - 1);
      for (int& a : assign) a = pick(rng);
    }

    MixtureRewardModel model;
    model.restart = r;
    for (int iter = 0; iter < config.max_iters; ++iter) {
      EmIteration step;
      for (std::size_t c = 0; c < kk; ++c) {
        std::vector<PreferenceRecord> cluster_records;
        for (std::size_t h = 0; h < annotators.size(); ++h) {
          if (assign[h] == static_cast<int>(c)) {
            cluster_records.insert(cluster_records.end(), annotators[h].records.begin(),
                                   annotators[h].records.end());
          }
        }
        if (cluster_records.empty()) {
          step.empty_clusters.push_back(static_cast<int>(c));
          continue;
        }
        FitConfig warm = config;
        warm.init = params[c];
        params[c] = fit_single_reward(cluster_records, world, warm);
      }
      const auto [changed, total] = e_step(params, assign);
      step.changed = changed;
      step.loglik = total;
      model.history.push_back(std::move(step));
      if (changed == 0) break;
    }
    model.cluster_params = params;
    for (std::size_t h = 0; h < annotators.size(); ++h) {
      model.assignment[annotators[h].annotator] = assign[h];
    }
    if (!best_model || model.final_loglik() > best_model->final_loglik()) {
      best_model = std::move(model);
    }
  }
  return *best_model;
}

// Best fraction of annotators whose cluster matches their hidden group over all
// cluster-to-group relabelings.
inline double cluster_accuracy(const MixtureRewardModel& model,
                               const std::map<int, int>& hidden_labels) {
  if (model.assignment.empty()) throw DomainError("model has no assignments");
  int num_labels = 0;
  for (const auto& [annotator, cluster] : model.assignment) {
    const auto it = hidden_labels.find(annotator);
    if (it == hidden_labels.end()) {
      throw DomainError("annotator " + std::to_string(annotator) +
                        " missing from the label table");
    }
    num_labels = std::max(num_labels, it->second + 1);
  }
  const int n = std::max(static_cast<int>(model.k()), num_labels);
  if (n > 8) throw DomainError("cluster_accuracy supports at most 8 clusters/groups");
  std::vector<int> perm(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<std::size_t>(i)] = i;
  std::size_t best = 0;
  do {
    std::size_t hits = 0;
    for (const auto& [annotator, cluster] : model.assignment) {
      if (perm[static_cast<std::size_t>(cluster)] == hidden_labels.at(annotator)) ++hits;
    }
    best = std::max(best, hits);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return static_cast<double>(best) / static_cast<double>(model.assignment.size());
}

}  // namespace divpref
