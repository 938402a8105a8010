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

// Finite preference world: prompts, responses and their feature embedding,
// linear rewards r(y, x) = <phi, psi(y, x)> and Bradley-Terry probabilities.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "divpref/error.hpp"
#include "divpref/random.hpp"

namespace divpref {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct RewardParams {
  Vector phi;

  RewardParams() = default;
  explicit RewardParams(Vector v) : phi(std::move(v)) {}

  static RewardParams zeros(Eigen::Index dim) {
    return RewardParams(Vector::Zero(dim));
  }
  Eigen::Index dim() const { return phi.size(); }
};

struct Response {
  std::string id;
  Vector features;
};

struct Prompt {
  std::string id;
  double weight = 0.0;
  std::vector<Response> responses;
};

// Canonical unordered comparison (first precedes second in the prompt's
// response list). Indices, not ids.
struct ComparisonTriple {
  std::size_t prompt = 0;
  std::size_t first = 0;
  std::size_t second = 0;

  auto operator<=>(const ComparisonTriple&) const = default;
};

class FeatureWorld {
 public:
  FeatureWorld(int dim, std::vector<Prompt> prompts)
      : dim_(dim), prompts_(std::move(prompts)) {
    if (dim_ <= 0) throw StructuralError("world dimension must be positive");
    if (prompts_.empty()) throw StructuralError("world has no prompts");
    std::set<std::string> prompt_ids;
    double weight_sum = 0.0;
    for (const Prompt& p : prompts_) {
      if (!prompt_ids.insert(p.id).second) {
        throw StructuralError("duplicate prompt id '" + p.id + "'");
      }
      if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
        throw StructuralError("prompt '" + p.id + "' has a negative weight");
      }
      weight_sum += p.weight;
      if (p.responses.size() < 2) {
        throw StructuralError("prompt '" + p.id +
                              "' needs at least two responses");
      }
      std::set<std::string> response_ids;
      for (const Response& r : p.responses) {
        if (!response_ids.insert(r.id).second) {
          throw StructuralError("duplicate response id '" + r.id +
                                "' in prompt '" + p.id + "'");
        }
        if (r.features.size() != dim_) {
          throw StructuralError("response '" + r.id + "' in prompt '" + p.id +
                                "' has the wrong feature dimension");
        }
        if (!r.features.allFinite()) {
          throw StructuralError("non-finite feature in response '" + r.id + "'");
        }
        feature_bound_ = std::max(feature_bound_, r.features.norm());
      }
    }
    if (std::abs(weight_sum - 1.0) > 1e-12) {
      throw StructuralError("prompt weights must sum to 1");
    }
    if (!(feature_bound_ > 0.0)) {
      throw StructuralError("all feature vectors are zero");
    }
  }

  // Assigns uniform prompt weights before validating.
  static FeatureWorld with_uniform_weights(int dim, std::vector<Prompt> prompts) {
    const double w = prompts.empty() ? 0.0 : 1.0 / static_cast<double>(prompts.size());
    for (Prompt& p : prompts) p.weight = w;
    return FeatureWorld(dim, std::move(prompts));
  }

  int dim() const { return dim_; }
  double feature_bound() const { return feature_bound_; }
  const std::vector<Prompt>& prompts() const { return prompts_; }
  std::size_t num_prompts() const { return prompts_.size(); }

  const Prompt& prompt(std::size_t x) const {
    if (x >= prompts_.size()) throw LookupError("prompt index out of range");
    return prompts_[x];
  }
  std::size_t num_responses(std::size_t x) const {
    return prompt(x).responses.size();
  }
  double prompt_weight(std::size_t x) const { return prompt(x).weight; }

  const Vector& features(std::size_t x, std::size_t y) const {
    const Prompt& p = prompt(x);
    if (y >= p.responses.size()) {
      throw LookupError("response index out of range for prompt '" + p.id + "'");
    }
    return p.responses[y].features;
  }

  std::size_t prompt_index(const std::string& id) const {
    for (std::size_t x = 0; x < prompts_.size(); ++x) {
      if (prompts_[x].id == id) return x;
    }
    throw LookupError("unknown prompt '" + id + "'");
  }
  std::size_t response_index(std::size_t x, const std::string& id) const {
    const Prompt& p = prompt(x);
    for (std::size_t y = 0; y < p.responses.size(); ++y) {
      if (p.responses[y].id == id) return y;
    }
    throw LookupError("unknown response '" + id + "' in prompt '" + p.id + "'");
  }

  // Content hash used to tie datasets to the world that generated them.
  std::string fingerprint() const {
    std::string bytes = std::to_string(dim_);
    for (const Prompt& p : prompts_) {
      bytes += '|' + p.id;
      for (const Response& r : p.responses) {
        bytes += '/' + r.id;
        for (Eigen::Index k = 0; k < r.features.size(); ++k) {
          double v = r.features[k];
          char raw[sizeof(double)];
          std::memcpy(raw, &v, sizeof(double));
          bytes.append(raw, sizeof(double));
        }
      }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(bytes)));
    return hex;
  }

 private:
  int dim_;
  std::vector<Prompt> prompts_;
  double feature_bound_ = 0.0;
};

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow or cancellation.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

inline double linear_reward(const RewardParams& params, const FeatureWorld& world,
                            std::size_t prompt, std::size_t response) {
  const Vector& psi = world.features(prompt, response);
  if (params.dim() != world.dim()) {
    throw DomainError("reward parameter dimension does not match the world");
  }
  return params.phi.dot(psi);
}

// Bradley-Terry probability that the first response wins.
inline double bt_prob(double r_first, double r_second) {
  if (!std::isfinite(r_first) || !std::isfinite(r_second)) {
    throw DomainError("Bradley-Terry rewards must be finite");
  }
  return sigmoid(r_first - r_second);
}

inline Vector feature_difference(const FeatureWorld& world,
                                 const ComparisonTriple& z) {
  return world.features(z.prompt, z.first) - world.features(z.prompt, z.second);
}

// p_phi(first > second | prompt).
inline double pref_prob(const RewardParams& params, const FeatureWorld& world,
                        const ComparisonTriple& z) {
  return bt_prob(linear_reward(params, world, z.prompt, z.first),
                 linear_reward(params, world, z.prompt, z.second));
}

inline std::vector<ComparisonTriple> enumerate_comparisons(
    const FeatureWorld& world) {
  std::vector<ComparisonTriple> out;
  for (std::size_t x = 0; x < world.num_prompts(); ++x) {
    const std::size_t n = world.num_responses(x);
    if (n < 2) {
      throw StructuralError("prompt '" + world.prompt(x).id +
                            "' has fewer than two responses");
    }
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) out.push_back({x, a, b});
    }
  }
  return out;
}

// Expectation weights for a list of triples: prompt weight split uniformly over
// that prompt's triples in the list, renormalized to sum to one.
inline std::vector<double> triple_weights(const FeatureWorld& world,
                                          const std::vector<ComparisonTriple>& triples) {
  if (triples.empty()) throw DomainError("empty comparison list");
  std::vector<std::size_t> per_prompt(world.num_prompts(), 0);
  for (const ComparisonTriple& z : triples) {
    world.features(z.prompt, z.first);
    world.features(z.prompt, z.second);
    ++per_prompt[z.prompt];
  }
  std::vector<double> w(triples.size());
  double total = 0.0;
  for (std::size_t i = 0; i < triples.size(); ++i) {
    w[i] = world.prompt_weight(triples[i].prompt) /
           static_cast<double>(per_prompt[triples[i].prompt]);
    total += w[i];
  }
  if (!(total > 0.0)) throw DomainError("comparison list has zero total weight");
  for (double& v : w) v /= total;
  return w;
}

}  // namespace divpref
