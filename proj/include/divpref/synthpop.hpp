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

// Ground-truth sub-populations and synthetic annotator datasets.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/random.hpp"

namespace divpref {

struct GroupSpec {
  int group_id = 0;
  RewardParams phi_star;
  double eta = 0.0;
  int annotator_count = 1;
};

class Population {
 public:
  Population(FeatureWorld world, std::vector<GroupSpec> groups)
      : world_(std::move(world)), groups_(std::move(groups)) {
    if (groups_.empty()) throw StructuralError("population has no groups");
    double eta_sum = 0.0;
    for (std::size_t u = 0; u < groups_.size(); ++u) {
      const GroupSpec& g = groups_[u];
      if (g.group_id != static_cast<int>(u)) {
        throw StructuralError("group ids must be contiguous from 0");
      }
      if (!(g.eta > 0.0 && g.eta <= 1.0)) {
        throw StructuralError("group eta must lie in (0, 1]");
      }
      if (g.annotator_count < 1) {
        throw StructuralError("group annotator_count must be positive");
      }
      if (g.phi_star.dim() != world_.dim()) {
        throw StructuralError("group reward dimension does not match the world");
      }
      eta_sum += g.eta;
    }
    if (std::abs(eta_sum - 1.0) > 1e-12) {
      throw StructuralError("group etas must sum to 1");
    }
  }

  const FeatureWorld& world() const { return world_; }
  const std::vector<GroupSpec>& groups() const { return groups_; }
  std::size_t num_groups() const { return groups_.size(); }

  const GroupSpec& group(int u) const {
    if (u < 0 || static_cast<std::size_t>(u) >= groups_.size()) {
      throw LookupError("unknown group " + std::to_string(u));
    }
    return groups_[static_cast<std::size_t>(u)];
  }

 private:
  FeatureWorld world_;
  std::vector<GroupSpec> groups_;
};

enum class Winner { First, Second };

struct PreferenceRecord {
  int annotator = 0;
  ComparisonTriple triple;
  Winner winner = Winner::First;

  bool operator==(const PreferenceRecord&) const = default;
};

// Records plus the hidden annotator -> group table. Fitting code only ever
// receives records(); hidden_labels() is for evaluation.
class PreferenceDataset {
 public:
  PreferenceDataset(std::vector<PreferenceRecord> records,
                    std::map<int, int> hidden_labels, std::string world_ref)
      : records_(std::move(records)),
        labels_(std::move(hidden_labels)),
        world_ref_(std::move(world_ref)) {
    for (const PreferenceRecord& r : records_) {
      if (!labels_.contains(r.annotator)) {
        throw StructuralError("record annotator " + std::to_string(r.annotator) +
                              " missing from the annotator table");
      }
      if (r.triple.first >= r.triple.second) {
        throw StructuralError("record triple is not in canonical order");
      }
    }
  }

  std::span<const PreferenceRecord> records() const { return records_; }
  const std::map<int, int>& hidden_labels() const { return labels_; }
  const std::string& world_ref() const { return world_ref_; }

 private:
  std::vector<PreferenceRecord> records_;
  std::map<int, int> labels_;
  std::string world_ref_;
};

inline double group_pref_prob(const Population& pop, int u,
                              const ComparisonTriple& z) {
  return pref_prob(pop.group(u).phi_star, pop.world(), z);
}

// Population preference as the eta-weighted mixture of group preferences.
inline double mixture_pref_prob(const Population& pop, const ComparisonTriple& z) {
  double p = 0.0;
  for (const GroupSpec& g : pop.groups()) {
    p += g.eta * group_pref_prob(pop, g.group_id, z);
  }
  return p;
}

// Annotators are numbered group by group (group 0 first). Each annotator draws
// from its own (seed, annotator id) substream.
inline PreferenceDataset sample_dataset(const Population& pop,
                                        int comparisons_per_annotator,
                                        std::uint64_t seed) {
  if (comparisons_per_annotator < 1) {
    throw DomainError("comparisons_per_annotator must be at least 1");
  }
  const std::vector<ComparisonTriple> triples = enumerate_comparisons(pop.world());
  std::vector<PreferenceRecord> records;
  std::map<int, int> labels;
  int annotator = 0;
  for (const GroupSpec& g : pop.groups()) {
    std::vector<double> p_first(triples.size());
    for (std::size_t i = 0; i < triples.size(); ++i) {
      p_first[i] = group_pref_prob(pop, g.group_id, triples[i]);
    }
    for (int a = 0; a < g.annotator_count; ++a, ++annotator) {
      labels[annotator] = g.group_id;
      std::mt19937_64 rng =
          substream(seed, "annotator", static_cast<std::uint64_t>(annotator));
      std::uniform_int_distribution<std::size_t> pick(0, triples.size() - 1);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      for (int c = 0; c < comparisons_per_annotator; ++c) {
        const std::size_t i = pick(rng);
        const Winner w = unit(rng) < p_first[i] ? Winner::First : Winner::Second;
        records.push_back({annotator, triples[i], w});
      }
    }
  }
  return PreferenceDataset(std::move(records), std::move(labels),
                           pop.world().fingerprint());
}

}  // namespace divpref
