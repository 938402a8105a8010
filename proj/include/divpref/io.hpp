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

// JSON, JSONL and CSV serialization plus the plain-text grid map format.

#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "divpref/analysis.hpp"
#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/gridworld.hpp"
#include "divpref/maxmin.hpp"
#include "divpref/policy.hpp"
#include "divpref/reward.hpp"
#include "divpref/synthpop.hpp"

namespace divpref::io {

using nlohmann::json;

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LookupError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LookupError("cannot write " + path);
  out << text;
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(origin, e.what());
  }
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vector vector_from(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ConfigError(field, "expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

template <class T>
T field(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(path + "." + key, "missing field");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "wrong type");
  }
}

template <class T>
T field_or(const json& j, const std::string& key, const std::string& path, T fallback) {
  return (j.is_object() && j.contains(key)) ? field<T>(j, key, path) : fallback;
}

// ---------------------------------------------------------------- world

inline json world_json(const FeatureWorld& world) {
  json prompts = json::array();
  for (const Prompt& p : world.prompts()) {
    json responses = json::array();
    for (const Response& r : p.responses) {
      responses.push_back({{"id", r.id}, {"features", vector_json(r.features)}});
    }
    prompts.push_back({{"id", p.id}, {"weight", p.weight}, {"responses", responses}});
  }
  return {{"dim", world.dim()}, {"prompts", prompts}};
}

inline FeatureWorld world_from(const json& j, const std::string& path = "world") {
  const int dim = field<int>(j, "dim", path);
  if (!j.contains("prompts") || !j["prompts"].is_array()) {
    throw ConfigError(path + ".prompts", "expected an array");
  }
  std::vector<Prompt> prompts;
  for (std::size_t x = 0; x < j["prompts"].size(); ++x) {
    const json& pj = j["prompts"][x];
    const std::string pp = path + ".prompts[" + std::to_string(x) + "]";
    Prompt p{field<std::string>(pj, "id", pp), field<double>(pj, "weight", pp), {}};
    if (!pj.contains("responses") || !pj["responses"].is_array()) {
      throw ConfigError(pp + ".responses", "expected an array");
    }
    for (std::size_t y = 0; y < pj["responses"].size(); ++y) {
      const json& rj = pj["responses"][y];
      const std::string rp = pp + ".responses[" + std::to_string(y) + "]";
      if (!rj.contains("features")) throw ConfigError(rp + ".features", "missing field");
      p.responses.push_back({field<std::string>(rj, "id", rp), vector_from(rj["features"], rp + ".features")});
    }
    prompts.push_back(std::move(p));
  }
  try {
    return FeatureWorld(dim, std::move(prompts));
  } catch (const StructuralError& e) {
    throw ConfigError(path, e.what());
  }
}

// ----------------------------------------------------------- population

inline json groups_json(const Population& pop) {
  json groups = json::array();
  for (const GroupSpec& g : pop.groups()) {
    groups.push_back({{"id", g.group_id},
                      {"phi", vector_json(g.phi_star.phi)},
                      {"eta", g.eta},
                      {"annotators", g.annotator_count}});
  }
  return groups;
}

inline std::vector<GroupSpec> groups_from(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path, "expected a non-empty array");
  std::vector<GroupSpec> groups;
  for (std::size_t u = 0; u < j.size(); ++u) {
    const std::string gp = path + "[" + std::to_string(u) + "]";
    if (!j[u].contains("phi")) throw ConfigError(gp + ".phi", "missing field");
    groups.push_back({field_or<int>(j[u], "id", gp, static_cast<int>(u)),
                      RewardParams(vector_from(j[u]["phi"], gp + ".phi")),
                      field<double>(j[u], "eta", gp), field_or<int>(j[u], "annotators", gp, 1)});
  }
  return groups;
}

// -------------------------------------------------------------- dataset

inline std::string dataset_jsonl(const PreferenceDataset& data, const FeatureWorld& world) {
  std::string out;
  for (const PreferenceRecord& r : data.records()) {
    const Prompt& p = world.prompt(r.triple.prompt);
    json line = {{"annotator", r.annotator},
                 {"prompt", p.id},
                 {"first", p.responses.at(r.triple.first).id},
                 {"second", p.responses.at(r.triple.second).id},
                 {"winner", r.winner == Winner::First ? "first" : "second"}};
    out += line.dump() + "\n";
  }
  return out;
}

inline std::string labels_jsonl(const PreferenceDataset& data) {
  std::string out;
  for (const auto& [annotator, group] : data.hidden_labels()) {
    out += json{{"annotator", annotator}, {"group", group}}.dump() + "\n";
  }
  return out;
}

inline std::vector<json> read_jsonl(const std::string& text, const std::string& origin) {
  std::vector<json> out;
  std::istringstream in(text);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(parse_json(line, origin + ":" + std::to_string(n)));
  }
  return out;
}

// Labels are optional; without them every annotator maps to group -1.
inline PreferenceDataset dataset_from(const std::string& records_text,
                                      const std::string& labels_text,
                                      const FeatureWorld& world) {
  std::map<int, int> labels;
  for (const json& j : read_jsonl(labels_text, "labels")) {
    labels[field<int>(j, "annotator", "labels")] = field<int>(j, "group", "labels");
  }
  std::vector<PreferenceRecord> records;
  int line = 0;
  for (const json& j : read_jsonl(records_text, "dataset")) {
    const std::string path = "dataset[" + std::to_string(line++) + "]";
    const std::size_t x = world.prompt_index(field<std::string>(j, "prompt", path));
    std::size_t a = world.response_index(x, field<std::string>(j, "first", path));
    std::size_t b = world.response_index(x, field<std::string>(j, "second", path));
    const std::string w = field<std::string>(j, "winner", path);
    if (w != "first" && w != "second") throw ConfigError(path + ".winner", "expected first or second");
    Winner winner = w == "first" ? Winner::First : Winner::Second;
    if (a == b) throw ConfigError(path, "a response cannot be compared with itself");
    if (a > b) {
      std::swap(a, b);
      winner = winner == Winner::First ? Winner::Second : Winner::First;
    }
    const int annotator = field<int>(j, "annotator", path);
    labels.try_emplace(annotator, -1);
    records.push_back({annotator, {x, a, b}, winner});
  }
  return PreferenceDataset(std::move(records), std::move(labels), world.fingerprint());
}

// ---------------------------------------------------------------- models

inline json fit_config_json(const FitConfig& c) {
  return {{"ridge", c.ridge}, {"grad_tol", c.grad_tol}, {"max_iters", c.max_iters}};
}

inline FitConfig fit_config_from(const json& j, const std::string& path = "fit") {
  FitConfig c;
  c.ridge = field_or<double>(j, "ridge", path, c.ridge);
  c.grad_tol = field_or<double>(j, "grad_tol", path, c.grad_tol);
  c.max_iters = field_or<int>(j, "max_iters", path, c.max_iters);
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

inline const char* mode_name(MaxMinMode m) {
  switch (m) {
    case MaxMinMode::Iterate: return "iterate";
    case MaxMinMode::Dual: return "dual";
    case MaxMinMode::Both: return "both";
  }
  return "both";
}

inline json maxmin_config_json(const MaxMinConfig& c) {
  return {{"steps", c.steps}, {"step_size0", c.step_size0}, {"tol", c.tol}, {"mode", mode_name(c.mode)}};
}

inline MaxMinConfig maxmin_config_from(const json& j, const std::string& path = "maxmin") {
  MaxMinConfig c;
  c.steps = field_or<int>(j, "steps", path, c.steps);
  c.step_size0 = field_or<double>(j, "step_size0", path, c.step_size0);
  c.tol = field_or<double>(j, "tol", path, c.tol);
  const std::string mode = field_or<std::string>(j, "mode", path, mode_name(c.mode));
  if (mode == "iterate") {
    c.mode = MaxMinMode::Iterate;
  } else if (mode == "dual") {
    c.mode = MaxMinMode::Dual;
  } else if (mode == "both") {
    c.mode = MaxMinMode::Both;
  } else {
    throw ConfigError(path + ".mode", "expected iterate, dual or both");
  }
  try {
    c.validate();
  } catch (const DomainError& e) {
    throw ConfigError(path, e.what());
  }
  return c;
}

inline json params_json(const RewardParams& p) { return vector_json(p.phi); }

inline json mixture_json(const MixtureRewardModel& m) {
  json params = json::array();
  for (const RewardParams& p : m.cluster_params) params.push_back(params_json(p));
  json assignment = json::object();
  for (const auto& [annotator, cluster] : m.assignment) {
    assignment[std::to_string(annotator)] = cluster;
  }
  json history = json::array();
  for (const EmIteration& it : m.history) {
    history.push_back({{"changed", it.changed}, {"loglik", it.loglik}, {"empty_clusters", it.empty_clusters}});
  }
  return {{"k", m.k()}, {"restart", m.restart}, {"params", params},
          {"assignment", assignment}, {"history", history}};
}

inline MixtureRewardModel mixture_from(const json& j, const std::string& path = "model") {
  MixtureRewardModel m;
  const json params = field<json>(j, "params", path);
  for (std::size_t u = 0; u < params.size(); ++u) {
    m.cluster_params.emplace_back(vector_from(params[u], path + ".params[" + std::to_string(u) + "]"));
  }
  const json assignment = field_or<json>(j, "assignment", path, json::object());
  for (const auto& [key, value] : assignment.items()) {
    try {
      m.assignment[std::stoi(key)] = value.get<int>();
    } catch (const std::exception&) {
      throw ConfigError(path + ".assignment." + key, "expected annotator id -> cluster index");
    }
  }
  m.restart = field_or<int>(j, "restart", path, 0);
  return m;
}

inline json policy_json(const Policy& pi, const FeatureWorld& world) {
  json out = json::object();
  for (std::size_t x = 0; x < world.num_prompts(); ++x) {
    json row = json::object();
    for (std::size_t y = 0; y < world.num_responses(x); ++y) {
      row[world.prompt(x).responses[y].id] = pi.prob(x, y);
    }
    out[world.prompt(x).id] = row;
  }
  return out;
}

inline json maxmin_json(const MaxMinResult& r, const FeatureWorld& world) {
  json trace = json::array();
  for (const MaxMinTraceEntry& e : r.trace) {
    json t = {{"group", e.group}, {"objective", e.objective}, {"group_reward", e.group_reward},
              {"kl", e.kl}, {"step_size", e.step_size}, {"rejected_steps", e.rejected_steps}};
    if (e.dual_value) t["dual_value"] = *e.dual_value;
    trace.push_back(t);
  }
  json out = {{"policy", policy_json(r.policy, world)}, {"objective", r.objective},
              {"group", r.group}, {"trace", trace}};
  if (r.lambda) out["lambda"] = *r.lambda;
  if (r.duality_gap) out["duality_gap"] = *r.duality_gap;
  if (r.iterate_objective) out["iterate_objective"] = *r.iterate_objective;
  return out;
}

inline json bound_json(const BoundReport& b) {
  return {{"status", to_string(b.status)}, {"lhs", b.lhs}, {"rhs_stated", b.rhs_stated},
          {"rhs_proof", b.rhs_proof}, {"holds_stated", b.holds_stated()},
          {"holds_proof", b.holds_proof()}, {"witnesses", b.witnesses}, {"note", b.note}};
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "ratio,seed,acc_total,acc_majority,acc_minority,util_min_single,util_min_maxmin\n";
  for (const SweepRow& r : rows) {
    out += std::to_string(r.ratio) + "," + std::to_string(r.seed) + "," + fmt(r.acc_total) + "," +
           fmt(r.acc_majority) + "," + fmt(r.acc_minority) + "," + fmt(r.util_min_single) + "," +
           fmt(r.util_min_maxmin) + "\n";
  }
  return out;
}

// ------------------------------------------------------------- grid map

struct GridMap {
  grid::GridSpec spec;
  std::set<grid::Cell> region_a;
  std::set<grid::Cell> region_b;
};

// '#' wall, 'S' start, 'A' / 'B' group goods cells (terminal), '.' floor.
// Rows may be ragged; missing cells are walls.
inline GridMap parse_map(const std::string& text, double discount, int max_horizon) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw ConfigError("map", "empty map");
  int width = 0;
  for (const std::string& r : rows) width = std::max(width, static_cast<int>(r.size()));
  std::set<grid::Cell> walls, a, b;
  std::optional<grid::Cell> start;
  for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
    for (int c = 0; c < width; ++c) {
      const char ch = c < static_cast<int>(rows[r].size()) ? rows[r][c] : '#';
      switch (ch) {
        case '#': walls.insert({r, c}); break;
        case 'A': a.insert({r, c}); break;
        case 'B': b.insert({r, c}); break;
        case '.': break;
        case 'S':
          if (start) throw ConfigError("map", "more than one start cell");
          start = grid::Cell{r, c};
          break;
        default:
          throw ConfigError("map", std::string("unknown map character '") + ch + "'");
      }
    }
  }
  if (!start) throw ConfigError("map", "no start cell");
  std::set<grid::Cell> terminals = a;
  terminals.insert(b.begin(), b.end());
  try {
    return {grid::GridSpec(width, static_cast<int>(rows.size()), walls, *start, terminals,
                           discount, max_horizon),
            a, b};
  } catch (const StructuralError& e) {
    throw ConfigError("map", e.what());
  }
}

inline json trajectory_json(const std::vector<grid::Cell>& path) {
  json out = json::array();
  for (const grid::Cell& c : path) out.push_back({c.first, c.second});
  return out;
}

}  // namespace divpref::io
