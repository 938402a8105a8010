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

// Experiment configuration and the stage runner behind the command-line tool.

#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "divpref/analysis.hpp"
#include "divpref/core.hpp"
#include "divpref/error.hpp"
#include "divpref/gridworld.hpp"
#include "divpref/instances.hpp"
#include "divpref/io.hpp"
#include "divpref/maxmin.hpp"
#include "divpref/policy.hpp"
#include "divpref/random.hpp"
#include "divpref/reward.hpp"
#include "divpref/synthpop.hpp"

#ifndef DIVPREF_VERSION
#define DIVPREF_VERSION "0.1.0"
#endif

namespace divpref {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kDefaultMap =
    "###########\n"
    "#AA.....BB#\n"
    "#AA.....BB#\n"
    "#.........#\n"
    "#...###...#\n"
    "#.........#\n"
    "#....S....#\n"
    "###########\n";

struct SweepSpec {
  std::vector<int> ratios{1, 2, 6, 10};
  int annotators_base = 30;
  int comparisons = 50;
  int seeds = 10;
  std::optional<FeatureWorld> world;  // nullopt: arc_world()
  Vector majority = (Vector(2) << 3.0, 0.9).finished();
  Vector minority = (Vector(2) << 0.9, 3.0).finished();
};

struct GridConfig {
  std::string map = "default";  // "default" or a path to a map file
  double discount = 0.95;
  int max_horizon = 200;
  double beta = 0.05;
  double reward_a = 1.0;
  double reward_b = 1.0;
  double tol = 1e-6;
};

struct ExperimentConfig {
  std::optional<std::string> world_file;
  FeatureWorld world = two_arm_population().world();
  std::vector<GroupSpec> groups = two_arm_population().groups();
  int comparisons = 50;
  std::uint64_t seed = 0;
  FitConfig fit;
  int k = 2;
  int restarts = 5;
  double beta = 1.0;
  MaxMinConfig maxmin;
  SweepSpec sweep;
  GridConfig grid;
  std::string output_dir = "out";
  fs::path base_dir = ".";  // directory relative paths resolve against

  Population population() const { return Population(world, groups); }
};

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Every field that affects results; output_dir and base_dir are excluded.
inline json config_json(const ExperimentConfig& c) {
  json j;
  if (c.world_file) {
    j["world_file"] = *c.world_file;
  } else {
    j["world"] = io::world_json(c.world);
  }
  json groups = json::array();
  for (const GroupSpec& g : c.groups) {
    groups.push_back({{"id", g.group_id}, {"phi", io::vector_json(g.phi_star.phi)},
                      {"eta", g.eta}, {"annotators", g.annotator_count}});
  }
  j["population"] = {{"groups", groups}};
  j["sampling"] = {{"comparisons", c.comparisons}, {"seed", c.seed}};
  j["fit"] = io::fit_config_json(c.fit);
  j["em"] = {{"k", c.k}, {"restarts", c.restarts}};
  j["beta"] = c.beta;
  j["maxmin"] = io::maxmin_config_json(c.maxmin);
  json sweep = {{"ratios", c.sweep.ratios},
                {"annotators_base", c.sweep.annotators_base},
                {"comparisons", c.sweep.comparisons},
                {"seeds", c.sweep.seeds},
                {"majority", io::vector_json(c.sweep.majority)},
                {"minority", io::vector_json(c.sweep.minority)}};
  if (c.sweep.world) sweep["world"] = io::world_json(*c.sweep.world);
  j["sweep"] = sweep;
  j["gridworld"] = {{"map", c.grid.map}, {"discount", c.grid.discount},
                    {"max_horizon", c.grid.max_horizon}, {"beta", c.grid.beta},
                    {"reward_a", c.grid.reward_a}, {"reward_b", c.grid.reward_b},
                    {"tol", c.grid.tol}};
  return j;
}

inline json full_config_json(const ExperimentConfig& c) {
  json j = config_json(c);
  j["output_dir"] = c.output_dir;
  return j;
}

inline std::string config_hash(const ExperimentConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(config_json(c).dump())));
  return buf;
}

inline ExperimentConfig config_from(const json& j, const fs::path& base_dir = ".") {
  if (!j.is_object()) throw ConfigError("config", "expected an object");
  static const std::set<std::string> known{"world",  "world_file", "population", "sampling",
                                           "fit",    "em",         "beta",       "maxmin",
                                           "sweep",  "gridworld",  "output_dir"};
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError(key, "unknown field");
  }
  ExperimentConfig c;
  c.base_dir = base_dir;
  if (j.contains("world") && j.contains("world_file")) {
    throw ConfigError("world_file", "give either world or world_file, not both");
  }
  if (j.contains("world_file")) {
    c.world_file = io::field<std::string>(j, "world_file", "config");
    const fs::path path = resolve(base_dir, *c.world_file);
    if (!fs::exists(path)) throw ConfigError("world_file", "file not found: " + path.string());
    c.world = io::world_from(io::parse_json(io::read_file(path.string()), "world_file"), "world_file");
  } else if (j.contains("world")) {
    c.world = io::world_from(j["world"]);
  }
  if (j.contains("population")) {
    c.groups = io::groups_from(io::field<json>(j["population"], "groups", "population"),
                               "population.groups");
  }
  try {
    (void)Population(c.world, c.groups);
  } catch (const StructuralError& e) {
    throw ConfigError("population", e.what());
  }
  const json sampling = j.value("sampling", json::object());
  c.comparisons = io::field_or<int>(sampling, "comparisons", "sampling", c.comparisons);
  if (c.comparisons < 1) throw ConfigError("sampling.comparisons", "must be at least 1");
  c.seed = io::field_or<std::uint64_t>(sampling, "seed", "sampling", c.seed);
  c.fit = io::fit_config_from(j.value("fit", json::object()));
  const json em = j.value("em", json::object());
  c.k = io::field_or<int>(em, "k", "em", c.k);
  c.restarts = io::field_or<int>(em, "restarts", "em", c.restarts);
  if (c.k < 1) throw ConfigError("em.k", "must be at least 1");
  if (c.restarts < 1) throw ConfigError("em.restarts", "must be at least 1");
  c.beta = io::field_or<double>(j, "beta", "config", c.beta);
  if (!(c.beta > 0.0)) throw ConfigError("beta", "must be positive");
  c.maxmin = io::maxmin_config_from(j.value("maxmin", json::object()));

  const json sweep = j.value("sweep", json::object());
  c.sweep.ratios = io::field_or<std::vector<int>>(sweep, "ratios", "sweep", c.sweep.ratios);
  if (c.sweep.ratios.empty()) throw ConfigError("sweep.ratios", "must not be empty");
  for (int r : c.sweep.ratios) {
    if (r < 1) throw ConfigError("sweep.ratios", "ratios must be positive integers");
  }
  c.sweep.annotators_base = io::field_or<int>(sweep, "annotators_base", "sweep", c.sweep.annotators_base);
  c.sweep.comparisons = io::field_or<int>(sweep, "comparisons", "sweep", c.sweep.comparisons);
  c.sweep.seeds = io::field_or<int>(sweep, "seeds", "sweep", c.sweep.seeds);
  if (c.sweep.annotators_base < 1 || c.sweep.comparisons < 1 || c.sweep.seeds < 1) {
    throw ConfigError("sweep", "annotators_base, comparisons and seeds must be positive");
  }
  if (sweep.contains("world")) c.sweep.world = io::world_from(sweep["world"], "sweep.world");
  const int sweep_dim = c.sweep.world ? c.sweep.world->dim() : 2;
  if (sweep.contains("majority")) c.sweep.majority = io::vector_from(sweep["majority"], "sweep.majority");
  if (sweep.contains("minority")) c.sweep.minority = io::vector_from(sweep["minority"], "sweep.minority");
  if (c.sweep.majority.size() != sweep_dim || c.sweep.minority.size() != sweep_dim) {
    throw ConfigError("sweep", "majority/minority dimension does not match the sweep world");
  }

  const json g = j.value("gridworld", json::object());
  c.grid.map = io::field_or<std::string>(g, "map", "gridworld", c.grid.map);
  if (c.grid.map != "default" && !fs::exists(resolve(base_dir, c.grid.map))) {
    throw ConfigError("gridworld.map", "file not found: " + c.grid.map);
  }
  c.grid.discount = io::field_or<double>(g, "discount", "gridworld", c.grid.discount);
  c.grid.max_horizon = io::field_or<int>(g, "max_horizon", "gridworld", c.grid.max_horizon);
  c.grid.beta = io::field_or<double>(g, "beta", "gridworld", c.grid.beta);
  c.grid.reward_a = io::field_or<double>(g, "reward_a", "gridworld", c.grid.reward_a);
  c.grid.reward_b = io::field_or<double>(g, "reward_b", "gridworld", c.grid.reward_b);
  c.grid.tol = io::field_or<double>(g, "tol", "gridworld", c.grid.tol);
  if (!(c.grid.discount > 0.0 && c.grid.discount < 1.0)) {
    throw ConfigError("gridworld.discount", "must lie in (0, 1)");
  }
  if (c.grid.max_horizon < 1) throw ConfigError("gridworld.max_horizon", "must be positive");
  if (!(c.grid.beta > 0.0)) throw ConfigError("gridworld.beta", "must be positive");
  if (!(c.grid.tol > 0.0)) throw ConfigError("gridworld.tol", "must be positive");
  c.output_dir = io::field_or<std::string>(j, "output_dir", "config", c.output_dir);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("--config", "file not found: " + path);
  return config_from(io::parse_json(io::read_file(path), path), fs::path(path).parent_path());
}

enum class Command { Gen, FitSingle, FitMixture, AlignSingle, AlignMaxmin, VerifyBounds, Sweep, Gridworld };

inline const std::vector<std::pair<Command, std::string>>& command_names() {
  static const std::vector<std::pair<Command, std::string>> names{
      {Command::Gen, "gen"},
      {Command::FitSingle, "fit-single"},
      {Command::FitMixture, "fit-mixture"},
      {Command::AlignSingle, "align-single"},
      {Command::AlignMaxmin, "align-maxmin"},
      {Command::VerifyBounds, "verify-bounds"},
      {Command::Sweep, "sweep"},
      {Command::Gridworld, "gridworld"}};
  return names;
}

inline std::string command_name(Command c) {
  for (const auto& [cmd, name] : command_names()) {
    if (cmd == c) return name;
  }
  return "unknown";
}

// Inputs that come from earlier stages rather than the config.
struct StageInputs {
  std::optional<std::string> data_dir;    // holds dataset.jsonl and labels.jsonl
  std::optional<std::string> model_file;  // fit-mixture output for align-maxmin
};

struct StageResult {
  fs::path out_dir;
  std::vector<std::string> files;
};

class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& message)
      : Error(stage + ": " + message) {}
};

namespace detail {

struct Writer {
  fs::path dir;
  std::vector<std::string> files;

  void text(const std::string& name, const std::string& body) {
    io::write_file((dir / name).string(), body);
    files.push_back(name);
  }
  void json_file(const std::string& name, const json& j) { text(name, io::dump(j)); }
};

inline PreferenceDataset load_or_sample(const ExperimentConfig& c, const StageInputs& in,
                                        std::map<std::string, std::string>& input_hashes) {
  if (!in.data_dir) return sample_dataset(c.population(), c.comparisons, derive_seed(c.seed, "gen"));
  const fs::path dir = in.data_dir->empty() ? fs::path(".") : fs::path(*in.data_dir);
  const fs::path records = dir / "dataset.jsonl";
  const fs::path labels = dir / "labels.jsonl";
  if (!fs::exists(records)) throw ConfigError("--data", "missing " + records.string());
  const std::string rtext = io::read_file(records.string());
  const std::string ltext = fs::exists(labels) ? io::read_file(labels.string()) : std::string();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(rtext)));
  input_hashes["dataset.jsonl"] = buf;
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(ltext)));
  input_hashes["labels.jsonl"] = buf;
  return io::dataset_from(rtext, ltext, c.world);
}

inline bool labels_complete(const PreferenceDataset& data) {
  for (const auto& [annotator, group] : data.hidden_labels()) {
    if (group < 0) return false;
  }
  return true;
}

inline json group_report(const Policy& pi, const Population& pop, const Policy& ref, double beta) {
  json groups = json::array();
  for (const GroupSpec& g : pop.groups()) {
    const ObjectiveValue v = regularized_objective(pi, g.phi_star, ref, beta, pop.world());
    groups.push_back({{"id", g.group_id}, {"objective", v.value},
                      {"expected_reward", v.expected_reward}, {"kl", v.kl},
                      {"align_gap", align_gap(pi, g.group_id, pop, ref, beta)}});
  }
  return groups;
}

inline std::string map_text(const ExperimentConfig& c) {
  return c.grid.map == "default" ? std::string(kDefaultMap)
                                 : io::read_file(resolve(c.base_dir, c.grid.map).string());
}

// A map file may carry a sibling .json block with reward magnitudes and
// planning settings; its fields override the config.
inline GridConfig grid_settings(const ExperimentConfig& c,
                                std::map<std::string, std::string>& input_hashes) {
  GridConfig g = c.grid;
  if (g.map == "default") return g;
  const fs::path block = resolve(c.base_dir, g.map).replace_extension(".json");
  if (!fs::exists(block)) return g;
  const std::string text = io::read_file(block.string());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
  input_hashes[block.filename().string()] = buf;
  const json j = io::parse_json(text, block.string());
  const std::string path = block.filename().string();
  g.reward_a = io::field_or<double>(j, "reward_a", path, g.reward_a);
  g.reward_b = io::field_or<double>(j, "reward_b", path, g.reward_b);
  g.discount = io::field_or<double>(j, "discount", path, g.discount);
  g.max_horizon = io::field_or<int>(j, "max_horizon", path, g.max_horizon);
  g.beta = io::field_or<double>(j, "beta", path, g.beta);
  g.tol = io::field_or<double>(j, "tol", path, g.tol);
  if (!(g.discount > 0.0 && g.discount < 1.0)) throw ConfigError(path + ".discount", "must lie in (0, 1)");
  if (g.max_horizon < 1) throw ConfigError(path + ".max_horizon", "must be positive");
  if (!(g.beta > 0.0)) throw ConfigError(path + ".beta", "must be positive");
  if (!(g.tol > 0.0)) throw ConfigError(path + ".tol", "must be positive");
  return g;
}

}  // namespace detail

// Runs one stage into config.output_dir and writes manifest.json last. All
// outputs except the manifest's wall_time_seconds are functions of the config
// and the stage inputs.
inline StageResult run_experiment(const ExperimentConfig& c, Command command,
                                  const StageInputs& in = {}) {
  const auto started = std::chrono::steady_clock::now();
  detail::Writer out{fs::path(c.output_dir), {}};
  fs::create_directories(out.dir);
  std::map<std::string, std::string> input_hashes;
  const std::string stage = command_name(command);
  const Population pop = c.population();
  const Policy ref = Policy::uniform(c.world);

  try {
    switch (command) {
      case Command::Gen: {
        const PreferenceDataset data = sample_dataset(pop, c.comparisons, derive_seed(c.seed, "gen"));
        out.json_file("world.json", io::world_json(c.world));
        out.json_file("population.json", {{"groups", io::groups_json(pop)}});
        out.text("dataset.jsonl", io::dataset_jsonl(data, c.world));
        out.text("labels.jsonl", io::labels_jsonl(data));
        break;
      }
      case Command::FitSingle: {
        const PreferenceDataset data = detail::load_or_sample(c, in, input_hashes);
        const RewardParams phi = fit_single_reward(data.records(), c.world, c.fit);
        out.json_file("reward_single.json",
                      {{"phi", io::params_json(phi)},
                       {"nll", empirical_nll(phi, data.records(), c.world, c.fit.ridge)},
                       {"records", data.records().size()}});
        break;
      }
      case Command::FitMixture: {
        const PreferenceDataset data = detail::load_or_sample(c, in, input_hashes);
        const MixtureRewardModel model = em_fit(data.records(), c.world, c.k, c.fit, c.restarts,
                                                derive_seed(c.seed, "em"));
        json j = io::mixture_json(model);
        if (detail::labels_complete(data)) j["cluster_accuracy"] = cluster_accuracy(model, data.hidden_labels());
        out.json_file("model.json", j);
        break;
      }
      case Command::AlignSingle: {
        const PreferenceDataset data = detail::load_or_sample(c, in, input_hashes);
        const RewardParams phi = fit_single_reward(data.records(), c.world, c.fit);
        const Policy pi = gibbs_policy(phi, ref, c.beta, c.world).policy;
        out.json_file("policy_single.json",
                      {{"phi", io::params_json(phi)},
                       {"beta", c.beta},
                       {"policy", io::policy_json(pi, c.world)},
                       {"groups", detail::group_report(pi, pop, ref, c.beta)},
                       {"min_group_objective", min_group_objective(pi, pop, ref, c.beta).value}});
        break;
      }
      case Command::AlignMaxmin: {
        Population target = pop;
        if (in.model_file) {
          const std::string text = io::read_file(*in.model_file);
          char buf[17];
          std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(text)));
          input_hashes[fs::path(*in.model_file).filename().string()] = buf;
          const MixtureRewardModel model = io::mixture_from(io::parse_json(text, "--model"));
          std::vector<int> sizes(model.k(), 0);
          for (const auto& [annotator, cluster] : model.assignment) {
            if (cluster < 0 || cluster >= static_cast<int>(model.k())) {
              throw ConfigError("--model", "assignment names an unknown cluster");
            }
            ++sizes[static_cast<std::size_t>(cluster)];
          }
          std::vector<GroupSpec> groups;
          int nonempty = 0;
          for (int s : sizes) nonempty += s > 0;
          if (nonempty == 0) throw ConfigError("--model", "model has no assignments");
          double assigned = 0.0;
          const auto total = static_cast<double>(model.assignment.size());
          for (std::size_t u = 0; u < model.k(); ++u) {
            if (sizes[u] == 0) continue;
            const bool last = static_cast<int>(groups.size()) + 1 == nonempty;
            const double eta = last ? 1.0 - assigned : sizes[u] / total;
            assigned += eta;
            groups.push_back({static_cast<int>(groups.size()), model.cluster_params[u], eta, sizes[u]});
          }
          target = Population(c.world, groups);
        }
        const MaxMinResult r = maxmin_solve(target, ref, c.beta, c.maxmin);
        json j = io::maxmin_json(r, c.world);
        j["beta"] = c.beta;
        j["groups"] = detail::group_report(r.policy, pop, ref, c.beta);
        j["min_group_objective"] = min_group_objective(r.policy, pop, ref, c.beta).value;
        out.json_file("maxmin.json", j);
        break;
      }
      case Command::VerifyBounds: {
        out.json_file("bounds.json",
                      {{"beta", c.beta},
                       {"lemma1", io::bound_json(verify_lemma1(pop, c.fit))},
                       {"theorem1", io::bound_json(verify_theorem1(pop, c.beta, c.fit))}});
        break;
      }
      case Command::Sweep: {
        SweepSettings s;
        s.ratios = c.sweep.ratios;
        s.annotators_base = c.sweep.annotators_base;
        s.comparisons = c.sweep.comparisons;
        for (int i = 0; i < c.sweep.seeds; ++i) {
          s.seeds.push_back(derive_seed(c.seed, "sweep-seed", static_cast<std::uint64_t>(i)));
        }
        s.fit = c.fit;
        s.beta = c.beta;
        s.maxmin = c.maxmin;
        const FeatureWorld world = c.sweep.world ? *c.sweep.world : arc_world();
        const SweepTable t = minority_sweep(world, RewardParams(c.sweep.majority),
                                            RewardParams(c.sweep.minority), s);
        out.text("sweep.csv", io::sweep_csv(t.rows));
        out.text("sweep_summary.csv", io::sweep_csv(t.summary));
        break;
      }
      case Command::Gridworld: {
        const GridConfig gc = detail::grid_settings(c, input_hashes);
        const io::GridMap m = io::parse_map(detail::map_text(c), gc.discount, gc.max_horizon);
        const grid::GroupRewardGrid ra = grid::cell_reward(m.spec, 0, m.region_a, gc.reward_a);
        const grid::GroupRewardGrid rb = grid::cell_reward(m.spec, 1, m.region_b, gc.reward_b);
        const grid::GridPolicyValue pa = grid::soft_value_iteration(m.spec, ra, gc.beta);
        const grid::GridPolicyValue pb = grid::soft_value_iteration(m.spec, rb, gc.beta);
        const grid::GridMaxMinResult mm = grid::grid_maxmin(m.spec, {ra, rb}, gc.beta, gc.tol);
        const std::uint64_t seed = derive_seed(c.seed, "gridworld");
        auto summary = [&](const std::vector<grid::ActionRow>& policy) {
          return json{{"return_a", grid::evaluate_policy(m.spec, policy, ra)},
                      {"return_b", grid::evaluate_policy(m.spec, policy, rb)}};
        };
        out.json_file("trajectory_A.json", io::trajectory_json(grid::rollout(m.spec, pa.policy, seed, gc.max_horizon)));
        out.json_file("trajectory_B.json", io::trajectory_json(grid::rollout(m.spec, pb.policy, seed, gc.max_horizon)));
        out.json_file("trajectory_maxmin.json",
                      io::trajectory_json(grid::rollout(m.spec, mm.solution.policy, seed, gc.max_horizon)));
        json j = {{"group_A", summary(pa.policy)},
                  {"group_B", summary(pb.policy)},
                  {"maxmin", summary(mm.solution.policy)}};
        j["maxmin"]["lambda"] = mm.lambda;
        j["maxmin"]["dual_value"] = mm.dual_value;
        j["maxmin"]["regularized_returns"] = mm.group_returns;
        j["maxmin"]["certificate_gap"] = mm.certificate_gap;
        out.json_file("gridworld.json", j);
        break;
      }
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const NonConvergenceError& e) {
    throw NonConvergenceError(stage + ": " + e.what(), e.last_iterate(), e.residual());
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }

  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  json manifest = {{"command", stage},
                   {"config_hash", config_hash(c)},
                   {"seed", c.seed},
                   {"version", DIVPREF_VERSION},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"config", config_json(c)},
                   {"inputs", input_hashes},
                   {"outputs", out.files},
                   {"wall_time_seconds", wall}};
  io::write_file((out.dir / "manifest.json").string(), io::dump(manifest));
  return {out.dir, out.files};
}

}  // namespace divpref
