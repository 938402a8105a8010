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


#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <vector>

#include "divpref/experiment.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<double> beta;
  std::optional<std::vector<int>> ratios;
  std::optional<int> k;
  std::optional<int> restarts;
  std::optional<std::string> data;
  std::optional<std::string> model;
  std::optional<std::string> map;
};

divpref::ExperimentConfig effective_config(const Options& o) {
  divpref::ExperimentConfig c =
      o.config.empty() ? divpref::ExperimentConfig{} : divpref::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.beta) {
    if (!(*o.beta > 0.0)) throw divpref::ConfigError("--beta", "must be positive");
    c.beta = *o.beta;
  }
  if (o.ratios) {
    for (int r : *o.ratios) {
      if (r < 1) throw divpref::ConfigError("--ratios", "ratios must be positive integers");
    }
    c.sweep.ratios = *o.ratios;
  }
  if (o.k) {
    if (*o.k < 1) throw divpref::ConfigError("--k", "must be at least 1");
    c.k = *o.k;
  }
  if (o.restarts) {
    if (*o.restarts < 1) throw divpref::ConfigError("--restarts", "must be at least 1");
    c.restarts = *o.restarts;
  }
  if (o.map) {
    if (*o.map != "default" && !divpref::fs::exists(*o.map)) {
      throw divpref::ConfigError("--map", "file not found: " + *o.map);
    }
    c.grid.map = *o.map == "default" ? *o.map : divpref::fs::absolute(*o.map).string();
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference learning with diverse sub-populations"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--config", o.config, "Experiment config (JSON)");
  app.add_option("--seed", o.seed, "Top-level seed");
  app.add_option("--out", o.out, "Output directory");

  std::vector<std::pair<divpref::Command, CLI::App*>> subs;
  for (const auto& [cmd, name] : divpref::command_names()) {
    subs.emplace_back(cmd, app.add_subcommand(name));
  }
  for (auto& [cmd, sub] : subs) {
    sub->fallthrough();
    using divpref::Command;
    if (cmd == Command::FitSingle || cmd == Command::FitMixture || cmd == Command::AlignSingle) {
      sub->add_option("--data", o.data, "Directory with dataset.jsonl and labels.jsonl");
    }
    if (cmd == Command::FitMixture) {
      sub->add_option("--k", o.k, "Number of clusters");
      sub->add_option("--restarts", o.restarts, "EM restarts");
    }
    if (cmd == Command::AlignSingle || cmd == Command::AlignMaxmin ||
        cmd == Command::VerifyBounds || cmd == Command::Sweep) {
      sub->add_option("--beta", o.beta, "KL regularization strength");
    }
    if (cmd == Command::AlignMaxmin) sub->add_option("--model", o.model, "model.json from fit-mixture");
    if (cmd == Command::Sweep) sub->add_option("--ratios", o.ratios, "Majority:minority ratios")->delimiter(',');
    if (cmd == Command::Gridworld) sub->add_option("--map", o.map, "Map file or 'default'");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const divpref::ExperimentConfig config = effective_config(o);
    for (auto& [cmd, sub] : subs) {
      if (!sub->parsed()) continue;
      const divpref::StageResult r = divpref::run_experiment(config, cmd, {o.data, o.model});
      for (const std::string& f : r.files) std::printf("%s\n", (r.out_dir / f).string().c_str());
    }
  } catch (const divpref::ConfigError& e) {
    std::fprintf(stderr, "config error [%s]: %s\n", e.field().c_str(), e.what());
    return 2;
  } catch (const divpref::NonConvergenceError& e) {
    std::fprintf(stderr, "non-convergence: %s (residual %.3g)\n", e.what(), e.residual());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
