// Copyright 2026 The dam Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// dam: dataset generation, shifter and detector training, evaluation,
// ablation and plotting. Exit status: 0 success, 1 invalid input or
// configuration, 2 a training run diverged.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dam/cli/commands.hpp"

namespace fs = std::filesystem;
using namespace dam;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "experiment config (JSON)")->required();
  sub->add_option("--seed", c.seed, "override the root seed");
  sub->add_option("--out", c.out, "override the output directory");
}

cli::ExperimentConfig resolve(const Common& c, bool out_is_data = false) {
  auto cfg = cli::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) (out_is_data ? cfg.data_root : cfg.output_dir) = *c.out;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Domain diversification and multi-domain-invariant detection on synthetic data"};
  app.require_subcommand(1);

  Common gen, shift, train, ev, abl, plot;
  auto* s_gen = app.add_subcommand("gen-data", "render the synthetic benchmark");
  add_common(s_gen, gen);

  auto* s_shift = app.add_subcommand("train-shifters", "train one domain shifter per constraint kind");
  add_common(s_shift, shift);

  auto* s_train = app.add_subcommand("train", "train a detector (default: DD+MRL with all shifters)");
  add_common(s_train, train);
  bool dd_only = false, baseline = false;
  s_train->add_flag("--dd-only", dd_only, "shifted domains without the adversarial MRL term");
  s_train->add_flag("--baseline", baseline, "source-only detector (n = 0, no MRL)");

  auto* s_eval = app.add_subcommand("eval", "evaluate a detector checkpoint");
  add_common(s_eval, ev);
  std::string checkpoint;
  s_eval->add_option("--checkpoint", checkpoint, "detector checkpoint")->required();

  auto* s_abl = app.add_subcommand("ablation", "DD vs DD+MRL over n = 0..max_n and seeds");
  add_common(s_abl, abl);

  auto* s_plot = app.add_subcommand("plot", "bar charts of class-wise AP and error categories");
  add_common(s_plot, plot);
  std::vector<std::string> reports;
  s_plot->add_option("reports", reports, "metrics.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*s_gen) {
      cli::cmd_gen_data(resolve(gen, true));
    } else if (*s_shift) {
      for (const auto& p : cli::cmd_train_shifters(resolve(shift))) std::cout << p.string() << "\n";
    } else if (*s_train) {
      if (dd_only && baseline) throw std::invalid_argument("--dd-only and --baseline are exclusive");
      const auto m = baseline ? cli::Method::baseline : dd_only ? cli::Method::dd : cli::Method::dd_mrl;
      std::cout << cli::cmd_train(resolve(train), m).string() << "\n";
    } else if (*s_eval) {
      std::optional<fs::path> out;
      if (ev.out) out = *ev.out;
      Common c = ev;
      c.out.reset();
      cli::cmd_eval(resolve(c), checkpoint, out);
    } else if (*s_abl) {
      cli::cmd_ablation(resolve(abl));
    } else if (*s_plot) {
      const auto cfg = resolve(plot);
      std::vector<fs::path> paths(reports.begin(), reports.end());
      for (const auto& p : cli::cmd_plot(paths, fs::path(cfg.output_dir) / "plots"))
        std::cout << p.string() << "\n";
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
