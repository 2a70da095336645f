// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gradsync/errors.hpp"
#include "gradsync/harness.hpp"

namespace {

using namespace gradsync;

std::vector<double> parse_targets(const std::string& text) {
  return harness::make_plan({{"targets", text}}).target_accuracies;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gradsync: data-parallel SGD strategy lab"};
  app.require_subcommand(1);

  CLI::App* run = app.add_subcommand("run", "run a strategy x workers x seed grid");
  std::string config;
  run->add_option("--config", config, "key = value file; flags below override it");
  std::map<std::string, std::string> flags;
  for (const harness::SettingInfo& s : harness::known_settings()) {
    auto* opt = run->add_option("--" + s.key, flags[s.key], s.help);
    if (!s.default_value.empty()) opt->default_str(s.default_value);
  }

  CLI::App* summarize = app.add_subcommand("summarize", "recompute summary.csv from metrics CSVs");
  std::string dir;
  std::string targets = "0.8,0.9";
  summarize->add_option("--dir", dir, "directory holding metrics_*.csv")->required();
  summarize->add_option("--targets", targets, "comma list of target accuracies")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      harness::Settings settings;
      if (!config.empty()) settings = harness::load_settings(config);
      for (const auto& [key, value] : flags) {
        if (run->count("--" + key) > 0) settings[key] = value;
      }
      const harness::ExperimentPlan plan = harness::make_plan(settings);
      const harness::PlanOutcome out = harness::run_plan(plan, &std::cout);
      std::cout << fmt::format("{} of {} runs succeeded; results in {}\n",
                               out.cells.size() - out.failures(), out.cells.size(),
                               plan.output_dir.string());
      return out.failures() == 0 ? 0 : 1;
    }
    const std::vector<double> t = parse_targets(targets);
    const auto rows = harness::summarize_directory(dir, t);
    harness::write_summary_csv(std::filesystem::path(dir) / harness::kSummaryFile, rows, t);
    std::cout << fmt::format("summarized {} runs into {}\n", rows.size(),
                             (std::filesystem::path(dir) / harness::kSummaryFile).string());
    return 0;
  } catch (const Error& e) {
    std::cerr << "gradsync: " << e.what() << '\n';
    return 1;
  }
}
