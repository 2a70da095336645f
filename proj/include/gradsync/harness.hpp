// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gradsync/strategies.hpp"

namespace gradsync::harness {

/// Flat key=value settings. Keys are the CLI flag names without the leading
/// dashes, so every key has a matching flag.
using Settings = std::map<std::string, std::string>;

struct SettingInfo {
  std::string key;
  std::string default_value;
  std::string help;
};

/// Every recognised key with its default.
const std::vector<SettingInfo>& known_settings();

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored. Throws ParseError naming `origin` and the line for malformed
/// lines, unknown keys or duplicates.
Settings parse_settings(std::string_view text, const std::string& origin);
Settings load_settings(const std::filesystem::path& path);

struct DataSpec {
  /// "blobs" or "csv".
  std::string source = "blobs";
  std::filesystem::path train_file;
  std::filesystem::path test_file;  // empty: split test_count rows off train_file
  std::size_t classes = 2;
  std::size_t per_class = 2560;
  std::size_t dim = 20;
  double spread = 0.8;
  std::size_t test_count = 1024;
  /// Fixed data seed; unset means each run seed generates its own task.
  std::optional<std::uint64_t> seed;
};

struct ExperimentPlan {
  std::vector<Strategy> strategies;
  std::vector<std::size_t> cluster_sizes;
  std::vector<std::uint64_t> seeds;
  std::vector<double> target_accuracies;
  std::filesystem::path output_dir;
  /// Template; n and seed are filled per cell. cfg.steps == 0 means
  /// `epochs` passes over worker 0's shard.
  TrainConfig base;
  std::size_t epochs = 100;
  /// Per-worker t_train factors; cells use the first n entries.
  std::vector<double> speed_multipliers;
  DataSpec data;
  bool parallel_runs = false;

  /// Throws ConfigError on empty grids or targets outside (0, 1).
  void validate() const;
};

/// Defaults from known_settings() overlaid with `overrides`.
ExperimentPlan make_plan(const Settings& overrides);

TrainData make_data(const DataSpec& spec, std::uint64_t run_seed);

/// The TrainConfig of one grid cell. Model dims come from `data`.
TrainConfig cell_config(const ExperimentPlan& plan, const TrainData& data, std::size_t n,
                        std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

std::string metrics_file_name(Strategy s, std::size_t n, std::uint64_t seed);
std::string events_file_name(Strategy s, std::size_t n, std::uint64_t seed);
inline constexpr const char* kSummaryFile = "summary.csv";

/// Header: strategy,n,seed,epoch,step,time,train_loss,test_accuracy,
/// sync_count,compute_time,sync_time,wait_time,hidden_sync_time.
/// Times are seconds with nanosecond precision.
void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> rows);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Derived metrics

struct TimeToAccuracy {
  bool reached = false;
  std::size_t epoch = 0;
  Duration total{0};
  Duration compute{0};
  Duration sync{0};
  Duration wait{0};
};

/// Times at the first record whose test accuracy reaches `target`.
TimeToAccuracy time_to_accuracy(std::span<const MetricsRecord> run, double target);

/// Population standard deviation of successive test-accuracy differences;
/// empty with fewer than 3 records.
std::optional<double> smoothness(std::span<const MetricsRecord> run);

/// Local steps of the whole cluster per second of elapsed time.
double throughput(std::span<const MetricsRecord> run);

struct SummaryRow {
  std::string strategy;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  Duration elapsed{0};
  double throughput = 0.0;
  std::optional<double> scale_efficiency;
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  std::size_t sync_count = 0;
  Duration compute{0};
  Duration sync{0};
  Duration wait{0};
  Duration hidden_sync{0};
  std::optional<double> smoothness;
  std::vector<TimeToAccuracy> targets;
};

/// One row per run, sorted by (strategy, n, seed). Scale efficiency uses the
/// n = 1 run of the same strategy and seed when present.
std::vector<SummaryRow> summarize(const std::vector<std::vector<MetricsRecord>>& runs,
                                  std::span<const double> targets);

/// throughput(n) / (n * throughput(1)) for (strategy, seed). Throws
/// ConfigError if either run is missing.
double scale_efficiency(std::span<const SummaryRow> summary, const std::string& strategy,
                        std::size_t n, std::uint64_t seed);

void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows,
                       std::span<const double> targets);

/// Recomputes the summary from every metrics_*.csv in `dir`.
std::vector<SummaryRow> summarize_directory(const std::filesystem::path& dir,
                                            std::span<const double> targets);

// ---------------------------------------------------------------------------
// Grid

struct CellOutcome {
  Strategy strategy;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<MetricsRecord> metrics;
};

struct PlanOutcome {
  std::vector<CellOutcome> cells;
  std::size_t failures() const;
};

/// Runs every (strategy, n, seed) cell, writing one metrics and one event CSV
/// per successful cell and summary.csv over all of them. A failing cell is
/// reported (and listed in errors.log) while the remaining cells still run.
/// Progress lines go to `log` when given.
PlanOutcome run_plan(const ExperimentPlan& plan, std::ostream* log = nullptr);

}  // namespace gradsync::harness
