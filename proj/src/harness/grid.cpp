// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <future>
#include <ostream>

#include <fmt/format.h>

#include "gradsync/errors.hpp"
#include "gradsync/harness.hpp"

namespace gradsync::harness {

namespace {

constexpr std::uint64_t kDataStream = 0x44415441;  // "DATA"

struct Cell {
  Strategy strategy;
  std::size_t n;
  std::uint64_t seed;
};

CellOutcome run_cell(const ExperimentPlan& plan, const Cell& cell) {
  CellOutcome out{cell.strategy, cell.n, cell.seed, false, {}, {}};
  try {
    const TrainData data = make_data(plan.data, cell.seed);
    const TrainConfig cfg = cell_config(plan, data, cell.n, cell.seed);
    RunResult r = run_strategy(cell.strategy, cfg, data);
    write_metrics_csv(plan.output_dir / metrics_file_name(cell.strategy, cell.n, cell.seed), r.metrics);
    sim::write_events_csv(plan.output_dir / events_file_name(cell.strategy, cell.n, cell.seed), r.events);
    out.metrics = std::move(r.metrics);
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

}  // namespace

TrainData make_data(const DataSpec& spec, std::uint64_t run_seed) {
  Rng rng = Rng(spec.seed.value_or(run_seed)).fork(kDataStream);
  if (spec.source == "blobs") {
    const Dataset all = make_blobs(spec.classes, spec.per_class, spec.dim, spec.spread, rng);
    auto [train, test] = train_test_split(all, spec.test_count, rng);
    return {std::move(train), std::move(test)};
  }
  if (spec.source == "csv") {
    Dataset train = load_csv(spec.train_file, spec.classes);
    if (!spec.test_file.empty()) return {std::move(train), load_csv(spec.test_file, spec.classes)};
    auto [tr, te] = train_test_split(train, spec.test_count, rng);
    return {std::move(tr), std::move(te)};
  }
  throw ConfigError(fmt::format("unknown data source '{}'", spec.source));
}

TrainConfig cell_config(const ExperimentPlan& plan, const TrainData& data, std::size_t n,
                        std::uint64_t seed) {
  TrainConfig cfg = plan.base;
  cfg.n = n;
  cfg.seed = seed;
  cfg.model.input_dim = data.train.meta.input_dim;
  cfg.model.classes = data.train.meta.classes;
  if (cfg.steps == 0) {
    if (n == 0 || cfg.batch_size == 0) throw ConfigError("workers and batch must be >= 1");
    const std::size_t shard0 = (data.train.size() + n - 1) / n;
    cfg.steps = plan.epochs * ((shard0 + cfg.batch_size - 1) / cfg.batch_size);
  }
  if (!plan.speed_multipliers.empty()) {
    if (plan.speed_multipliers.size() < n) {
      throw ConfigError(fmt::format("{} speed multipliers cannot cover {} workers",
                                    plan.speed_multipliers.size(), n));
    }
    cfg.timing.multipliers.assign(plan.speed_multipliers.begin(), plan.speed_multipliers.begin() + n);
  }
  cfg.validate();
  return cfg;
}

std::size_t PlanOutcome::failures() const {
  std::size_t k = 0;
  for (const CellOutcome& c : cells) k += c.ok ? 0 : 1;
  return k;
}

PlanOutcome run_plan(const ExperimentPlan& plan, std::ostream* log) {
  plan.validate();
  std::error_code ec;
  std::filesystem::create_directories(plan.output_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", plan.output_dir.string(), ec.message()));

  std::vector<Cell> cells;
  for (Strategy s : plan.strategies) {
    for (std::size_t n : plan.cluster_sizes) {
      for (std::uint64_t seed : plan.seeds) cells.push_back({s, n, seed});
    }
  }

  PlanOutcome outcome;
  auto report = [&](const CellOutcome& c) {
    if (!log) return;
    if (c.ok) {
      const MetricsRecord& last = c.metrics.back();
      *log << fmt::format("{} n={} seed={}: accuracy {:.4f} after {} steps\n", to_string(c.strategy),
                          c.n, c.seed, last.test_accuracy, last.step);
    } else {
      *log << fmt::format("{} n={} seed={}: FAILED: {}\n", to_string(c.strategy), c.n, c.seed, c.error);
    }
  };
  if (plan.parallel_runs) {
    std::vector<std::future<CellOutcome>> running;
    for (const Cell& c : cells) running.push_back(std::async(std::launch::async, run_cell, std::cref(plan), c));
    for (auto& f : running) {
      outcome.cells.push_back(f.get());
      report(outcome.cells.back());
    }
  } else {
    for (const Cell& c : cells) {
      outcome.cells.push_back(run_cell(plan, c));
      report(outcome.cells.back());
    }
  }

  std::vector<std::vector<MetricsRecord>> runs;
  std::string errors;
  for (const CellOutcome& c : outcome.cells) {
    if (c.ok) {
      runs.push_back(c.metrics);
    } else {
      errors += fmt::format("{} n={} seed={}: {}\n", to_string(c.strategy), c.n, c.seed, c.error);
    }
  }
  write_summary_csv(plan.output_dir / kSummaryFile, summarize(runs, plan.target_accuracies),
                    plan.target_accuracies);
  const auto errors_path = plan.output_dir / "errors.log";
  if (errors.empty()) {
    std::filesystem::remove(errors_path, ec);
  } else {
    std::ofstream out(errors_path);
    out << errors;
    if (!out) throw IoError(fmt::format("write failed for '{}'", errors_path.string()));
  }
  return outcome;
}

}  // namespace gradsync::harness
