// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <mutex>
#include <vector>

#include "gradsync/strategies.hpp"

namespace gradsync::detail {

/// Reshuffled mini-batches of one worker's shard, regenerated per epoch.
class BatchStream {
 public:
  BatchStream(const TrainConfig& cfg, const Dataset& data, std::size_t worker);

  std::size_t steps_per_epoch() const { return steps_per_epoch_; }
  /// Batch used by local step `step`.
  const Batch& at(std::size_t step);

 private:
  const TrainConfig& cfg_;
  const Dataset& data_;
  std::size_t worker_;
  Shard shard_;
  std::size_t steps_per_epoch_;
  std::size_t epoch_ = 0;
  std::vector<Batch> current_;
};

/// Shared plumbing of one run: clock, shards, initial model and the epoch
/// snapshots that become metrics rows.
class Run {
 public:
  Run(Strategy strategy, const TrainConfig& cfg, const TrainData& data, const Hooks& hooks);

  const TrainConfig& cfg() const { return cfg_; }
  const Hooks& hooks() const { return hooks_; }
  sim::Clock& clock() { return *clock_; }
  const ParamVector& initial() const { return initial_; }
  BatchStream stream(std::size_t worker) const;

  /// Computes the gradient for local step `step` on the clock as a compute
  /// phase. Numeric failures are rethrown naming the worker and step.
  GradientResult compute(sim::ActorId who, std::size_t step, const ParamVector& at,
                         BatchStream& batches);

  /// w -= mu * g, rethrowing numeric failures with context.
  void apply(std::size_t worker, std::size_t step, const GradVector& g, ParamVector& w) const;

  /// Worker 0 only: records `model` if `steps_done` closes an epoch (the last
  /// epoch is recorded by finish()).
  void after_step(std::size_t worker, std::size_t steps_done, const ParamVector& model);
  bool at_epoch_boundary(std::size_t worker, std::size_t steps_done) const;

  /// Runs the actors, then turns snapshots into metrics.
  RunResult execute(std::vector<sim::Actor> actors, const std::function<void()>& on_abort,
                    const std::function<std::vector<ParamVector>()>& final_params);

 private:
  struct Snapshot {
    std::size_t epoch;
    std::size_t step;
    Duration time;
    ParamVector model;
  };

  MetricsRecord record(const Snapshot& snap, std::span<const sim::PhaseEvent> log) const;

  Strategy strategy_;
  const TrainConfig& cfg_;
  const TrainData& data_;
  const Hooks& hooks_;
  std::unique_ptr<sim::Clock> clock_;
  ParamVector initial_;
  std::size_t steps_per_epoch0_;
  std::mutex snap_mu_;
  std::vector<Snapshot> snapshots_;
  Batch train_all_;
  Batch test_all_;
};

}  // namespace gradsync::detail
