// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "gradsync/comms.hpp"
#include "gradsync/data.hpp"
#include "gradsync/model.hpp"
#include "gradsync/simclock.hpp"
#include "gradsync/tensor.hpp"

namespace gradsync {

using sim::Duration;

enum class Strategy { kSsgd, kPsgd, kLocal, kHpsgd };

std::string to_string(Strategy s);
/// Accepts ssgd, psgd, local, hpsgd.
Strategy parse_strategy(const std::string& s);

struct Timing {
  /// Virtual cost of one local training step.
  Duration t_train = std::chrono::milliseconds(1);
  /// Per-worker factor on t_train; empty means 1.0 everywhere.
  std::vector<double> multipliers;
  comms::LatencyModel latency;
};

struct TrainConfig {
  std::size_t n = 1;
  double mu = 0.01;
  /// Local training steps per worker.
  std::size_t steps = 100;
  std::size_t gamma = 8;
  std::size_t batch_size = 128;
  std::uint64_t seed = 1;
  Timing timing;
  ModelSpec model;
  /// Barrier among trainers before every step.
  bool lockstep = false;
  sim::ClockMode clock = sim::ClockMode::kVirtual;

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
  /// t_train scaled by the worker's multiplier.
  Duration step_cost(std::size_t worker) const;
};

struct TrainData {
  Dataset train;
  Dataset test;
};

/// One reporting row, taken at an epoch boundary of worker 0 (one pass over
/// its shard). Phase times are worker 0's. The last row is taken after the
/// run with the final model, at the time the last event of any worker ended.
struct MetricsRecord {
  std::string strategy;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  Duration time{0};
  double train_loss = 0.0;
  double test_accuracy = 0.0;
  std::size_t sync_count = 0;
  Duration compute_time{0};
  Duration sync_time{0};
  Duration wait_time{0};
  Duration hidden_sync_time{0};

  bool operator==(const MetricsRecord&) const = default;
};

struct RunResult {
  /// Final model of every worker. For SSGD and HPSGD these coincide.
  std::vector<ParamVector> params;
  std::vector<MetricsRecord> metrics;
  std::vector<sim::PhaseEvent> events;
};

/// Optional observation points, called from the worker's own thread.
struct Hooks {
  /// After worker `w` finished local step `s`; `params` is the model the step
  /// updated (the replica for HPSGD).
  std::function<void(std::size_t w, std::size_t s, const ParamVector& params)> on_step;
  /// HPSGD: worker `w` hands off block `round`; `replica` is the replica after
  /// the block's last step and `base` the model the block started from.
  std::function<void(std::size_t w, std::uint64_t round, const ParamVector& base,
                     const ParamVector& replica)>
      on_handoff;
  /// HPSGD: worker `w` committed the result of `round`.
  std::function<void(std::size_t w, std::uint64_t round, const ParamVector& model)> on_commit;
};

/// Independent SGD on every shard; no communication.
RunResult run_psgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks = {});

/// Per step: local gradient, AllReduce-average, w -= mu * mean.
RunResult run_ssgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks = {});

/// Local steps; every gamma-th step ends with AllReduce-average of the model.
RunResult run_local_sgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks = {});

/// Two roles per worker. The trainer P_t never waits for a collective: it
/// trains a replica and accumulates gradients, handing the accumulator to the
/// synchronizer P_s whenever P_s is idle. P_s AllReduce-averages the handed-off
/// accumulators and, one synchronization later, commits
///   W = W_block_start - mu * mean
/// onto the model the block started from.
RunResult run_hpsgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks = {});

RunResult run_strategy(Strategy s, const TrainConfig& cfg, const TrainData& data,
                       const Hooks& hooks = {});

/// Batch schedule shared by every strategy: worker `w` trains on
/// worker_shard(cfg, train, w), reshuffled each epoch with
/// batches(train, shard, cfg.batch_size, epoch_seed(cfg, w, epoch)). Every
/// worker starts from initial_params(cfg).
Shard worker_shard(const TrainConfig& cfg, const Dataset& train, std::size_t worker);
std::uint64_t epoch_seed(const TrainConfig& cfg, std::size_t worker, std::size_t epoch);
ParamVector initial_params(const TrainConfig& cfg);

/// W_block_start - mu * synced_mean.
ParamVector commit_update(const ParamVector& block_start, const GradVector& synced_mean, double mu);

}  // namespace gradsync
