// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include "strategies/runtime.hpp"

#include <cmath>

#include <fmt/format.h>

#include "gradsync/errors.hpp"

namespace gradsync {

namespace {
constexpr std::uint64_t kShardStream = 0x5348415244;  // "SHARD"
constexpr std::uint64_t kInitStream = 0x494E4954;     // "INIT"
constexpr std::uint64_t kBatchStream = 0x4241544348;  // "BATCH"
}  // namespace

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kSsgd: return "ssgd";
    case Strategy::kPsgd: return "psgd";
    case Strategy::kLocal: return "local";
    case Strategy::kHpsgd: return "hpsgd";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "ssgd") return Strategy::kSsgd;
  if (s == "psgd") return Strategy::kPsgd;
  if (s == "local") return Strategy::kLocal;
  if (s == "hpsgd") return Strategy::kHpsgd;
  throw ConfigError(fmt::format("unknown strategy '{}' (expected ssgd, psgd, local or hpsgd)", s));
}

void TrainConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (!std::isfinite(mu) || mu < 0) throw ConfigError("learning rate must be finite and >= 0");
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (gamma < 1) throw ConfigError("gamma must be >= 1");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (timing.t_train < Duration::zero()) throw ConfigError("t_train must be >= 0");
  if (!timing.multipliers.empty() && timing.multipliers.size() != n) {
    throw ConfigError(fmt::format("{} speed multipliers given for {} workers",
                                  timing.multipliers.size(), n));
  }
  for (double m : timing.multipliers) {
    if (!std::isfinite(m) || m < 0) throw ConfigError("speed multipliers must be finite and >= 0");
  }
  timing.latency.validate();
  model.validate();
}

Duration TrainConfig::step_cost(std::size_t worker) const {
  if (timing.multipliers.empty()) return timing.t_train;
  return Duration(static_cast<Duration::rep>(
      std::llround(static_cast<double>(timing.t_train.count()) * timing.multipliers.at(worker))));
}

Shard worker_shard(const TrainConfig& cfg, const Dataset& train, std::size_t worker) {
  return shard(train, cfg.n, worker, Rng(cfg.seed).fork(kShardStream));
}

std::uint64_t epoch_seed(const TrainConfig& cfg, std::size_t worker, std::size_t epoch) {
  return Rng(cfg.seed).fork(kBatchStream).fork(worker).fork(epoch).seed();
}

ParamVector initial_params(const TrainConfig& cfg) {
  Rng rng = Rng(cfg.seed).fork(kInitStream);
  return init_params(cfg.model, rng);
}

ParamVector commit_update(const ParamVector& block_start, const GradVector& synced_mean, double mu) {
  return axpy(-mu, synced_mean, block_start);
}

RunResult run_strategy(Strategy s, const TrainConfig& cfg, const TrainData& data,
                       const Hooks& hooks) {
  switch (s) {
    case Strategy::kSsgd: return run_ssgd(cfg, data, hooks);
    case Strategy::kPsgd: return run_psgd(cfg, data, hooks);
    case Strategy::kLocal: return run_local_sgd(cfg, data, hooks);
    case Strategy::kHpsgd: return run_hpsgd(cfg, data, hooks);
  }
  throw ConfigError("unknown strategy");
}

namespace detail {

BatchStream::BatchStream(const TrainConfig& cfg, const Dataset& data, std::size_t worker)
    : cfg_(cfg),
      data_(data),
      worker_(worker),
      shard_(worker_shard(cfg, data, worker)),
      steps_per_epoch_((shard_.size() + cfg.batch_size - 1) / cfg.batch_size) {
  current_ = batches(data_, shard_, cfg_.batch_size, epoch_seed(cfg_, worker_, 0));
}

const Batch& BatchStream::at(std::size_t step) {
  const std::size_t epoch = step / steps_per_epoch_;
  if (epoch != epoch_) {
    epoch_ = epoch;
    current_ = batches(data_, shard_, cfg_.batch_size, epoch_seed(cfg_, worker_, epoch));
  }
  return current_[step % steps_per_epoch_];
}

Run::Run(Strategy strategy, const TrainConfig& cfg, const TrainData& data, const Hooks& hooks)
    : strategy_(strategy), cfg_(cfg), data_(data), hooks_(hooks) {
  cfg_.validate();
  if (data_.train.meta.input_dim != cfg_.model.input_dim) {
    throw ConfigError(fmt::format("model expects {} inputs but the data has {}",
                                  cfg_.model.input_dim, data_.train.meta.input_dim));
  }
  if (data_.train.size() < cfg_.n) {
    throw ConfigError(fmt::format("{} training samples cannot feed {} workers", data_.train.size(),
                                  cfg_.n));
  }
  if (data_.test.size() == 0) throw ConfigError("empty test set");
  clock_ = sim::make_clock(cfg_.clock);
  initial_ = initial_params(cfg_);
  steps_per_epoch0_ = stream(0).steps_per_epoch();
  train_all_ = as_batch(data_.train);
  test_all_ = as_batch(data_.test);
  snapshots_.push_back(Snapshot{0, 0, Duration::zero(), initial_});
}

BatchStream Run::stream(std::size_t worker) const {
  return BatchStream(cfg_, data_.train, worker);
}

GradientResult Run::compute(sim::ActorId who, std::size_t step, const ParamVector& at,
                            BatchStream& batches) {
  const Batch& batch = batches.at(step);
  GradientResult out;
  clock_->timed(who, sim::Phase::kCompute, cfg_.step_cost(who.worker), step, [&] {
    try {
      out = compute_gradient(cfg_.model, at, batch);
    } catch (const NumericError& e) {
      throw NumericError(fmt::format("worker {} step {}: {}", who.worker, step, e.what()));
    }
  });
  return out;
}

void Run::apply(std::size_t worker, std::size_t step, const GradVector& g, ParamVector& w) const {
  try {
    axpy_inplace(-cfg_.mu, g, w);
  } catch (const NumericError& e) {
    throw NumericError(fmt::format("worker {} step {}: {}", worker, step, e.what()));
  }
}

bool Run::at_epoch_boundary(std::size_t worker, std::size_t steps_done) const {
  return worker == 0 && steps_done < cfg_.steps && steps_done % steps_per_epoch0_ == 0;
}

void Run::after_step(std::size_t worker, std::size_t steps_done, const ParamVector& model) {
  if (!at_epoch_boundary(worker, steps_done)) return;
  const Duration t = clock_->now(sim::ActorId{0, sim::Role::kTrainer});
  std::lock_guard lk(snap_mu_);
  snapshots_.push_back(Snapshot{steps_done / steps_per_epoch0_, steps_done, t, model});
}

MetricsRecord Run::record(const Snapshot& snap, std::span<const sim::PhaseEvent> log) const {
  std::vector<sim::PhaseEvent> mine;
  std::size_t syncs = 0;
  for (const sim::PhaseEvent& e : log) {
    if (e.worker != 0 || e.end > snap.time) continue;
    mine.push_back(e);
    if (e.phase == sim::Phase::kSync) ++syncs;
  }
  const sim::Breakdown b = sim::breakdown(mine)[0];
  const Evaluation eval = evaluate(cfg_.model, snap.model, test_all_);
  MetricsRecord r;
  r.strategy = to_string(strategy_);
  r.n = cfg_.n;
  r.seed = cfg_.seed;
  r.epoch = snap.epoch;
  r.step = snap.step;
  r.time = snap.time;
  r.train_loss = compute_loss(cfg_.model, snap.model, train_all_);
  r.test_accuracy = eval.accuracy;
  r.sync_count = syncs;
  r.compute_time = b.compute;
  r.sync_time = b.sync;
  r.wait_time = b.wait;
  r.hidden_sync_time = b.hidden_sync;
  return r;
}

RunResult Run::execute(std::vector<sim::Actor> actors, const std::function<void()>& on_abort,
                       const std::function<std::vector<ParamVector>()>& final_params) {
  clock_->run(std::move(actors), on_abort);
  RunResult out;
  out.params = final_params();
  out.events = clock_->log().snapshot();
  sim::validate_log(out.events);

  const Duration end = sim::log_end(out.events);
  const std::size_t last_epoch = (cfg_.steps + steps_per_epoch0_ - 1) / steps_per_epoch0_;
  snapshots_.push_back(Snapshot{last_epoch, cfg_.steps, end, out.params[0]});
  for (const Snapshot& s : snapshots_) out.metrics.push_back(record(s, out.events));
  return out;
}

}  // namespace detail
}  // namespace gradsync
