// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <condition_variable>
#include <optional>

#include <fmt/format.h>

#include "gradsync/errors.hpp"
#include "strategies/runtime.hpp"

namespace gradsync {
namespace {

using sim::ActorId;
using sim::Phase;
using sim::Role;

struct Handoff {
  GradVector acc;
  ParamVector base;
  bool final = false;
};

// State shared by one worker's P_t and P_s.
struct SharedWorkerState {
  std::mutex mu;
  std::condition_variable cv;
  bool synchronizing = false;
  ParamVector model;               // w_i, written only by P_s commits
  std::optional<Handoff> handoff;  // block waiting for P_s
  bool trainer_done = false;
  std::size_t handoffs = 0;
  std::size_t activations = 0;  // P_s activations past their commit point
};

}  // namespace

RunResult run_hpsgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks) {
  detail::Run run(Strategy::kHpsgd, cfg, data, hooks);
  sim::Clock& clock = run.clock();
  auto trainers = comms::make_collective(clock, cfg.n, cfg.timing.latency);
  auto syncers = comms::make_collective(clock, cfg.n, cfg.timing.latency);
  const std::size_t len = run.initial().size();

  std::vector<SharedWorkerState> cells(cfg.n);
  for (SharedWorkerState& c : cells) c.model = run.initial();

  auto trainer = [&](std::size_t w) {
    const ActorId who{w, Role::kTrainer};
    SharedWorkerState& cell = cells[w];
    detail::BatchStream batches = run.stream(w);
    ParamVector replica;
    ParamVector block_start;
    GradVector acc(len);
    std::size_t counter = 0;

    for (std::size_t s = 0; s < cfg.steps; ++s) {
      if (cfg.lockstep) trainers->barrier(who, w, s);
      if (counter == 0) {
        // Start a block from the freshest committed model.
        std::unique_lock lk(cell.mu);
        clock.wait(who, lk, cell.cv, [&] { return cell.activations >= cell.handoffs; }, s);
        replica = cell.model;
        block_start = cell.model;
      }
      const GradientResult g = run.compute(who, s, replica, batches);
      run.apply(w, s, g.gradient, replica);
      accumulate_into(acc, g.gradient);
      ++counter;
      if (hooks.on_step) hooks.on_step(w, s, replica);

      const bool last = s + 1 == cfg.steps;
      std::optional<ParamVector> report;
      {
        std::lock_guard lk(cell.mu);
        if (!cell.synchronizing || last) {
          if (hooks.on_handoff) hooks.on_handoff(w, cell.handoffs, block_start, replica);
          cell.handoff = Handoff{acc, block_start, last};
          acc.zero();
          counter = 0;
          cell.synchronizing = true;
          ++cell.handoffs;
        }
        if (last) cell.trainer_done = true;
        if (run.at_epoch_boundary(w, s + 1)) report = cell.model;
        clock.notify(cell.cv, who);
      }
      if (report) run.after_step(w, s + 1, *report);
    }
  };

  auto synchronizer = [&](std::size_t w) {
    const ActorId who{w, Role::kSync};
    SharedWorkerState& cell = cells[w];
    std::optional<GradVector> synced;
    ParamVector synced_base;
    std::uint64_t synced_round = 0;
    std::vector<double> payload(len + 1);

    auto commit = [&] {
      try {
        cell.model = commit_update(synced_base, *synced, cfg.mu);
      } catch (const NumericError& e) {
        throw NumericError(fmt::format("worker {} commit of round {}: {}", w, synced_round, e.what()));
      }
      if (hooks.on_commit) hooks.on_commit(w, synced_round, cell.model);
    };

    for (std::uint64_t round = 0;; ++round) {
      Handoff h;
      bool committed = false;
      {
        std::unique_lock lk(cell.mu);
        clock.wait(who, lk, cell.cv, [&] { return cell.handoff || cell.trainer_done; }, round);
        if (cell.handoff) {
          h = std::move(*cell.handoff);
          cell.handoff.reset();
        } else {
          // This trainer has finished; keep the collective going for the others.
          h = Handoff{GradVector(len), cell.model, true};
        }
        if (synced) {
          commit();
          committed = true;
        }
        ++cell.activations;
        clock.notify(cell.cv, who);
      }
      if (committed) clock.advance(who, Phase::kCommit, Duration::zero(), synced_round);

      std::copy(h.acc.begin(), h.acc.end(), payload.begin());
      payload[len] = h.final ? 1.0 : 0.0;
      syncers->allreduce_average(who, w, payload, round);
      const bool all_done = payload[len] == 1.0;
      synced = GradVector(std::vector<double>(payload.begin(), payload.begin() + len));
      synced_base = std::move(h.base);
      synced_round = round;

      std::lock_guard lk(cell.mu);
      if (all_done) {
        commit();
        break;
      }
      if (!cell.handoff) cell.synchronizing = false;
      clock.notify(cell.cv, who);
    }
    clock.advance(who, Phase::kCommit, Duration::zero(), synced_round);
  };

  std::vector<sim::Actor> actors;
  for (std::size_t w = 0; w < cfg.n; ++w) {
    actors.push_back({ActorId{w, Role::kSync}, [&, w] { synchronizer(w); }});
    actors.push_back({ActorId{w, Role::kTrainer}, [&, w] { trainer(w); }});
  }
  return run.execute(
      std::move(actors),
      [&] {
        trainers->shutdown();
        syncers->shutdown();
      },
      [&] {
        std::vector<ParamVector> out;
        for (SharedWorkerState& c : cells) out.push_back(c.model);
        return out;
      });
}

}  // namespace gradsync
