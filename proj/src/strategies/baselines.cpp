// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include "strategies/runtime.hpp"

namespace gradsync {
namespace {

using sim::ActorId;
using sim::Role;

enum class Exchange { kNone, kGradients, kModel };

// PSGD, SSGD and Local SGD differ only in what is averaged and how often.
RunResult run_single_role(Strategy strategy, Exchange exchange, std::size_t period,
                          const TrainConfig& cfg, const TrainData& data, const Hooks& hooks) {
  detail::Run run(strategy, cfg, data, hooks);
  auto coll = comms::make_collective(run.clock(), cfg.n, cfg.timing.latency);
  std::vector<ParamVector> params(cfg.n, run.initial());

  std::vector<sim::Actor> actors;
  for (std::size_t w = 0; w < cfg.n; ++w) {
    const ActorId who{w, Role::kTrainer};
    actors.push_back({who, [&, w, who] {
      detail::BatchStream batches = run.stream(w);
      ParamVector& p = params[w];
      std::uint64_t round = 0;
      for (std::size_t s = 0; s < cfg.steps; ++s) {
        if (cfg.lockstep) coll->barrier(who, w, s);
        GradientResult g = run.compute(who, s, p, batches);
        if (exchange == Exchange::kGradients) {
          coll->allreduce_average(who, w, g.gradient.values(), round++);
        }
        run.apply(w, s, g.gradient, p);
        if (exchange == Exchange::kModel && (s + 1) % period == 0) {
          coll->allreduce_average(who, w, p.values(), round++);
        }
        if (hooks.on_step) hooks.on_step(w, s, p);
        run.after_step(w, s + 1, p);
      }
    }});
  }
  return run.execute(std::move(actors), [&] { coll->shutdown(); }, [&] { return params; });
}

}  // namespace

RunResult run_psgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks) {
  return run_single_role(Strategy::kPsgd, Exchange::kNone, 1, cfg, data, hooks);
}

RunResult run_ssgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks) {
  return run_single_role(Strategy::kSsgd, Exchange::kGradients, 1, cfg, data, hooks);
}

RunResult run_local_sgd(const TrainConfig& cfg, const TrainData& data, const Hooks& hooks) {
  return run_single_role(Strategy::kLocal, Exchange::kModel, cfg.gamma, cfg, data, hooks);
}

}  // namespace gradsync
