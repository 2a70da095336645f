// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "gradsync/comms.hpp"
#include "gradsync/errors.hpp"

namespace gradsync::comms {
namespace {

using sim::Phase;

class VirtualCollective final : public Collective {
 public:
  VirtualCollective(sim::Clock& clock, std::size_t world, LatencyModel latency)
      : clock_(clock), world_(world), latency_(latency), slots_(world), taken_(world, false) {}

  std::size_t world() const override { return world_; }

  void allreduce_average(sim::ActorId who, std::size_t rank, std::span<double> values,
                         std::uint64_t round) override {
    check_rank(rank);
    {
      std::unique_lock lk(mu_);
      if (arrived_ == 0) {
        round_ = round;
      } else if (round != round_) {
        throw ProtocolError(fmt::format("rank {} joined round {} while round {} is assembling", rank,
                                        round, round_));
      }
      if (taken_[rank]) throw ProtocolError(fmt::format("rank {} entered a collective twice", rank));
      taken_[rank] = true;
      slots_[rank] = values;
      const std::uint64_t generation = generation_;
      if (++arrived_ == world_) {
        ring_allreduce_average(slots_);
        arrived_ = 0;
        std::fill(taken_.begin(), taken_.end(), false);
        ++generation_;
        ++rounds_;
        clock_.notify(cv_, who);
      } else {
        clock_.wait(who, lk, cv_, [&] { return generation_ != generation; }, round);
      }
    }
    clock_.advance(who, Phase::kSync, latency_.delay(values.size(), world_, round), round);
  }

  void barrier(sim::ActorId who, std::size_t rank, std::uint64_t step) override {
    check_rank(rank);
    std::unique_lock lk(mu_);
    const std::uint64_t generation = barrier_generation_;
    if (++barrier_arrived_ == world_) {
      barrier_arrived_ = 0;
      ++barrier_generation_;
      clock_.notify(barrier_cv_, who);
    } else {
      clock_.wait(who, lk, barrier_cv_, [&] { return barrier_generation_ != generation; }, step);
    }
  }

  std::uint64_t rounds() const override {
    std::lock_guard lk(mu_);
    return rounds_;
  }

  void shutdown() override {}

 private:
  void check_rank(std::size_t rank) const {
    if (rank >= world_) throw ProtocolError(fmt::format("rank {} outside world {}", rank, world_));
  }

  sim::Clock& clock_;
  std::size_t world_;
  LatencyModel latency_;
  mutable std::mutex mu_;
  std::condition_variable cv_, barrier_cv_;
  std::vector<std::span<double>> slots_;
  std::vector<bool> taken_;
  std::size_t arrived_ = 0;
  std::uint64_t round_ = 0;
  std::uint64_t generation_ = 0;
  std::uint64_t rounds_ = 0;
  std::size_t barrier_arrived_ = 0;
  std::uint64_t barrier_generation_ = 0;
};

class ThreadedCollective final : public Collective {
 public:
  ThreadedCollective(sim::Clock& clock, std::size_t world, LatencyModel latency)
      : clock_(clock), hub_(world) {
    for (std::size_t r = 0; r < world; ++r) {
      comms_.push_back(std::make_unique<Communicator>(hub_.transport(r), latency));
    }
  }

  std::size_t world() const override { return comms_.size(); }

  void allreduce_average(sim::ActorId who, std::size_t rank, std::span<double> values,
                         std::uint64_t round) override {
    Communicator& c = *comms_.at(rank);
    clock_.timed(who, Phase::kWait, Duration::zero(), round, [&] { c.barrier(); });
    clock_.timed(who, Phase::kSync, Duration::zero(), round, [&] { c.allreduce_average(values); });
    if (rank == 0) ++rounds_;
  }

  void barrier(sim::ActorId who, std::size_t rank, std::uint64_t step) override {
    Communicator& c = *comms_.at(rank);
    clock_.timed(who, Phase::kWait, Duration::zero(), step, [&] { c.barrier(); });
  }

  std::uint64_t rounds() const override { return rounds_; }

  void shutdown() override { hub_.close(); }

 private:
  sim::Clock& clock_;
  InProcessHub hub_;
  std::vector<std::unique_ptr<Communicator>> comms_;
  std::atomic<std::uint64_t> rounds_{0};
};

}  // namespace

std::unique_ptr<Collective> make_collective(sim::Clock& clock, std::size_t world,
                                            LatencyModel latency) {
  if (world == 0) throw ConfigError("collective: world must be >= 1");
  latency.validate();
  if (clock.mode() == sim::ClockMode::kVirtual) {
    return std::make_unique<VirtualCollective>(clock, world, latency);
  }
  return std::make_unique<ThreadedCollective>(clock, world, latency);
}

}  // namespace gradsync::comms
