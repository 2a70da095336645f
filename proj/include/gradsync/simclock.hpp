// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace gradsync::sim {

using Duration = std::chrono::nanoseconds;

enum class ClockMode { kReal, kVirtual };

/// P_t trains; P_s synchronizes. Strategies without a synchronization role
/// run everything on P_t.
enum class Role : std::uint8_t { kTrainer, kSync };

enum class Phase : std::uint8_t { kCompute, kSync, kWait, kCommit };

struct ActorId {
  std::size_t worker = 0;
  Role role = Role::kTrainer;

  bool operator==(const ActorId&) const = default;
};

/// Scheduling rank used to break virtual-time ties: by worker, and within a
/// worker P_s before P_t, so a synchronization that completes at time t is
/// visible to a trainer decision taken at t.
struct ActorRankLess {
  bool operator()(const ActorId& a, const ActorId& b) const;
};

struct PhaseEvent {
  std::size_t worker = 0;
  Role role = Role::kTrainer;
  Phase phase = Phase::kCompute;
  Duration start{0};
  Duration end{0};
  /// Training step for compute/wait events; collective round for sync and
  /// commit events (a commit carries the round whose result it applies).
  std::uint64_t step_index = 0;

  Duration length() const { return end - start; }
  bool operator==(const PhaseEvent&) const = default;
};

std::string to_string(Role role);
std::string to_string(Phase phase);
std::string to_string(ClockMode mode);
Role parse_role(const std::string& s);
Phase parse_phase(const std::string& s);
ClockMode parse_clock_mode(const std::string& s);

/// Append-only, thread-safe event log.
class EventLog {
 public:
  void append(const PhaseEvent& e);
  std::vector<PhaseEvent> snapshot() const;
  std::size_t size() const;

 private:
  mutable std::mutex mu_;
  std::vector<PhaseEvent> events_;
};

/// Per-worker time totals.
struct Breakdown {
  Duration compute{0};
  Duration sync{0};  // on the trainer's critical path
  Duration wait{0};  // trainer idling (collectives, barriers)
  Duration commit{0};
  Duration hidden_sync{0};  // P_s synchronization overlapped with training
  Duration hidden_wait{0};  // P_s waiting for peers
  Duration elapsed{0};      // end of the trainer's last event

  bool operator==(const Breakdown&) const = default;
};

/// Throws IntegrityError if any event ends before it starts or two events of
/// one (worker, role) overlap or are out of order.
void validate_log(std::span<const PhaseEvent> log);

/// Totals by worker. Validates the log first.
std::map<std::size_t, Breakdown> breakdown(std::span<const PhaseEvent> log);

/// Events of (worker, role, phase) that start strictly before `window_end`.
std::size_t count_started_before(std::span<const PhaseEvent> log, std::size_t worker, Role role,
                                 Phase phase, Duration window_end);

/// Latest end time in the log (zero when empty).
Duration log_end(std::span<const PhaseEvent> log);

/// CSV with header `worker,role,phase,start_ns,end_ns,step_index`.
void write_events_csv(const std::filesystem::path& path, std::span<const PhaseEvent> log);
std::vector<PhaseEvent> read_events_csv(const std::filesystem::path& path);

/// Raised inside actors when a run is torn down after another actor failed.
class Aborted : public std::exception {
 public:
  const char* what() const noexcept override { return "run aborted"; }
};

struct Actor {
  ActorId id;
  std::function<void()> body;
};

/// Time source plus event log.
///
/// In virtual mode a single logical scheduler runs one actor at a time, always
/// the ready actor with the smallest (time, rank); time moves only through
/// advance() and through waits that end when another actor notifies. In real
/// mode actors are plain threads and every duration is measured.
class Clock {
 public:
  virtual ~Clock() = default;

  virtual ClockMode mode() const = 0;

  /// Current time of `who` (virtual: the actor's own clock; real: wall time
  /// since the clock was created).
  virtual Duration now(ActorId who) const = 0;

  /// Records a phase of length `cost` for `who`. Virtual: the event spans
  /// [now, now + cost] and the actor yields to the scheduler. Real: `cost` is
  /// a measured duration and the event ends at the current wall time.
  virtual PhaseEvent advance(ActorId who, Phase phase, Duration cost, std::uint64_t step) = 0;

  /// Blocks `who` until `pred()` holds. `lock` must hold the mutex guarding
  /// the predicate's state; it is released while blocked. Time spent blocked
  /// is logged as a wait event. Spurious wake-ups re-check the predicate.
  virtual void wait(ActorId who, std::unique_lock<std::mutex>& lock, std::condition_variable& cv,
                    const std::function<bool()>& pred, std::uint64_t step) = 0;

  /// Wakes everything waiting on `cv`. Virtual waiters resume no earlier than
  /// the waker's current time.
  virtual void notify(std::condition_variable& cv, ActorId waker) = 0;

  /// Runs `work` as one phase: virtual mode charges `virtual_cost`, real mode
  /// measures the wall time `work` takes.
  template <class F>
  PhaseEvent timed(ActorId who, Phase phase, Duration virtual_cost, std::uint64_t step, F&& work) {
    if (mode() == ClockMode::kVirtual) {
      std::forward<F>(work)();
      return advance(who, phase, virtual_cost, step);
    }
    const Duration t0 = now(who);
    std::forward<F>(work)();
    return advance(who, phase, now(who) - t0, step);
  }

  /// Runs every actor to completion on its own thread. If an actor throws,
  /// the others are torn down (they see Aborted), `on_abort` runs, and the
  /// first failure is rethrown here.
  void run(std::vector<Actor> actors, const std::function<void()>& on_abort = {});

  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }

 protected:
  virtual void begin_run(const std::vector<Actor>& actors) = 0;
  virtual void enter(ActorId who) = 0;
  virtual void leave(ActorId who) = 0;
  virtual void abort() = 0;
  virtual void end_run() = 0;

  EventLog log_;
};

std::unique_ptr<Clock> make_clock(ClockMode mode);

}  // namespace gradsync::sim
