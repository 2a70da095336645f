// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradsync/simclock.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <optional>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "gradsync/errors.hpp"

namespace gradsync::sim {

bool ActorRankLess::operator()(const ActorId& a, const ActorId& b) const {
  auto role_rank = [](Role r) { return r == Role::kSync ? 0 : 1; };
  return std::tuple(a.worker, role_rank(a.role)) < std::tuple(b.worker, role_rank(b.role));
}

std::string to_string(Role role) { return role == Role::kTrainer ? "P_t" : "P_s"; }

std::string to_string(Phase phase) {
  switch (phase) {
    case Phase::kCompute: return "compute";
    case Phase::kSync: return "sync";
    case Phase::kWait: return "wait";
    case Phase::kCommit: return "commit";
  }
  return "?";
}

std::string to_string(ClockMode mode) { return mode == ClockMode::kReal ? "real" : "virtual"; }

Role parse_role(const std::string& s) {
  if (s == "P_t") return Role::kTrainer;
  if (s == "P_s") return Role::kSync;
  throw ParseError(fmt::format("unknown role '{}'", s));
}

Phase parse_phase(const std::string& s) {
  if (s == "compute") return Phase::kCompute;
  if (s == "sync") return Phase::kSync;
  if (s == "wait") return Phase::kWait;
  if (s == "commit") return Phase::kCommit;
  throw ParseError(fmt::format("unknown phase '{}'", s));
}

ClockMode parse_clock_mode(const std::string& s) {
  if (s == "real") return ClockMode::kReal;
  if (s == "virtual") return ClockMode::kVirtual;
  throw ConfigError(fmt::format("unknown clock mode '{}'", s));
}

void EventLog::append(const PhaseEvent& e) {
  std::lock_guard lk(mu_);
  events_.push_back(e);
}

std::vector<PhaseEvent> EventLog::snapshot() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::size_t EventLog::size() const {
  std::lock_guard lk(mu_);
  return events_.size();
}

void validate_log(std::span<const PhaseEvent> log) {
  std::map<ActorId, Duration, ActorRankLess> last_end;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const PhaseEvent& e = log[i];
    if (e.end < e.start) {
      throw IntegrityError(fmt::format("event {} ends before it starts", i));
    }
    const ActorId id{e.worker, e.role};
    auto it = last_end.find(id);
    if (it != last_end.end() && e.start < it->second) {
      throw IntegrityError(fmt::format("event {} overlaps the previous event of worker {} {}", i,
                                       e.worker, to_string(e.role)));
    }
    last_end[id] = e.end;
  }
}

std::map<std::size_t, Breakdown> breakdown(std::span<const PhaseEvent> log) {
  validate_log(log);
  std::map<std::size_t, Breakdown> out;
  for (const PhaseEvent& e : log) {
    Breakdown& b = out[e.worker];
    const Duration len = e.length();
    if (e.role == Role::kTrainer) {
      switch (e.phase) {
        case Phase::kCompute: b.compute += len; break;
        case Phase::kSync: b.sync += len; break;
        case Phase::kWait: b.wait += len; break;
        case Phase::kCommit: b.commit += len; break;
      }
      b.elapsed = std::max(b.elapsed, e.end);
    } else {
      switch (e.phase) {
        case Phase::kSync: b.hidden_sync += len; break;
        case Phase::kWait: b.hidden_wait += len; break;
        case Phase::kCommit: b.commit += len; break;
        case Phase::kCompute: b.compute += len; break;
      }
    }
  }
  return out;
}

std::size_t count_started_before(std::span<const PhaseEvent> log, std::size_t worker, Role role,
                                 Phase phase, Duration window_end) {
  return static_cast<std::size_t>(std::count_if(log.begin(), log.end(), [&](const PhaseEvent& e) {
    return e.worker == worker && e.role == role && e.phase == phase && e.start < window_end;
  }));
}

Duration log_end(std::span<const PhaseEvent> log) {
  Duration end{0};
  for (const PhaseEvent& e : log) end = std::max(end, e.end);
  return end;
}

void write_events_csv(const std::filesystem::path& path, std::span<const PhaseEvent> log) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "worker,role,phase,start_ns,end_ns,step_index\n";
  for (const PhaseEvent& e : log) {
    out << fmt::format("{},{},{},{},{},{}\n", e.worker, to_string(e.role), to_string(e.phase),
                       e.start.count(), e.end.count(), e.step_index);
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<PhaseEvent> read_events_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != "worker,role,phase,start_ns,end_ns,step_index") {
    throw ParseError(fmt::format("{}: missing event-log header", path.string()));
  }
  std::vector<PhaseEvent> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string worker, role, phase, start, end, step;
    if (!std::getline(ss, worker, ',') || !std::getline(ss, role, ',') ||
        !std::getline(ss, phase, ',') || !std::getline(ss, start, ',') ||
        !std::getline(ss, end, ',') || !std::getline(ss, step)) {
      throw ParseError(fmt::format("{}:{}: expected 6 fields", path.string(), line_no));
    }
    try {
      out.push_back(PhaseEvent{std::stoull(worker), parse_role(role), parse_phase(phase),
                               Duration(std::stoll(start)), Duration(std::stoll(end)),
                               std::stoull(step)});
    } catch (const std::logic_error&) {
      throw ParseError(fmt::format("{}:{}: malformed number", path.string(), line_no));
    }
  }
  return out;
}

void Clock::run(std::vector<Actor> actors, const std::function<void()>& on_abort) {
  std::mutex err_mu;
  std::exception_ptr first;
  std::atomic<bool> torn_down{false};
  auto fail = [&](std::exception_ptr e) {
    {
      std::lock_guard lk(err_mu);
      if (!first) first = e;
    }
    if (!torn_down.exchange(true)) {
      abort();
      if (on_abort) on_abort();
    }
  };

  begin_run(actors);
  std::vector<std::thread> threads;
  threads.reserve(actors.size());
  for (Actor& a : actors) {
    threads.emplace_back([this, &fail, &a] {
      try {
        enter(a.id);
        a.body();
      } catch (const Aborted&) {
      } catch (...) {
        fail(std::current_exception());
      }
      leave(a.id);
    });
  }
  for (std::thread& t : threads) t.join();
  end_run();
  if (first) std::rethrow_exception(first);
}

namespace {

class RealClock final : public Clock {
 public:
  RealClock() : origin_(std::chrono::steady_clock::now()) {}

  ClockMode mode() const override { return ClockMode::kReal; }

  Duration now(ActorId) const override {
    return std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() - origin_);
  }

  PhaseEvent advance(ActorId who, Phase phase, Duration cost, std::uint64_t step) override {
    if (cost < Duration::zero()) throw Error("advance: negative cost");
    const Duration end = now(who);
    PhaseEvent e{who.worker, who.role, phase, end - cost, end, step};
    log_.append(e);
    return e;
  }

  void wait(ActorId who, std::unique_lock<std::mutex>& lock, std::condition_variable& cv,
            const std::function<bool()>& pred, std::uint64_t step) override {
    if (pred()) return;
    const Duration t0 = now(who);
    while (!pred()) {
      if (aborted_) throw Aborted();
      cv.wait_for(lock, std::chrono::milliseconds(10));
    }
    const Duration t1 = now(who);
    log_.append(PhaseEvent{who.worker, who.role, Phase::kWait, t0, t1, step});
  }

  void notify(std::condition_variable& cv, ActorId) override { cv.notify_all(); }

 protected:
  void begin_run(const std::vector<Actor>&) override { aborted_ = false; }
  void enter(ActorId) override {}
  void leave(ActorId) override {}
  void abort() override { aborted_ = true; }
  void end_run() override {}

 private:
  std::chrono::steady_clock::time_point origin_;
  std::atomic<bool> aborted_{false};
};

class VirtualClock final : public Clock {
 public:
  ClockMode mode() const override { return ClockMode::kVirtual; }

  Duration now(ActorId who) const override {
    std::lock_guard g(mu_);
    auto it = actors_.find(who);
    return it == actors_.end() ? Duration::zero() : it->second.time;
  }

  PhaseEvent advance(ActorId who, Phase phase, Duration cost, std::uint64_t step) override {
    if (cost < Duration::zero()) throw Error("advance: negative cost");
    std::unique_lock g(mu_);
    State& st = actors_[who];
    PhaseEvent e{who.worker, who.role, phase, st.time, st.time + cost, step};
    log_.append(e);
    st.time += cost;
    if (scheduling_ && running_ == who) {
      st.status = Status::kReady;
      running_.reset();
      pick_next_locked();
      park_locked(g, who, st);
    }
    return e;
  }

  void wait(ActorId who, std::unique_lock<std::mutex>& lock, std::condition_variable& cv,
            const std::function<bool()>& pred, std::uint64_t step) override {
    if (pred()) return;
    Duration since;
    {
      std::lock_guard g(mu_);
      if (!scheduling_ || running_ != who) {
        throw ProtocolError("virtual wait outside the scheduler would never be woken");
      }
      since = actors_[who].time;
    }
    while (!pred()) {
      lock.unlock();
      {
        std::unique_lock g(mu_);
        State& st = actors_[who];
        st.status = Status::kBlocked;
        st.key = &cv;
        running_.reset();
        pick_next_locked();
        park_locked(g, who, st);
      }
      lock.lock();
    }
    std::lock_guard g(mu_);
    const Duration t = actors_[who].time;
    if (t > since) log_.append(PhaseEvent{who.worker, who.role, Phase::kWait, since, t, step});
  }

  void notify(std::condition_variable& cv, ActorId waker) override {
    std::lock_guard g(mu_);
    const Duration t = actors_[waker].time;
    for (auto& [id, st] : actors_) {
      if (st.status == Status::kBlocked && st.key == &cv) {
        st.status = Status::kReady;
        st.key = nullptr;
        st.time = std::max(st.time, t);
      }
    }
  }

 protected:
  void begin_run(const std::vector<Actor>& actors) override {
    std::lock_guard g(mu_);
    aborted_ = false;
    deadlock_ = nullptr;
    for (const Actor& a : actors) actors_[a.id].status = Status::kReady;
    scheduling_ = true;
    running_.reset();
    pick_next_locked();
  }

  void enter(ActorId who) override {
    std::unique_lock g(mu_);
    park_locked(g, who, actors_[who]);
  }

  void leave(ActorId who) override {
    std::lock_guard g(mu_);
    actors_[who].status = Status::kDone;
    if (running_ == who) {
      running_.reset();
      pick_next_locked();
    }
  }

  void abort() override {
    std::lock_guard g(mu_);
    abort_locked();
  }

  void end_run() override {
    std::exception_ptr deadlock;
    {
      std::lock_guard g(mu_);
      scheduling_ = false;
      running_.reset();
      deadlock = deadlock_;
    }
    if (deadlock) std::rethrow_exception(deadlock);
  }

 private:
  enum class Status { kReady, kRunning, kBlocked, kDone };

  struct State {
    Duration time{0};
    Status status = Status::kDone;
    const void* key = nullptr;
    std::condition_variable cv;
  };

  // Blocks the calling actor until the scheduler hands it the token.
  void park_locked(std::unique_lock<std::mutex>& g, ActorId who, State& st) {
    st.cv.wait(g, [&] { return running_ == who || aborted_; });
    if (aborted_) throw Aborted();
    st.status = Status::kRunning;
  }

  void pick_next_locked() {
    const ActorId* best = nullptr;
    State* best_state = nullptr;
    bool any_blocked = false;
    for (auto& [id, st] : actors_) {
      if (st.status == Status::kBlocked) any_blocked = true;
      if (st.status != Status::kReady) continue;
      if (best == nullptr || st.time < best_state->time) {
        best = &id;
        best_state = &st;
      }
    }
    if (best != nullptr) {
      running_ = *best;
      best_state->cv.notify_one();
      return;
    }
    if (any_blocked && !aborted_) {
      std::string who;
      for (const auto& [id, st] : actors_) {
        if (st.status == Status::kBlocked) who += fmt::format(" {}/{}", id.worker, to_string(id.role));
      }
      deadlock_ = std::make_exception_ptr(
          ProtocolError("virtual scheduler deadlock: every live actor is blocked:" + who));
      abort_locked();
    }
  }

  void abort_locked() {
    aborted_ = true;
    for (auto& [id, st] : actors_) st.cv.notify_all();
  }

  mutable std::mutex mu_;
  std::map<ActorId, State, ActorRankLess> actors_;
  std::optional<ActorId> running_;
  bool scheduling_ = false;
  bool aborted_ = false;
  std::exception_ptr deadlock_;
};

}  // namespace

std::unique_ptr<Clock> make_clock(ClockMode mode) {
  if (mode == ClockMode::kReal) return std::make_unique<RealClock>();
  return std::make_unique<VirtualClock>();
}

}  // namespace gradsync::sim
