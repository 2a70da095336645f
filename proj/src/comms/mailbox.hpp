// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <condition_variable>
#include <deque>
#include <mutex>
#include <string>

#include "gradsync/comms.hpp"
#include "gradsync/errors.hpp"

namespace gradsync::comms::detail {

// Unbounded FIFO of frames from one sender on one channel.
class Mailbox {
 public:
  void push(Frame frame) {
    {
      std::lock_guard lk(mu_);
      if (closed_) return;
      frames_.push_back(std::move(frame));
    }
    cv_.notify_all();
  }

  Frame pop(const std::string& what) {
    std::unique_lock lk(mu_);
    cv_.wait(lk, [&] { return !frames_.empty() || closed_; });
    if (frames_.empty()) throw TransportError(what + ": link closed");
    Frame f = std::move(frames_.front());
    frames_.pop_front();
    return f;
  }

  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<Frame> frames_;
  bool closed_ = false;
};

inline std::size_t channel_of(FrameType type) { return type == FrameType::kChunk ? 0 : 1; }

}  // namespace gradsync::comms::detail
