// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <thread>

#include <fmt/format.h>

#include "gradsync/comms.hpp"
#include "gradsync/errors.hpp"

namespace gradsync::comms {
namespace {

// Ring schedule shared by the in-process simulation and the Communicator.
// Reduce-scatter step s: rank r sends chunk (r - s) and folds the incoming
// chunk (r - s - 1) as `incoming + own`, so chunk c is summed in ring order
// c, c+1, ..., c-1. After w-1 steps rank r owns the full sum of chunk r+1.
// All-gather step s: rank r forwards chunk (r + 1 - s) and stores (r - s).
std::size_t mod(std::ptrdiff_t x, std::size_t w) {
  const auto m = static_cast<std::ptrdiff_t>(w);
  return static_cast<std::size_t>(((x % m) + m) % m);
}

std::size_t scatter_send(std::size_t r, std::size_t s, std::size_t w) {
  return mod(static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(s), w);
}
std::size_t scatter_recv(std::size_t r, std::size_t s, std::size_t w) {
  return mod(static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(s) - 1, w);
}
std::size_t gather_send(std::size_t r, std::size_t s, std::size_t w) {
  return mod(static_cast<std::ptrdiff_t>(r) + 1 - static_cast<std::ptrdiff_t>(s), w);
}
std::size_t gather_recv(std::size_t r, std::size_t s, std::size_t w) {
  return mod(static_cast<std::ptrdiff_t>(r) - static_cast<std::ptrdiff_t>(s), w);
}

std::span<double> chunk(std::span<double> v, std::size_t w, std::size_t c) {
  const auto [lo, hi] = chunk_bounds(v.size(), w, c);
  return v.subspan(lo, hi - lo);
}

void divide_owned_chunk(std::span<double> v, std::size_t r, std::size_t w) {
  const double world_size = static_cast<double>(w);
  for (double& x : chunk(v, w, (r + 1) % w)) x /= world_size;
}

}  // namespace

std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t len, std::size_t parts,
                                                 std::size_t c) {
  const std::size_t base = len / parts;
  const std::size_t extra = len % parts;
  const std::size_t lo = c * base + std::min(c, extra);
  return {lo, lo + base + (c < extra ? 1 : 0)};
}

void ring_allreduce_average(std::span<const std::span<double>> buffers) {
  const std::size_t w = buffers.size();
  if (w == 0) throw ProtocolError("allreduce over an empty group");
  const std::size_t len = buffers[0].size();
  for (std::size_t r = 1; r < w; ++r) {
    if (buffers[r].size() != len) {
      throw ProtocolError(fmt::format("allreduce payload length mismatch: rank 0 has {}, rank {} has {}",
                                      len, r, buffers[r].size()));
    }
  }
  if (w == 1) return;

  std::vector<std::vector<double>> in_flight(w);
  for (std::size_t s = 0; s + 1 < w; ++s) {
    for (std::size_t r = 0; r < w; ++r) {
      const auto src = chunk(buffers[r], w, scatter_send(r, s, w));
      in_flight[(r + 1) % w].assign(src.begin(), src.end());
    }
    for (std::size_t r = 0; r < w; ++r) {
      auto dst = chunk(buffers[r], w, scatter_recv(r, s, w));
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = in_flight[r][i] + dst[i];
    }
  }
  for (std::size_t r = 0; r < w; ++r) divide_owned_chunk(buffers[r], r, w);
  for (std::size_t s = 0; s + 1 < w; ++s) {
    for (std::size_t r = 0; r < w; ++r) {
      const auto src = chunk(buffers[r], w, gather_send(r, s, w));
      in_flight[(r + 1) % w].assign(src.begin(), src.end());
    }
    for (std::size_t r = 0; r < w; ++r) {
      auto dst = chunk(buffers[r], w, gather_recv(r, s, w));
      std::copy(in_flight[r].begin(), in_flight[r].end(), dst.begin());
    }
  }
}

class Communicator::Guard {
 public:
  explicit Guard(std::atomic<bool>& busy) : busy_(busy) {
    if (busy_.exchange(true)) {
      throw ProtocolError("a collective is already in flight on this communicator");
    }
  }
  ~Guard() { busy_ = false; }
  Guard(const Guard&) = delete;
  Guard& operator=(const Guard&) = delete;

 private:
  std::atomic<bool>& busy_;
};

Communicator::Communicator(std::shared_ptr<Transport> transport, LatencyModel latency,
                           bool inject_latency)
    : transport_(std::move(transport)), latency_(latency), inject_latency_(inject_latency) {
  if (!transport_) throw ConfigError("Communicator: null transport");
  latency_.validate();
}

void Communicator::allreduce_average(std::span<double> values) {
  Guard guard(busy_);
  const std::size_t w = world();
  const std::size_t r = rank();
  const std::uint64_t round = round_++;
  if (w > 1) {
    const std::size_t next = (r + 1) % w;
    const std::size_t prev = (r + w - 1) % w;
    const auto rank32 = static_cast<std::uint32_t>(r);

    auto exchange = [&](std::size_t send_c, std::size_t recv_c, bool fold) {
      const auto src = chunk(values, w, send_c);
      transport_->send(next, Frame{FrameType::kChunk, rank32, {src.begin(), src.end()}});
      const Frame in = transport_->recv(prev, FrameType::kChunk);
      auto dst = chunk(values, w, recv_c);
      if (in.payload.size() != dst.size()) {
        throw ProtocolError(fmt::format(
            "rank {}: chunk {} has {} values, expected {} (payload lengths differ across ranks)", r,
            recv_c, in.payload.size(), dst.size()));
      }
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = fold ? in.payload[i] + dst[i] : in.payload[i];
    };

    for (std::size_t s = 0; s + 1 < w; ++s) exchange(scatter_send(r, s, w), scatter_recv(r, s, w), true);
    divide_owned_chunk(values, r, w);
    for (std::size_t s = 0; s + 1 < w; ++s) exchange(gather_send(r, s, w), gather_recv(r, s, w), false);
  }
  if (inject_latency_) {
    const Duration d = latency_.delay(values.size(), w, round);
    if (d > Duration::zero()) std::this_thread::sleep_for(d);
  }
}

void Communicator::barrier() {
  Guard guard(busy_);
  const std::size_t w = world();
  if (w == 1) return;
  const auto rank32 = static_cast<std::uint32_t>(rank());
  if (rank() == 0) {
    for (std::size_t p = 1; p < w; ++p) transport_->recv(p, FrameType::kBarrier);
    for (std::size_t p = 1; p < w; ++p) transport_->send(p, Frame{FrameType::kBarrier, 0, {}});
  } else {
    transport_->send(0, Frame{FrameType::kBarrier, rank32, {}});
    transport_->recv(0, FrameType::kBarrier);
  }
}

}  // namespace gradsync::comms
