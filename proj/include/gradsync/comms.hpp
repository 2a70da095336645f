// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gradsync/simclock.hpp"
#include "gradsync/tensor.hpp"

namespace gradsync::comms {

using sim::Duration;

/// Injected cost of one collective:
///   base + per_element * len + per_peer * world + jitter
/// where jitter is drawn deterministically in [0, jitter_max] from
/// (jitter_seed, round). A world of one has nothing to exchange and costs 0.
struct LatencyModel {
  Duration base{0};
  Duration per_element{0};
  Duration per_peer{0};
  Duration jitter_max{0};
  std::uint64_t jitter_seed = 0;

  /// Throws ConfigError if any component is negative.
  void validate() const;
  Duration delay(std::size_t len, std::size_t world, std::uint64_t round) const;
};

// ---------------------------------------------------------------------------
// Wire format

enum class FrameType : std::uint32_t { kChunk = 1, kBarrier = 2, kHello = 3 };

/// On the wire: u32 LE type tag, u32 LE sender rank, u64 LE payload byte
/// length, then the payload as LE IEEE-754 binary64 values.
struct Frame {
  FrameType type = FrameType::kChunk;
  std::uint32_t rank = 0;
  std::vector<double> payload;

  bool operator==(const Frame&) const = default;
};

inline constexpr std::size_t kFrameHeaderBytes = 16;

std::vector<std::byte> encode_frame(const Frame& frame);

/// Parses one complete frame. Throws ProtocolError on an unknown tag, a
/// payload length that is not a multiple of 8, or a size mismatch.
Frame decode_frame(std::span<const std::byte> bytes);

struct FrameHeader {
  FrameType type;
  std::uint32_t rank;
  std::uint64_t payload_bytes;
};
FrameHeader decode_frame_header(std::span<const std::byte, kFrameHeaderBytes> bytes);

// ---------------------------------------------------------------------------
// Transports

/// Point-to-point delivery between the ranks of one group. Chunk frames
/// travel the ring links (rank -> rank+1); barrier and hello frames travel the
/// control links between rank 0 and every peer.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::size_t rank() const = 0;
  virtual std::size_t world() const = 0;
  virtual void send(std::size_t to, const Frame& frame) = 0;
  /// Next frame of `type` from `from`. Throws TransportError once the link
  /// is closed.
  virtual Frame recv(std::size_t from, FrameType type) = 0;
  /// Unblocks every pending and future recv with a TransportError.
  virtual void close() = 0;
};

/// Shared-memory mailboxes for `world` ranks living in one process.
class InProcessHub {
 public:
  explicit InProcessHub(std::size_t world);
  ~InProcessHub();

  std::size_t world() const;
  std::shared_ptr<Transport> transport(std::size_t rank);
  void close();

  struct State;

 private:
  std::shared_ptr<State> state_;
};

/// Bound, listening TCP socket. Port 0 picks an ephemeral port.
class SocketListener {
 public:
  static SocketListener bind(const std::string& host, std::uint16_t port);
  SocketListener(SocketListener&& other) noexcept;
  SocketListener& operator=(SocketListener&& other) noexcept;
  SocketListener(const SocketListener&) = delete;
  SocketListener& operator=(const SocketListener&) = delete;
  ~SocketListener();

  std::uint16_t port() const { return port_; }
  const std::string& host() const { return host_; }
  int release();

 private:
  SocketListener(int fd, std::string host, std::uint16_t port)
      : fd_(fd), host_(std::move(host)), port_(port) {}
  int fd_ = -1;
  std::string host_;
  std::uint16_t port_ = 0;
};

/// TCP transport. Rank 0 listens on the rendezvous address; every other rank
/// connects to it and sends a hello frame carrying the port of its own ring
/// listener. Rank 0 answers each peer with a hello listing every rank's ring
/// port, after which each rank connects to its ring successor.
std::shared_ptr<Transport> host_socket_transport(SocketListener listener, std::size_t world,
                                                 Duration timeout = std::chrono::seconds(10));
std::shared_ptr<Transport> join_socket_transport(const std::string& host, std::uint16_t port,
                                                 std::size_t rank, std::size_t world,
                                                 Duration timeout = std::chrono::seconds(10));

// ---------------------------------------------------------------------------
// Ring AllReduce

/// Contiguous chunk c of a length-`len` payload split into `parts` chunks
/// (sizes differ by at most one; the first len % parts chunks are longer).
std::pair<std::size_t, std::size_t> chunk_bounds(std::size_t len, std::size_t parts,
                                                 std::size_t c);

/// Ring AllReduce-average executed for all ranks in one address space:
/// reduce-scatter then all-gather, 2 * (world - 1) steps, with the exact
/// chunk schedule and summation order the distributed Communicator uses, so
/// both produce bitwise-identical results. Every buffer ends up holding the
/// elementwise mean. Throws ProtocolError if lengths differ.
void ring_allreduce_average(std::span<const std::span<double>> buffers);

/// One rank's endpoint for collectives over a transport.
class Communicator {
 public:
  Communicator(std::shared_ptr<Transport> transport, LatencyModel latency,
               bool inject_latency = true);

  std::size_t rank() const { return transport_->rank(); }
  std::size_t world() const { return transport_->world(); }
  const LatencyModel& latency() const { return latency_; }

  /// Replaces `values` with the elementwise mean across all ranks; then, if
  /// latency injection is on, sleeps for the modelled delay. Blocks until the
  /// collective completes. Throws ProtocolError if another collective is in
  /// flight on this communicator or payload lengths disagree.
  void allreduce_average(std::span<double> values);

  template <class Tag>
  DenseVector<Tag> allreduce_average(DenseVector<Tag> v) {
    allreduce_average(v.values());
    return v;
  }

  /// No rank returns before every rank has entered.
  void barrier();

  std::uint64_t rounds() const { return round_; }

 private:
  class Guard;
  std::shared_ptr<Transport> transport_;
  LatencyModel latency_;
  bool inject_latency_;
  std::atomic<bool> busy_{false};
  std::uint64_t round_ = 0;
};

// ---------------------------------------------------------------------------
// Cluster collectives driven by a Clock

/// Collectives among the ranks of a simulated or threaded cluster. Calls
/// block only the calling actor and log its phases on the clock: time spent
/// waiting for peers as `wait`, the exchange itself as `sync`.
class Collective {
 public:
  virtual ~Collective() = default;
  virtual std::size_t world() const = 0;

  /// `round` labels the logged sync event and seeds latency jitter; all ranks
  /// must pass the same value.
  virtual void allreduce_average(sim::ActorId who, std::size_t rank, std::span<double> values,
                                 std::uint64_t round) = 0;

  virtual void barrier(sim::ActorId who, std::size_t rank, std::uint64_t step) = 0;

  /// Completed allreduce rounds.
  virtual std::uint64_t rounds() const = 0;

  /// Unblocks waiting ranks after a failure elsewhere.
  virtual void shutdown() = 0;
};

/// Virtual clock: ranks rendezvous in the scheduler, the last arrival runs
/// ring_allreduce_average over every buffer, and each rank then advances by
/// the latency model's delay. Real clock: one in-process Communicator per
/// rank; the barrier in front of the exchange is logged as wait.
std::unique_ptr<Collective> make_collective(sim::Clock& clock, std::size_t world,
                                            LatencyModel latency);

}  // namespace gradsync::comms
