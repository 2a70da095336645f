// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <optional>
#include <thread>

#include <fmt/format.h>

#include "comms/mailbox.hpp"

namespace gradsync::comms {
namespace {

[[noreturn]] void fail(const std::string& what) {
  throw TransportError(fmt::format("{}: {}", what, std::strerror(errno)));
}

// Owning file descriptor.
class Fd {
 public:
  Fd() = default;
  explicit Fd(int fd) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }

  int get() const { return fd_; }
  explicit operator bool() const { return fd_ >= 0; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int release() { return std::exchange(fd_, -1); }
  void shutdown() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  int fd_ = -1;
};

sockaddr_in resolve(const std::string& host, std::uint16_t port) {
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) == 1) return addr;
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (::getaddrinfo(host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw TransportError(fmt::format("cannot resolve host '{}'", host));
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  ::freeaddrinfo(res);
  return addr;
}

void write_all(int fd, const std::byte* data, std::size_t len) {
  while (len > 0) {
    const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("send");
    }
    data += n;
    len -= static_cast<std::size_t>(n);
  }
}

// False on orderly EOF before the first byte.
bool read_all(int fd, std::byte* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t n = ::recv(fd, data + got, len - got, 0);
    if (n == 0) {
      if (got == 0) return false;
      throw TransportError("peer closed the connection mid-frame");
    }
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("recv");
    }
    got += static_cast<std::size_t>(n);
  }
  return true;
}

void write_frame(int fd, const Frame& f) {
  const std::vector<std::byte> bytes = encode_frame(f);
  write_all(fd, bytes.data(), bytes.size());
}

std::optional<Frame> read_frame(int fd) {
  std::array<std::byte, kFrameHeaderBytes> header{};
  if (!read_all(fd, header.data(), header.size())) return std::nullopt;
  const FrameHeader h = decode_frame_header(header);
  std::vector<std::byte> bytes(kFrameHeaderBytes + h.payload_bytes);
  std::memcpy(bytes.data(), header.data(), header.size());
  if (h.payload_bytes > 0 && !read_all(fd, bytes.data() + kFrameHeaderBytes, h.payload_bytes)) {
    throw TransportError("peer closed the connection mid-frame");
  }
  return decode_frame(bytes);
}

Frame expect_frame(int fd, FrameType type, const char* what) {
  std::optional<Frame> f = read_frame(fd);
  if (!f) throw TransportError(fmt::format("{}: peer disconnected", what));
  if (f->type != type) throw ProtocolError(fmt::format("{}: unexpected frame type", what));
  return std::move(*f);
}

Fd connect_with_retry(const std::string& host, std::uint16_t port, Duration timeout) {
  const sockaddr_in addr = resolve(host, port);
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (true) {
    Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
    if (!fd) fail("socket");
    if (::connect(fd.get(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) {
      int one = 1;
      ::setsockopt(fd.get(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return fd;
    }
    if (std::chrono::steady_clock::now() >= deadline) {
      fail(fmt::format("connect to {}:{}", host, port));
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

Fd accept_one(int listen_fd) {
  while (true) {
    const int fd = ::accept(listen_fd, nullptr, nullptr);
    if (fd >= 0) {
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Fd(fd);
    }
    if (errno != EINTR) fail("accept");
  }
}

class SocketTransport final : public Transport {
 public:
  SocketTransport(std::size_t rank, std::size_t world)
      : control_(world), rank_(rank), world_(world), boxes_(world * 2) {}

  ~SocketTransport() override {
    close();
    for (std::thread& t : readers_) {
      if (t.joinable()) t.join();
    }
  }

  std::size_t rank() const override { return rank_; }
  std::size_t world() const override { return world_; }

  void send(std::size_t to, const Frame& frame) override {
    if (to >= world_) throw TransportError(fmt::format("send to unknown rank {}", to));
    if (frame.type == FrameType::kChunk) {
      if (to != (rank_ + 1) % world_) {
        throw ProtocolError(fmt::format("rank {} may only send chunks to its ring successor", rank_));
      }
      std::lock_guard lk(ring_write_mu_);
      write_frame(ring_out_.get(), frame);
      return;
    }
    const std::size_t link = rank_ == 0 ? to : 0;
    if (rank_ != 0 && to != 0) {
      throw ProtocolError("control frames only travel between rank 0 and its peers");
    }
    std::lock_guard lk(control_write_mu_);
    write_frame(control_[link].get(), frame);
  }

  Frame recv(std::size_t from, FrameType type) override {
    if (from >= world_) throw TransportError(fmt::format("recv from unknown rank {}", from));
    Frame f = boxes_[from * 2 + detail::channel_of(type)].pop(
        fmt::format("rank {} recv from {}", rank_, from));
    if (f.type != type) throw ProtocolError(fmt::format("rank {}: unexpected frame type", rank_));
    return f;
  }

  void close() override {
    ring_out_.shutdown();
    ring_in_.shutdown();
    for (const Fd& fd : control_) fd.shutdown();
    for (auto& b : boxes_) b.close();
  }

  // Handshake results are installed before start().
  Fd ring_out_, ring_in_;
  std::vector<Fd> control_;

  void start() {
    if (world_ == 1) return;
    readers_.emplace_back([this] { pump(ring_in_.get(), (rank_ + world_ - 1) % world_); });
    if (rank_ == 0) {
      for (std::size_t r = 1; r < world_; ++r) {
        readers_.emplace_back([this, r] { pump(control_[r].get(), r); });
      }
    } else {
      readers_.emplace_back([this] { pump(control_[0].get(), 0); });
    }
  }

 private:
  // Drains one inbound socket into the mailboxes so senders never block on
  // a peer that is itself busy sending.
  void pump(int fd, std::size_t expected_from) {
    try {
      while (true) {
        std::optional<Frame> f = read_frame(fd);
        if (!f) break;
        if (f->rank != expected_from) {
          throw ProtocolError(fmt::format("frame from rank {} arrived on the link of rank {}",
                                          f->rank, expected_from));
        }
        const std::size_t ch = detail::channel_of(f->type);
        boxes_[expected_from * 2 + ch].push(std::move(*f));
      }
    } catch (const std::exception&) {
    }
    boxes_[expected_from * 2 + 0].close();
    boxes_[expected_from * 2 + 1].close();
  }

  std::size_t rank_;
  std::size_t world_;
  std::vector<detail::Mailbox> boxes_;  // [from][channel]
  std::mutex ring_write_mu_, control_write_mu_;
  std::vector<std::thread> readers_;
};

}  // namespace

SocketListener SocketListener::bind(const std::string& host, std::uint16_t port) {
  Fd fd(::socket(AF_INET, SOCK_STREAM, 0));
  if (!fd) fail("socket");
  int one = 1;
  ::setsockopt(fd.get(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(host, port);
  if (::bind(fd.get(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    fail(fmt::format("bind {}:{}", host, port));
  }
  if (::listen(fd.get(), 64) != 0) fail("listen");
  socklen_t len = sizeof(addr);
  if (::getsockname(fd.get(), reinterpret_cast<sockaddr*>(&addr), &len) != 0) fail("getsockname");
  return SocketListener(fd.release(), host, ntohs(addr.sin_port));
}

SocketListener::SocketListener(SocketListener&& o) noexcept
    : fd_(std::exchange(o.fd_, -1)), host_(std::move(o.host_)), port_(o.port_) {}

SocketListener& SocketListener::operator=(SocketListener&& o) noexcept {
  if (this != &o) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = std::exchange(o.fd_, -1);
    host_ = std::move(o.host_);
    port_ = o.port_;
  }
  return *this;
}

SocketListener::~SocketListener() {
  if (fd_ >= 0) ::close(fd_);
}

int SocketListener::release() { return std::exchange(fd_, -1); }

std::shared_ptr<Transport> host_socket_transport(SocketListener listener, std::size_t world,
                                                 Duration timeout) {
  if (world == 0) throw ConfigError("socket transport: world must be >= 1");
  auto t = std::make_shared<SocketTransport>(0, world);
  Fd listen_fd(listener.release());
  if (world == 1) return t;

  // Rendezvous: one hello per peer carrying its ring listener port.
  std::vector<double> ports(world, 0.0);
  ports[0] = listener.port();
  for (std::size_t i = 1; i < world; ++i) {
    Fd conn = accept_one(listen_fd.get());
    const Frame hello = expect_frame(conn.get(), FrameType::kHello, "rendezvous");
    if (hello.rank == 0 || hello.rank >= world || t->control_[hello.rank]) {
      throw ProtocolError(fmt::format("rendezvous: bad or duplicate hello from rank {}", hello.rank));
    }
    if (hello.payload.size() != 1) throw ProtocolError("rendezvous: hello must carry one port");
    ports[hello.rank] = hello.payload[0];
    t->control_[hello.rank] = std::move(conn);
  }
  for (std::size_t r = 1; r < world; ++r) {
    write_frame(t->control_[r].get(), Frame{FrameType::kHello, 0, ports});
  }

  t->ring_out_ = connect_with_retry(listener.host(), static_cast<std::uint16_t>(ports[1]), timeout);
  write_frame(t->ring_out_.get(), Frame{FrameType::kHello, 0, {}});
  t->ring_in_ = accept_one(listen_fd.get());
  const Frame ring_hello = expect_frame(t->ring_in_.get(), FrameType::kHello, "ring handshake");
  if (ring_hello.rank != world - 1) throw ProtocolError("ring handshake: unexpected predecessor");
  t->start();
  return t;
}

std::shared_ptr<Transport> join_socket_transport(const std::string& host, std::uint16_t port,
                                                 std::size_t rank, std::size_t world,
                                                 Duration timeout) {
  if (rank == 0 || rank >= world) {
    throw ConfigError(fmt::format("join_socket_transport: rank {} invalid for world {}", rank, world));
  }
  auto t = std::make_shared<SocketTransport>(rank, world);
  SocketListener own = SocketListener::bind(host, 0);
  Fd own_fd(own.release());

  t->control_[0] = connect_with_retry(host, port, timeout);
  write_frame(t->control_[0].get(),
              Frame{FrameType::kHello, static_cast<std::uint32_t>(rank),
                    {static_cast<double>(own.port())}});
  const Frame table = expect_frame(t->control_[0].get(), FrameType::kHello, "rendezvous reply");
  if (table.payload.size() != world) throw ProtocolError("rendezvous reply: wrong port table size");

  const std::size_t next = (rank + 1) % world;
  t->ring_out_ = connect_with_retry(host, static_cast<std::uint16_t>(table.payload[next]), timeout);
  write_frame(t->ring_out_.get(), Frame{FrameType::kHello, static_cast<std::uint32_t>(rank), {}});
  t->ring_in_ = accept_one(own_fd.get());
  const Frame ring_hello = expect_frame(t->ring_in_.get(), FrameType::kHello, "ring handshake");
  if (ring_hello.rank != rank - 1) throw ProtocolError("ring handshake: unexpected predecessor");
  t->start();
  return t;
}

}  // namespace gradsync::comms
