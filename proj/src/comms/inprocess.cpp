// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <fmt/format.h>

#include "comms/mailbox.hpp"

namespace gradsync::comms {

// boxes[to][from][channel]
struct InProcessHub::State {
  explicit State(std::size_t w) : world(w), boxes(w * w * 2) {}

  detail::Mailbox& box(std::size_t to, std::size_t from, std::size_t channel) {
    return boxes[(to * world + from) * 2 + channel];
  }

  std::size_t world;
  std::vector<detail::Mailbox> boxes;
};

namespace {

class InProcessTransport final : public Transport {
 public:
  InProcessTransport(std::shared_ptr<InProcessHub::State> state, std::size_t rank)
      : state_(std::move(state)), rank_(rank) {}

  std::size_t rank() const override { return rank_; }
  std::size_t world() const override { return state_->world; }

  void send(std::size_t to, const Frame& frame) override {
    if (to >= state_->world) throw TransportError(fmt::format("send to unknown rank {}", to));
    state_->box(to, rank_, detail::channel_of(frame.type)).push(frame);
  }

  Frame recv(std::size_t from, FrameType type) override {
    if (from >= state_->world) throw TransportError(fmt::format("recv from unknown rank {}", from));
    Frame f = state_->box(rank_, from, detail::channel_of(type))
                  .pop(fmt::format("rank {} recv from {}", rank_, from));
    if (f.type != type) {
      throw ProtocolError(fmt::format("rank {} expected frame type {} from {}, got {}", rank_,
                                      static_cast<int>(type), from, static_cast<int>(f.type)));
    }
    return f;
  }

  void close() override {
    for (auto& b : state_->boxes) b.close();
  }

 private:
  std::shared_ptr<InProcessHub::State> state_;
  std::size_t rank_;
};

}  // namespace

InProcessHub::InProcessHub(std::size_t world) : state_(std::make_shared<State>(world)) {
  if (world == 0) throw ConfigError("InProcessHub: world must be >= 1");
}

InProcessHub::~InProcessHub() = default;

std::size_t InProcessHub::world() const { return state_->world; }

std::shared_ptr<Transport> InProcessHub::transport(std::size_t rank) {
  if (rank >= state_->world) throw ConfigError(fmt::format("rank {} >= world {}", rank, state_->world));
  return std::make_shared<InProcessTransport>(state_, rank);
}

void InProcessHub::close() {
  for (auto& b : state_->boxes) b.close();
}

}  // namespace gradsync::comms
