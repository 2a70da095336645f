// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>

#include <fmt/format.h>

#include "gradsync/comms.hpp"
#include "gradsync/errors.hpp"
#include "gradsync/rng.hpp"

namespace gradsync::comms {
namespace {

template <class T>
void put_le(std::byte* out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out[i] = static_cast<std::byte>((value >> (8 * i)) & 0xFF);
  }
}

template <class T>
T get_le(const std::byte* in) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(std::to_integer<std::uint8_t>(in[i])) << (8 * i);
  }
  return value;
}

}  // namespace

void LatencyModel::validate() const {
  if (base < Duration::zero() || per_element < Duration::zero() || per_peer < Duration::zero() ||
      jitter_max < Duration::zero()) {
    throw ConfigError("latency model components must be >= 0");
  }
}

Duration LatencyModel::delay(std::size_t len, std::size_t world, std::uint64_t round) const {
  if (world <= 1) return Duration::zero();
  Duration d = base + per_element * static_cast<std::int64_t>(len) +
               per_peer * static_cast<std::int64_t>(world);
  if (jitter_max > Duration::zero()) {
    const std::uint64_t span = static_cast<std::uint64_t>(jitter_max.count()) + 1;
    d += Duration(static_cast<std::int64_t>(mix64(jitter_seed ^ mix64(round)) % span));
  }
  return d;
}

std::vector<std::byte> encode_frame(const Frame& frame) {
  const std::size_t payload_bytes = frame.payload.size() * sizeof(double);
  std::vector<std::byte> out(kFrameHeaderBytes + payload_bytes);
  put_le<std::uint32_t>(out.data(), static_cast<std::uint32_t>(frame.type));
  put_le<std::uint32_t>(out.data() + 4, frame.rank);
  put_le<std::uint64_t>(out.data() + 8, payload_bytes);
  std::byte* p = out.data() + kFrameHeaderBytes;
  for (double v : frame.payload) {
    put_le<std::uint64_t>(p, std::bit_cast<std::uint64_t>(v));
    p += sizeof(double);
  }
  return out;
}

FrameHeader decode_frame_header(std::span<const std::byte, kFrameHeaderBytes> bytes) {
  const auto tag = get_le<std::uint32_t>(bytes.data());
  if (tag < 1 || tag > 3) throw ProtocolError(fmt::format("unknown frame type tag {}", tag));
  FrameHeader h{static_cast<FrameType>(tag), get_le<std::uint32_t>(bytes.data() + 4),
                get_le<std::uint64_t>(bytes.data() + 8)};
  if (h.payload_bytes % sizeof(double) != 0) {
    throw ProtocolError(fmt::format("frame payload of {} bytes is not a whole number of reals",
                                    h.payload_bytes));
  }
  return h;
}

Frame decode_frame(std::span<const std::byte> bytes) {
  if (bytes.size() < kFrameHeaderBytes) throw ProtocolError("truncated frame header");
  const FrameHeader h = decode_frame_header(bytes.first<kFrameHeaderBytes>());
  if (bytes.size() != kFrameHeaderBytes + h.payload_bytes) {
    throw ProtocolError(fmt::format("frame declares {} payload bytes but carries {}",
                                    h.payload_bytes, bytes.size() - kFrameHeaderBytes));
  }
  Frame f{h.type, h.rank, std::vector<double>(h.payload_bytes / sizeof(double))};
  const std::byte* p = bytes.data() + kFrameHeaderBytes;
  for (double& v : f.payload) {
    v = std::bit_cast<double>(get_le<std::uint64_t>(p));
    p += sizeof(double);
  }
  return f;
}

}  // namespace gradsync::comms
