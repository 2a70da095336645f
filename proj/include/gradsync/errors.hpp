// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace gradsync {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes or lengths do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A computation produced NaN/Inf; during training this signals divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Participants of a collective disagree (payload length, round, frame type),
/// or a communicator was used for two collectives at once.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A peer went away or a socket operation failed.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// An event log violates its per-role ordering contract.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

}  // namespace gradsync
