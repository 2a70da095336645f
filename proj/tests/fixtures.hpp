// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>

#include "gradsync/data.hpp"
#include "gradsync/strategies.hpp"

namespace gradsync::testing {

using namespace std::chrono_literals;

/// Small separable task shared by strategy tests.
inline TrainData small_blobs(std::uint64_t seed, std::size_t per_class = 32, std::size_t dim = 4,
                             std::size_t test = 16) {
  Rng rng(seed);
  Dataset all = make_blobs(2, per_class, dim, 0.5, rng);
  auto [train, held_out] = train_test_split(all, test, rng);
  return TrainData{std::move(train), std::move(held_out)};
}

/// Virtual-clock config with t_train = 1 ms and a flat collective cost.
inline TrainConfig unit_config(std::size_t n, std::size_t steps, std::size_t dim = 4) {
  TrainConfig cfg;
  cfg.n = n;
  cfg.steps = steps;
  cfg.mu = 0.05;
  cfg.batch_size = 4;
  cfg.seed = 11;
  cfg.model = ModelSpec::logreg(dim, 2);
  cfg.timing.t_train = 1ms;
  cfg.timing.latency.base = 2ms;
  return cfg;
}

}  // namespace gradsync::testing
