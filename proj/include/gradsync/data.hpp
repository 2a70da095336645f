// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "gradsync/model.hpp"
#include "gradsync/rng.hpp"
#include "gradsync/tensor.hpp"

namespace gradsync {

struct DatasetMeta {
  std::string name;
  std::size_t size = 0;
  std::size_t input_dim = 0;
  std::size_t classes = 0;

  bool operator==(const DatasetMeta&) const = default;
};

/// Labelled samples held in memory; immutable once built.
struct Dataset {
  Matrix inputs;
  std::vector<std::size_t> labels;
  DatasetMeta meta;

  std::size_t size() const { return labels.size(); }

  bool operator==(const Dataset&) const = default;
};

/// The slice of a dataset assigned to one worker.
struct Shard {
  std::size_t worker_id = 0;
  std::vector<std::size_t> indices;

  std::size_t size() const { return indices.size(); }
};

/// Gaussian class blobs. Class c's center has coordinates drawn uniformly
/// from [-1, 1]; samples are center + spread * N(0, I). Samples are stored
/// class by class. Throws ConfigError unless every count is >= 1 and spread > 0.
Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                   Rng& rng);

/// Seeded split into (train, test) with exactly `test_count` test samples.
std::pair<Dataset, Dataset> train_test_split(const Dataset& data, std::size_t test_count, Rng& rng);

/// One worker's shard. A global permutation drawn from `rng` (copied, so all
/// workers given the same generator agree) is cut into n contiguous ranges;
/// the first N mod n ranges get one extra sample.
Shard shard(const Dataset& data, std::size_t n, std::size_t worker_id, const Rng& rng);

/// Mini-batches over a shard for one epoch. The shard order is reshuffled
/// from `epoch_seed`; a final partial batch is kept.
std::vector<Batch> batches(const Dataset& data, const Shard& shard, std::size_t batch_size,
                           std::uint64_t epoch_seed);

/// Rows `indices` of `data` as a batch.
Batch gather(const Dataset& data, std::span<const std::size_t> indices);

/// The whole dataset as a single batch.
Batch as_batch(const Dataset& data);

/// Reads `features...,label` rows (no header). Throws IoError, or ParseError
/// naming the 1-based line number.
Dataset load_csv(const std::filesystem::path& path, std::size_t classes);

/// Writes in the format load_csv reads; reals use shortest round-trip form.
void write_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace gradsync
