// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>

#include "gradsync/data.hpp"
#include "gradsync/errors.hpp"

namespace gradsync {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("gradsync_data_" + std::to_string(::getpid()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path file(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

Dataset tiny(std::size_t n) {
  Rng rng(n);
  return make_blobs(2, (n + 1) / 2, 1, 1.0, rng);
}

TEST(Blobs, ShapeAndLabels) {
  Rng rng(1);
  const Dataset d = make_blobs(2, 10, 2, 0.5, rng);
  EXPECT_EQ(d.size(), 20u);
  EXPECT_EQ(d.inputs.rows(), 20u);
  EXPECT_EQ(d.inputs.cols(), 2u);
  EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 0u), 10);
  EXPECT_EQ(std::count(d.labels.begin(), d.labels.end(), 1u), 10);
  EXPECT_EQ(d.meta.classes, 2u);
}

TEST(Blobs, RejectsDegenerateInputs) {
  Rng rng(1);
  EXPECT_THROW(make_blobs(2, 10, 2, 0.0, rng), ConfigError);
  EXPECT_THROW(make_blobs(0, 10, 2, 1.0, rng), ConfigError);
  EXPECT_THROW(make_blobs(2, 0, 2, 1.0, rng), ConfigError);
  EXPECT_THROW(make_blobs(2, 10, 0, 1.0, rng), ConfigError);
}

TEST(Blobs, Deterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(make_blobs(3, 7, 4, 0.3, a), make_blobs(3, 7, 4, 0.3, b));
}

TEST(Split, SizesAndDisjointness) {
  Rng rng(2);
  const Dataset d = make_blobs(2, 50, 3, 1.0, rng);
  const auto [train, test] = train_test_split(d, 30, rng);
  EXPECT_EQ(train.size(), 70u);
  EXPECT_EQ(test.size(), 30u);
  EXPECT_THROW(train_test_split(d, 100, rng), ConfigError);
}

TEST(Shard, EvenSplit) {
  const Dataset d = tiny(8);
  const Rng rng(3);
  for (std::size_t w = 0; w < 4; ++w) EXPECT_EQ(shard(d, 4, w, rng).size(), 2u);
}

TEST(Shard, RemainderGoesToLowestRanks) {
  const Dataset d = tiny(10);
  const Rng rng(3);
  std::vector<std::size_t> sizes;
  for (std::size_t w = 0; w < 4; ++w) sizes.push_back(shard(d, 4, w, rng).size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{3, 3, 2, 2}));
}

TEST(Shard, PartitionExhaustive) {
  for (std::size_t total = 2; total <= 64; total += 2) {
    const Dataset d = tiny(total);
    for (std::size_t n = 1; n <= total; ++n) {
      const Rng rng(total * 100 + n);
      std::vector<std::size_t> seen;
      std::size_t smallest = total, largest = 0;
      for (std::size_t w = 0; w < n; ++w) {
        const Shard s = shard(d, n, w, rng);
        EXPECT_EQ(s.worker_id, w);
        seen.insert(seen.end(), s.indices.begin(), s.indices.end());
        smallest = std::min(smallest, s.size());
        largest = std::max(largest, s.size());
      }
      std::sort(seen.begin(), seen.end());
      std::vector<std::size_t> all(total);
      std::iota(all.begin(), all.end(), std::size_t{0});
      ASSERT_EQ(seen, all) << "N=" << total << " n=" << n;
      EXPECT_LE(largest - smallest, 1u);
    }
  }
}

TEST(Shard, Errors) {
  const Dataset d = tiny(4);
  const Rng rng(1);
  EXPECT_THROW(shard(d, 5, 0, rng), ConfigError);
  EXPECT_THROW(shard(d, 2, 2, rng), ConfigError);
  EXPECT_THROW(shard(d, 0, 0, rng), ConfigError);
}

TEST(Batches, SizesKeepPartialBatch) {
  const Dataset d = tiny(10);
  const Shard all = shard(d, 1, 0, Rng(1));
  std::vector<std::size_t> sizes;
  for (const Batch& b : batches(d, all, 4, 9)) sizes.push_back(b.size());
  EXPECT_EQ(sizes, (std::vector<std::size_t>{4, 4, 2}));
}

TEST(Batches, DeterministicPerSeedAndPermutationOfShard) {
  Rng rng(4);
  const Dataset d = make_blobs(2, 20, 2, 1.0, rng);
  const Shard s = shard(d, 2, 1, Rng(2));
  const auto a = batches(d, s, 3, 17);
  const auto b = batches(d, s, 3, 17);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].inputs, b[i].inputs);
    EXPECT_EQ(a[i].labels, b[i].labels);
  }
  std::multiset<std::vector<double>> from_batches, from_shard;
  for (const Batch& batch : a) {
    for (std::size_t r = 0; r < batch.size(); ++r) {
      std::vector<double> row(batch.inputs.row(r).begin(), batch.inputs.row(r).end());
      row.push_back(static_cast<double>(batch.labels[r]));
      from_batches.insert(row);
    }
  }
  for (std::size_t idx : s.indices) {
    std::vector<double> row(d.inputs.row(idx).begin(), d.inputs.row(idx).end());
    row.push_back(static_cast<double>(d.labels[idx]));
    from_shard.insert(row);
  }
  EXPECT_EQ(from_batches, from_shard);
  EXPECT_NE(batches(d, s, 3, 18)[0].inputs, a[0].inputs);
}

TEST(Batches, Errors) {
  const Dataset d = tiny(4);
  EXPECT_THROW(batches(d, Shard{0, {}}, 2, 1), ConfigError);
  EXPECT_THROW(batches(d, shard(d, 1, 0, Rng(1)), 0, 1), ConfigError);
}

TEST(Csv, LoadsWellFormedFile) {
  TempDir dir;
  write_text(dir.file("ok.csv"), "0.5,1.5,0\n-2,3e-2,1\n  7 , 8 ,1\n");
  const Dataset d = load_csv(dir.file("ok.csv"), 2);
  EXPECT_EQ(d.size(), 3u);
  EXPECT_EQ(d.meta.input_dim, 2u);
  EXPECT_EQ(d.inputs(1, 1), 0.03);
  EXPECT_EQ(d.labels, (std::vector<std::size_t>{0, 1, 1}));
}

TEST(Csv, ParseErrorsNameTheLine) {
  TempDir dir;
  auto expect_error = [&](const std::string& text, const std::string& needle) {
    write_text(dir.file("bad.csv"), text);
    try {
      load_csv(dir.file("bad.csv"), 2);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error("1,2,0\n1,abc,1\n", ":2");
  expect_error("1,2,0\n1,2,3\n", ":2");
  expect_error("1,2,0\n1,0\n", ":2");
  expect_error("1,2,0.5\n", ":1");
  expect_error("", "no samples");
  EXPECT_THROW(load_csv(dir.file("missing.csv"), 2), IoError);
}

TEST(Csv, RoundTripIsExact) {
  TempDir dir;
  Rng rng(6);
  const Dataset d = make_blobs(3, 20, 5, 0.7, rng);
  write_csv(dir.file("rt.csv"), d);
  const Dataset back = load_csv(dir.file("rt.csv"), 3);
  EXPECT_EQ(back.inputs, d.inputs);
  EXPECT_EQ(back.labels, d.labels);
}

}  // namespace
}  // namespace gradsync
