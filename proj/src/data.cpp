// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include "gradsync/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

namespace gradsync {
namespace {

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(p[i - 1], p[j]);
  }
  return p;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices, std::string name) {
  Batch b = gather(data, indices);
  Dataset out{std::move(b.inputs), std::move(b.labels), data.meta};
  out.meta.name = std::move(name);
  out.meta.size = out.labels.size();
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Dataset make_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread,
                   Rng& rng) {
  if (classes < 1 || per_class < 1 || dim < 1) throw ConfigError("make_blobs: counts must be >= 1");
  if (!(spread > 0.0)) throw ConfigError("make_blobs: spread must be > 0");

  Matrix centers(classes, dim);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t j = 0; j < dim; ++j) centers(c, j) = rng.uniform(-1.0, 1.0);
  }

  const std::size_t n = classes * per_class;
  Dataset d{Matrix(n, dim), std::vector<std::size_t>(n), {"blobs", n, dim, classes}};
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t k = 0; k < per_class; ++k, ++row) {
      for (std::size_t j = 0; j < dim; ++j) d.inputs(row, j) = centers(c, j) + spread * rng.normal();
      d.labels[row] = c;
    }
  }
  return d;
}

std::pair<Dataset, Dataset> train_test_split(const Dataset& data, std::size_t test_count,
                                             Rng& rng) {
  if (test_count >= data.size()) {
    throw ConfigError(fmt::format("train_test_split: test_count {} leaves no training data (N={})",
                                  test_count, data.size()));
  }
  const std::vector<std::size_t> p = permutation(data.size(), rng);
  const std::span<const std::size_t> all(p);
  const std::size_t train_count = data.size() - test_count;
  return {subset(data, all.first(train_count), data.meta.name + "-train"),
          subset(data, all.subspan(train_count), data.meta.name + "-test")};
}

Shard shard(const Dataset& data, std::size_t n, std::size_t worker_id, const Rng& rng) {
  const std::size_t total = data.size();
  if (n == 0 || n > total) {
    throw ConfigError(fmt::format("shard: cannot split {} samples across {} workers", total, n));
  }
  if (worker_id >= n) throw ConfigError(fmt::format("shard: worker {} >= n={}", worker_id, n));

  Rng local = rng;
  const std::vector<std::size_t> p = permutation(total, local);
  const std::size_t base = total / n;
  const std::size_t extra = total % n;
  const std::size_t begin = worker_id * base + std::min(worker_id, extra);
  const std::size_t len = base + (worker_id < extra ? 1 : 0);
  return Shard{worker_id, std::vector<std::size_t>(p.begin() + begin, p.begin() + begin + len)};
}

std::vector<Batch> batches(const Dataset& data, const Shard& shard, std::size_t batch_size,
                           std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ConfigError("batches: batch_size must be >= 1");
  if (shard.indices.empty()) throw ConfigError("batches: empty shard");

  Rng rng(epoch_seed);
  const std::vector<std::size_t> order = permutation(shard.size(), rng);
  std::vector<std::size_t> picked;
  std::vector<Batch> out;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    picked.clear();
    for (std::size_t i = start; i < end; ++i) picked.push_back(shard.indices[order[i]]);
    out.push_back(gather(data, picked));
  }
  return out;
}

Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  const std::size_t dim = data.inputs.cols();
  std::vector<double> values;
  values.reserve(indices.size() * dim);
  std::vector<std::size_t> labels;
  labels.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.size()) throw DimensionError(fmt::format("gather: index {} out of range", i));
    const auto row = data.inputs.row(i);
    values.insert(values.end(), row.begin(), row.end());
    labels.push_back(data.labels[i]);
  }
  return Batch{Matrix(indices.size(), dim, std::move(values)), std::move(labels)};
}

Batch as_batch(const Dataset& data) { return Batch{data.inputs, data.labels}; }

Dataset load_csv(const std::filesystem::path& path, std::size_t classes) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));

  std::vector<double> values;
  std::vector<std::size_t> labels;
  std::size_t dim = 0;
  std::size_t line_no = 0;
  std::string line;
  std::vector<std::string_view> fields;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;

    fields.clear();
    std::size_t pos = 0;
    while (true) {
      const std::size_t comma = text.find(',', pos);
      fields.push_back(trim(text.substr(pos, comma == std::string_view::npos ? comma : comma - pos)));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() < 2) {
      throw ParseError(fmt::format("{}:{}: expected features and a label", path.string(), line_no));
    }
    if (dim == 0) dim = fields.size() - 1;
    if (fields.size() - 1 != dim) {
      throw ParseError(fmt::format("{}:{}: expected {} features, found {}", path.string(), line_no,
                                   dim, fields.size() - 1));
    }
    for (std::size_t j = 0; j < dim; ++j) {
      const std::string_view f = fields[j];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(fmt::format("{}:{}: feature {} is not a real number: '{}'", path.string(),
                                     line_no, j + 1, f));
      }
      values.push_back(v);
    }
    const std::string_view lf = fields.back();
    std::size_t label = 0;
    const auto [ptr, ec] = std::from_chars(lf.data(), lf.data() + lf.size(), label);
    if (lf.empty() || ec != std::errc() || ptr != lf.data() + lf.size()) {
      throw ParseError(fmt::format("{}:{}: label is not a non-negative integer: '{}'",
                                   path.string(), line_no, lf));
    }
    if (label >= classes) {
      throw ParseError(fmt::format("{}:{}: label {} out of range for {} classes", path.string(),
                                   line_no, label, classes));
    }
    labels.push_back(label);
  }
  if (labels.empty()) throw ParseError(fmt::format("{}: no samples", path.string()));

  const std::size_t n = labels.size();
  return Dataset{Matrix(n, dim, std::move(values)), std::move(labels),
                 {path.stem().string(), n, dim, classes}};
}

void write_csv(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.inputs.row(i)) out << fmt::format("{},", v);
    out << data.labels[i] << '\n';
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

}  // namespace gradsync
