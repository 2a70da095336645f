// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <tuple>

#include <fmt/format.h>

#include "gradsync/errors.hpp"
#include "gradsync/harness.hpp"

namespace gradsync::harness {

namespace {

constexpr const char* kMetricsHeader =
    "strategy,n,seed,epoch,step,time,train_loss,test_accuracy,sync_count,compute_time,sync_time,"
    "wait_time,hidden_sync_time";

std::string seconds(Duration d) {
  const auto ns = d.count();
  if (ns < 0) return fmt::format("-{}", seconds(-d));
  return fmt::format("{}.{:09}", ns / 1'000'000'000, ns % 1'000'000'000);
}

struct FieldReader {
  const std::filesystem::path& path;
  std::size_t line_no;

  [[noreturn]] void fail(std::string_view field, std::string_view text) const {
    throw ParseError(fmt::format("{}:{}: bad {} '{}'", path.string(), line_no, field, text));
  }

  template <typename T>
  T number(std::string_view field, std::string_view text) const {
    T v{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) fail(field, text);
    return v;
  }

  // Exact inverse of seconds().
  Duration duration(std::string_view field, std::string_view text) const {
    const std::size_t dot = text.find('.');
    if (dot == std::string_view::npos || text.size() - dot - 1 != 9 || text.front() == '-') {
      fail(field, text);
    }
    const auto whole = number<std::int64_t>(field, text.substr(0, dot));
    const auto frac = number<std::int64_t>(field, text.substr(dot + 1));
    return Duration(whole * 1'000'000'000 + frac);
  }
};

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  while (true) {
    const std::size_t comma = line.find(',');
    out.push_back(line.substr(0, comma));
    if (comma == std::string_view::npos) return out;
    line.remove_prefix(comma + 1);
  }
}

std::string optional_real(const std::optional<double>& v) {
  return v ? fmt::format("{}", *v) : std::string("n/a");
}

}  // namespace

std::string metrics_file_name(Strategy s, std::size_t n, std::uint64_t seed) {
  return fmt::format("metrics_{}_n{}_s{}.csv", to_string(s), n, seed);
}

std::string events_file_name(Strategy s, std::size_t n, std::uint64_t seed) {
  return fmt::format("events_{}_n{}_s{}.csv", to_string(s), n, seed);
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const MetricsRecord> rows) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << kMetricsHeader << '\n';
  for (const MetricsRecord& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{}\n", r.strategy, r.n, r.seed, r.epoch,
                       r.step, seconds(r.time), r.train_loss, r.test_accuracy, r.sync_count,
                       seconds(r.compute_time), seconds(r.sync_time), seconds(r.wait_time),
                       seconds(r.hidden_sync_time));
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  if (!std::getline(in, line) || line != kMetricsHeader) {
    throw ParseError(fmt::format("{}: missing metrics header", path.string()));
  }
  std::vector<MetricsRecord> rows;
  FieldReader rd{path, 1};
  while (std::getline(in, line)) {
    ++rd.line_no;
    if (line.empty()) continue;
    const auto f = split_fields(line);
    if (f.size() != 13) {
      throw ParseError(fmt::format("{}:{}: expected 13 fields, got {}", path.string(), rd.line_no, f.size()));
    }
    MetricsRecord r;
    r.strategy = std::string(f[0]);
    r.n = rd.number<std::size_t>("n", f[1]);
    r.seed = rd.number<std::uint64_t>("seed", f[2]);
    r.epoch = rd.number<std::size_t>("epoch", f[3]);
    r.step = rd.number<std::size_t>("step", f[4]);
    r.time = rd.duration("time", f[5]);
    r.train_loss = rd.number<double>("train_loss", f[6]);
    r.test_accuracy = rd.number<double>("test_accuracy", f[7]);
    r.sync_count = rd.number<std::size_t>("sync_count", f[8]);
    r.compute_time = rd.duration("compute_time", f[9]);
    r.sync_time = rd.duration("sync_time", f[10]);
    r.wait_time = rd.duration("wait_time", f[11]);
    r.hidden_sync_time = rd.duration("hidden_sync_time", f[12]);
    rows.push_back(std::move(r));
  }
  return rows;
}

TimeToAccuracy time_to_accuracy(std::span<const MetricsRecord> run, double target) {
  for (const MetricsRecord& r : run) {
    if (r.test_accuracy >= target) {
      return {true, r.epoch, r.time, r.compute_time, r.sync_time, r.wait_time};
    }
  }
  return {};
}

std::optional<double> smoothness(std::span<const MetricsRecord> run) {
  if (run.size() < 3) return std::nullopt;
  std::vector<double> deltas;
  for (std::size_t i = 1; i < run.size(); ++i) {
    deltas.push_back(run[i].test_accuracy - run[i - 1].test_accuracy);
  }
  double mean = 0.0;
  for (double d : deltas) mean += d;
  mean /= static_cast<double>(deltas.size());
  double var = 0.0;
  for (double d : deltas) var += (d - mean) * (d - mean);
  return std::sqrt(var / static_cast<double>(deltas.size()));
}

double throughput(std::span<const MetricsRecord> run) {
  if (run.empty()) throw ConfigError("throughput of an empty run");
  const MetricsRecord& last = run.back();
  if (last.time <= Duration::zero()) throw ConfigError("throughput needs a positive elapsed time");
  return static_cast<double>(last.n * last.step) /
         std::chrono::duration<double>(last.time).count();
}

double scale_efficiency(std::span<const SummaryRow> summary, const std::string& strategy,
                        std::size_t n, std::uint64_t seed) {
  auto find = [&](std::size_t size) -> const SummaryRow& {
    for (const SummaryRow& r : summary) {
      if (r.strategy == strategy && r.n == size && r.seed == seed) return r;
    }
    throw ConfigError(fmt::format("no {} run with n={} seed={}", strategy, size, seed));
  };
  const SummaryRow& one = find(1);
  const SummaryRow& many = find(n);
  if (one.elapsed <= Duration::zero() || many.elapsed <= Duration::zero() || one.steps == 0) {
    throw ConfigError(fmt::format("{} seed={}: efficiency needs positive time and steps", strategy, seed));
  }
  // throughput(n) / (n * throughput(1)) with the factors of n cancelled.
  return (static_cast<double>(many.steps) * static_cast<double>(one.elapsed.count())) /
         (static_cast<double>(one.steps) * static_cast<double>(many.elapsed.count()));
}

std::vector<SummaryRow> summarize(const std::vector<std::vector<MetricsRecord>>& runs,
                                  std::span<const double> targets) {
  std::vector<SummaryRow> rows;
  for (const auto& run : runs) {
    if (run.empty()) continue;
    const MetricsRecord& last = run.back();
    SummaryRow r;
    r.strategy = last.strategy;
    r.n = last.n;
    r.seed = last.seed;
    r.steps = last.step;
    r.elapsed = last.time;
    r.throughput = last.time > Duration::zero() ? throughput(run) : 0.0;
    r.final_accuracy = last.test_accuracy;
    r.final_loss = last.train_loss;
    r.sync_count = last.sync_count;
    r.compute = last.compute_time;
    r.sync = last.sync_time;
    r.wait = last.wait_time;
    r.hidden_sync = last.hidden_sync_time;
    r.smoothness = smoothness(run);
    for (double t : targets) r.targets.push_back(time_to_accuracy(run, t));
    rows.push_back(std::move(r));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
    return std::tie(a.strategy, a.n, a.seed) < std::tie(b.strategy, b.n, b.seed);
  });
  for (SummaryRow& r : rows) {
    try {
      r.scale_efficiency = scale_efficiency(rows, r.strategy, r.n, r.seed);
    } catch (const ConfigError&) {
      r.scale_efficiency.reset();
    }
  }
  return rows;
}

void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows,
                       std::span<const double> targets) {
  std::ofstream out(path);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "strategy,n,seed,steps,elapsed,throughput,scale_efficiency,final_accuracy,final_train_loss,"
         "sync_count,compute_time,sync_time,wait_time,hidden_sync_time,smoothness";
  for (double t : targets) {
    out << fmt::format(",tta{0}_epoch,tta{0}_total,tta{0}_compute,tta{0}_sync,tta{0}_wait", t);
  }
  out << '\n';
  for (const SummaryRow& r : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.strategy, r.n, r.seed, r.steps,
                       seconds(r.elapsed), r.throughput, optional_real(r.scale_efficiency),
                       r.final_accuracy, r.final_loss, r.sync_count, seconds(r.compute),
                       seconds(r.sync), seconds(r.wait), seconds(r.hidden_sync),
                       optional_real(r.smoothness));
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const TimeToAccuracy& t = r.targets.at(i);
      if (t.reached) {
        out << fmt::format(",{},{},{},{},{}", t.epoch, seconds(t.total), seconds(t.compute),
                           seconds(t.sync), seconds(t.wait));
      } else {
        out << ",unreached,unreached,unreached,unreached,unreached";
      }
    }
    out << '\n';
  }
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

std::vector<SummaryRow> summarize_directory(const std::filesystem::path& dir,
                                            std::span<const double> targets) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw IoError(fmt::format("cannot list '{}': {}", dir.string(), ec.message()));
  std::vector<std::filesystem::path> files;
  for (const auto& entry : it) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.starts_with("metrics_") && name.ends_with(".csv")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<std::vector<MetricsRecord>> runs;
  for (const auto& f : files) runs.push_back(read_metrics_csv(f));
  return summarize(runs, targets);
}

}  // namespace gradsync::harness
