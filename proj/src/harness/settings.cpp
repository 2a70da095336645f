// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "gradsync/errors.hpp"
#include "gradsync/harness.hpp"

namespace gradsync::harness {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

const SettingInfo* find_setting(std::string_view key) {
  for (const SettingInfo& s : known_settings()) {
    if (s.key == key) return &s;
  }
  return nullptr;
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> out;
  std::string_view rest = value;
  while (true) {
    const std::size_t comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    if (item.empty()) throw ConfigError(fmt::format("{}: empty list item in '{}'", key, value));
    out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: '{}' is not a valid number", key, text));
  }
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) throw ConfigError(fmt::format("{}: '{}' is not finite", key, text));
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(fmt::format("{}: expected true or false, got '{}'", key, v));
}

Duration parse_ms(const std::string& key, const std::string& v) {
  const double ms = parse_number<double>(key, v);
  if (ms < 0) throw ConfigError(fmt::format("{}: must be >= 0", key));
  return Duration(static_cast<Duration::rep>(std::llround(ms * 1e6)));
}

}  // namespace

const std::vector<SettingInfo>& known_settings() {
  static const std::vector<SettingInfo> table = {
      {"strategy", "hpsgd", "comma list of ssgd, psgd, local, hpsgd"},
      {"workers", "4", "comma list of cluster sizes"},
      {"seed", "1", "comma list of run seeds"},
      {"clock", "virtual", "virtual or real"},
      {"t-train", "1", "cost of one local step, ms"},
      {"t-sync-base", "2", "fixed AllReduce latency, ms"},
      {"t-sync-per-peer", "0", "AllReduce latency per worker, ms"},
      {"t-sync-per-element", "0", "AllReduce latency per parameter, ms"},
      {"t-sync-jitter", "0", "maximum added AllReduce jitter, ms"},
      {"speed-multipliers", "", "comma list of per-worker t-train factors"},
      {"gamma", "8", "Local SGD averaging period"},
      {"lr", "0.01", "learning rate"},
      {"batch", "128", "mini-batch size"},
      {"steps", "0", "local steps per worker; 0 derives them from epochs"},
      {"epochs", "100", "passes over worker 0's shard when steps is 0"},
      {"model", "mlp", "logreg or mlp"},
      {"hidden", "32", "mlp hidden width"},
      {"data", "blobs", "blobs or csv"},
      {"data-file", "", "training csv (features...,label)"},
      {"test-file", "", "test csv; empty splits test-count rows off data-file"},
      {"classes", "2", "number of classes"},
      {"per-class", "2560", "blob samples per class"},
      {"dim", "20", "blob input dimension"},
      {"spread", "0.8", "blob standard deviation"},
      {"test-count", "1024", "held-out samples"},
      {"data-seed", "", "fixed data seed; empty uses the run seed"},
      {"targets", "0.8,0.9", "comma list of target accuracies"},
      {"lockstep", "false", "barrier among trainers before every step"},
      {"parallel", "false", "run grid cells concurrently"},
      {"out", "results", "output directory"},
  };
  return table;
}

Settings parse_settings(std::string_view text, const std::string& origin) {
  Settings out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const std::size_t nl = text.find('\n');
    const std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(fmt::format("{}:{}: expected key = value", origin, line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    if (!find_setting(key)) throw ParseError(fmt::format("{}:{}: unknown key '{}'", origin, line_no, key));
    if (!out.emplace(key, std::string(trim(line.substr(eq + 1)))).second) {
      throw ParseError(fmt::format("{}:{}: duplicate key '{}'", origin, line_no, key));
    }
  }
  return out;
}

Settings load_settings(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_settings(ss.str(), path.string());
}

void ExperimentPlan::validate() const {
  if (strategies.empty()) throw ConfigError("no strategies");
  if (cluster_sizes.empty()) throw ConfigError("no cluster sizes");
  if (seeds.empty()) throw ConfigError("no seeds");
  for (std::size_t n : cluster_sizes) {
    if (n < 1) throw ConfigError("cluster sizes must be >= 1");
    if (!speed_multipliers.empty() && speed_multipliers.size() < n) {
      throw ConfigError(fmt::format("{} speed multipliers cannot cover {} workers",
                                    speed_multipliers.size(), n));
    }
  }
  for (double t : target_accuracies) {
    if (!(t > 0.0 && t < 1.0)) throw ConfigError(fmt::format("target accuracy {} is outside (0, 1)", t));
  }
  if (base.steps == 0 && epochs == 0) throw ConfigError("steps and epochs are both 0");
  if (data.source == "csv" && data.train_file.empty()) throw ConfigError("data = csv needs data-file");
  if (data.source != "csv" && data.source != "blobs") {
    throw ConfigError(fmt::format("data: unknown source '{}'", data.source));
  }
}

ExperimentPlan make_plan(const Settings& overrides) {
  Settings s;
  for (const SettingInfo& info : known_settings()) s[info.key] = info.default_value;
  for (const auto& [k, v] : overrides) {
    if (!find_setting(k)) throw ConfigError(fmt::format("unknown key '{}'", k));
    s[k] = v;
  }
  auto size = [&](const std::string& k) { return parse_number<std::size_t>(k, s.at(k)); };

  ExperimentPlan p;
  for (const std::string& x : split_list("strategy", s.at("strategy"))) p.strategies.push_back(parse_strategy(x));
  for (const std::string& x : split_list("workers", s.at("workers"))) {
    p.cluster_sizes.push_back(parse_number<std::size_t>("workers", x));
  }
  for (const std::string& x : split_list("seed", s.at("seed"))) {
    p.seeds.push_back(parse_number<std::uint64_t>("seed", x));
  }
  if (!s.at("targets").empty()) {
    for (const std::string& x : split_list("targets", s.at("targets"))) {
      p.target_accuracies.push_back(parse_number<double>("targets", x));
    }
  }
  if (!s.at("speed-multipliers").empty()) {
    for (const std::string& x : split_list("speed-multipliers", s.at("speed-multipliers"))) {
      p.speed_multipliers.push_back(parse_number<double>("speed-multipliers", x));
    }
  }
  p.output_dir = s.at("out");
  p.parallel_runs = parse_bool("parallel", s.at("parallel"));
  p.epochs = size("epochs");

  TrainConfig& c = p.base;
  c.clock = sim::parse_clock_mode(s.at("clock"));
  c.timing.t_train = parse_ms("t-train", s.at("t-train"));
  c.timing.latency.base = parse_ms("t-sync-base", s.at("t-sync-base"));
  c.timing.latency.per_peer = parse_ms("t-sync-per-peer", s.at("t-sync-per-peer"));
  c.timing.latency.per_element = parse_ms("t-sync-per-element", s.at("t-sync-per-element"));
  c.timing.latency.jitter_max = parse_ms("t-sync-jitter", s.at("t-sync-jitter"));
  c.gamma = size("gamma");
  c.mu = parse_number<double>("lr", s.at("lr"));
  c.batch_size = size("batch");
  c.steps = size("steps");
  c.lockstep = parse_bool("lockstep", s.at("lockstep"));
  c.model.kind = parse_model_kind(s.at("model"));
  c.model.hidden_dim = c.model.kind == ModelKind::kMlp ? size("hidden") : 0;

  DataSpec& d = p.data;
  d.source = s.at("data");
  d.train_file = s.at("data-file");
  d.test_file = s.at("test-file");
  d.classes = size("classes");
  d.per_class = size("per-class");
  d.dim = size("dim");
  d.spread = parse_number<double>("spread", s.at("spread"));
  d.test_count = size("test-count");
  if (!s.at("data-seed").empty()) d.seed = parse_number<std::uint64_t>("data-seed", s.at("data-seed"));

  p.validate();
  return p;
}

}  // namespace gradsync::harness
