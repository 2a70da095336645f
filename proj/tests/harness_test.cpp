// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "gradsync/errors.hpp"
#include "gradsync/harness.hpp"

namespace gradsync::harness {
namespace {

namespace fs = std::filesystem;
using namespace std::chrono_literals;

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            fmt::format("gradsync_harness_{}_{}", ::getpid(),
                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  // A task small enough for a few milliseconds per cell.
  Settings tiny(const std::string& out) const {
    return {{"model", "logreg"}, {"per-class", "16"}, {"dim", "4"},   {"test-count", "8"},
            {"batch", "4"},      {"epochs", "3"},     {"lr", "0.05"}, {"out", (root_ / out).string()}};
  }

  static std::vector<std::string> listing(const fs::path& dir) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(dir)) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    return names;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path root_;
};

MetricsRecord rec(std::size_t epoch, double acc, Duration t = 0ns) {
  MetricsRecord r;
  r.strategy = "ssgd";
  r.n = 2;
  r.epoch = epoch;
  r.step = epoch * 4;
  r.time = t;
  r.compute_time = t / 2;
  r.sync_time = t / 4;
  r.wait_time = t / 8;
  r.test_accuracy = acc;
  return r;
}

TEST_F(HarnessTest, SingleCellWritesThreeFiles) {
  Settings s = tiny("one");
  s["strategy"] = "ssgd";
  s["workers"] = "1";
  const PlanOutcome out = run_plan(make_plan(s));
  EXPECT_EQ(out.failures(), 0u);
  EXPECT_EQ(listing(root_ / "one"),
            (std::vector<std::string>{"events_ssgd_n1_s1.csv", "metrics_ssgd_n1_s1.csv", "summary.csv"}));
}

TEST_F(HarnessTest, GridWritesOneMetricsFilePerCell) {
  Settings s = tiny("grid");
  s["strategy"] = "ssgd,hpsgd";
  s["workers"] = "1,2";
  s["seed"] = "3,4";
  const PlanOutcome out = run_plan(make_plan(s));
  EXPECT_EQ(out.cells.size(), 8u);
  std::size_t metrics = 0, events = 0;
  for (const std::string& name : listing(root_ / "grid")) {
    metrics += name.starts_with("metrics_");
    events += name.starts_with("events_");
  }
  EXPECT_EQ(metrics, 8u);
  EXPECT_EQ(events, 8u);
  EXPECT_FALSE(fs::exists(root_ / "grid" / "errors.log"));
}

TEST_F(HarnessTest, RerunIsByteIdentical) {
  Settings a = tiny("a");
  a["strategy"] = "local,hpsgd";
  a["workers"] = "2";
  Settings b = a;
  b["out"] = (root_ / "b").string();
  b["parallel"] = "true";
  run_plan(make_plan(a));
  run_plan(make_plan(b));
  const auto names = listing(root_ / "a");
  ASSERT_EQ(names, listing(root_ / "b"));
  for (const std::string& n : names) EXPECT_EQ(slurp(root_ / "a" / n), slurp(root_ / "b" / n)) << n;
}

TEST_F(HarnessTest, SummaryRecomputesFromMetricsFiles) {
  Settings s = tiny("sum");
  s["strategy"] = "psgd,ssgd";
  s["workers"] = "1,2,4";
  s["targets"] = "0.5,0.75,0.999";
  const ExperimentPlan plan = make_plan(s);
  run_plan(plan);
  const auto rows = summarize_directory(plan.output_dir, plan.target_accuracies);
  write_summary_csv(root_ / "again.csv", rows, plan.target_accuracies);
  EXPECT_EQ(slurp(root_ / "again.csv"), slurp(plan.output_dir / kSummaryFile));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].strategy, "psgd");
  EXPECT_EQ(rows[0].n, 1u);
  EXPECT_EQ(rows[5].strategy, "ssgd");
  EXPECT_EQ(rows[5].n, 4u);
}

TEST_F(HarnessTest, MetricsCsvRoundTripIsExact) {
  Settings s = tiny("rt");
  s["workers"] = "2";
  const ExperimentPlan plan = make_plan(s);
  const PlanOutcome out = run_plan(plan);
  ASSERT_EQ(out.failures(), 0u);
  EXPECT_EQ(read_metrics_csv(plan.output_dir / metrics_file_name(Strategy::kHpsgd, 2, 1)),
            out.cells[0].metrics);
}

TEST_F(HarnessTest, ScaleEfficiencyExamples) {
  Settings s = tiny("eff");
  s["strategy"] = "psgd,ssgd";
  s["workers"] = "1,2,4";
  s["t-train"] = "1";
  s["t-sync-base"] = "2";
  const ExperimentPlan plan = make_plan(s);
  run_plan(plan);
  const auto rows = summarize_directory(plan.output_dir, {});
  for (const std::string strategy : {"psgd", "ssgd"}) {
    EXPECT_EQ(scale_efficiency(rows, strategy, 1, 1), 1.0);
  }
  for (std::size_t n : {2u, 4u}) {
    EXPECT_EQ(scale_efficiency(rows, "psgd", n, 1), 1.0) << n;
    EXPECT_DOUBLE_EQ(scale_efficiency(rows, "ssgd", n, 1), 1.0 / 3.0) << n;
  }
  for (const SummaryRow& r : rows) {
    ASSERT_TRUE(r.scale_efficiency.has_value());
    EXPECT_GT(*r.scale_efficiency, 0.0);
    EXPECT_LE(*r.scale_efficiency, 1.0);
  }
  EXPECT_THROW(scale_efficiency(rows, "local", 2, 1), ConfigError);
  EXPECT_THROW(scale_efficiency(rows, "ssgd", 8, 1), ConfigError);
}

TEST_F(HarnessTest, MissingBaselineIsReportedAsNotAvailable) {
  Settings s = tiny("nobase");
  s["workers"] = "2";
  const ExperimentPlan plan = make_plan(s);
  run_plan(plan);
  const std::string summary = slurp(plan.output_dir / kSummaryFile);
  EXPECT_NE(summary.find(",n/a,"), std::string::npos) << summary;
}

TEST_F(HarnessTest, FailingCellIsLoggedAndOthersContinue) {
  Settings s = tiny("fail");
  s["strategy"] = "ssgd";
  s["workers"] = "2,1000";
  const PlanOutcome out = run_plan(make_plan(s));
  ASSERT_EQ(out.cells.size(), 2u);
  EXPECT_TRUE(out.cells[0].ok);
  EXPECT_FALSE(out.cells[1].ok);
  EXPECT_EQ(out.failures(), 1u);
  EXPECT_TRUE(fs::exists(root_ / "fail" / metrics_file_name(Strategy::kSsgd, 2, 1)));
  EXPECT_FALSE(fs::exists(root_ / "fail" / metrics_file_name(Strategy::kSsgd, 1000, 1)));
  EXPECT_NE(slurp(root_ / "fail" / "errors.log").find("ssgd n=1000 seed=1"), std::string::npos);
}

TEST_F(HarnessTest, UnreachedTargetUsesSentinel) {
  Settings s = tiny("unreached");
  s["lr"] = "0";
  s["targets"] = "0.999";
  const ExperimentPlan plan = make_plan(s);
  run_plan(plan);
  EXPECT_NE(slurp(plan.output_dir / kSummaryFile).find("unreached"), std::string::npos);
}

TEST(TimeToAccuracy, ZeroTargetIsEpochZero) {
  const std::vector<MetricsRecord> run{rec(0, 0.5, 0ns), rec(1, 0.6, 10ns), rec(2, 0.9, 20ns)};
  const TimeToAccuracy t = time_to_accuracy(run, 0.0);
  EXPECT_TRUE(t.reached);
  EXPECT_EQ(t.epoch, 0u);
  EXPECT_EQ(t.total, 0ns);
}

TEST(TimeToAccuracy, PicksFirstRecordAndIsMonotone) {
  const std::vector<MetricsRecord> run{rec(0, 0.3, 0ns), rec(1, 0.45, 80ns), rec(2, 0.4, 160ns),
                                       rec(3, 0.85, 240ns)};
  const TimeToAccuracy low = time_to_accuracy(run, 0.4);
  const TimeToAccuracy high = time_to_accuracy(run, 0.8);
  EXPECT_EQ(low.epoch, 1u);
  EXPECT_EQ(low.total, 80ns);
  EXPECT_EQ(low.compute, 40ns);
  EXPECT_EQ(low.sync, 20ns);
  EXPECT_EQ(low.wait, 10ns);
  EXPECT_EQ(high.epoch, 3u);
  EXPECT_LE(low.total, high.total);
  EXPECT_FALSE(time_to_accuracy(run, 0.9).reached);
}

TEST(Smoothness, Examples) {
  EXPECT_EQ(smoothness(std::vector<MetricsRecord>{rec(0, 0.7), rec(1, 0.7), rec(2, 0.7)}), 0.0);
  EXPECT_EQ(smoothness(std::vector<MetricsRecord>{rec(0, 0.25), rec(1, 0.5), rec(2, 0.75), rec(3, 1.0)}),
            0.0);
  // Deltas 0.5 and 0: mean 0.25, population std 0.25.
  EXPECT_EQ(smoothness(std::vector<MetricsRecord>{rec(0, 0.0), rec(1, 0.5), rec(2, 0.5)}), 0.25);
  EXPECT_FALSE(smoothness(std::vector<MetricsRecord>{rec(0, 0.1), rec(1, 0.2)}).has_value());
}

TEST(Throughput, StepsOfTheWholeClusterPerSecond) {
  const std::vector<MetricsRecord> run{rec(0, 0.5, 0ns), rec(5, 0.5, 2s)};
  EXPECT_DOUBLE_EQ(throughput(run), 2.0 * 20 / 2.0);
  EXPECT_THROW(throughput(std::vector<MetricsRecord>{rec(0, 0.5, 0ns)}), ConfigError);
}

TEST(Settings, ParsesCommentsAndWhitespace) {
  const Settings s = parse_settings("# grid\n\n  workers = 1, 2 \nstrategy=ssgd\r\n  # x = y\n", "cfg");
  EXPECT_EQ(s, (Settings{{"workers", "1, 2"}, {"strategy", "ssgd"}}));
  const ExperimentPlan p = make_plan(s);
  EXPECT_EQ(p.cluster_sizes, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(p.strategies, (std::vector<Strategy>{Strategy::kSsgd}));
}

TEST(Settings, ErrorsNameTheLine) {
  auto expect_error = [](const std::string& text, const std::string& needle) {
    try {
      parse_settings(text, "cfg");
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos) << e.what();
    }
  };
  expect_error("workers = 2\nbogus = 1\n", "cfg:2: unknown key 'bogus'");
  expect_error("workers 2\n", "cfg:1");
  expect_error("seed=1\nseed=2\n", "cfg:2: duplicate");
  EXPECT_THROW(load_settings("/nonexistent/gradsync.cfg"), IoError);
}

TEST(Settings, EveryKeyHasAWorkingDefault) {
  const ExperimentPlan p = make_plan({});
  EXPECT_EQ(p.strategies, (std::vector<Strategy>{Strategy::kHpsgd}));
  EXPECT_EQ(p.base.clock, sim::ClockMode::kVirtual);
  EXPECT_EQ(p.base.timing.t_train, 1ms);
  EXPECT_EQ(p.base.timing.latency.base, 2ms);
  EXPECT_EQ(p.base.model.kind, ModelKind::kMlp);
  EXPECT_EQ(p.base.model.hidden_dim, 32u);
  EXPECT_EQ(p.data.per_class, 2560u);
  EXPECT_FALSE(p.data.seed.has_value());
  std::set<std::string> keys;
  for (const SettingInfo& s : known_settings()) EXPECT_TRUE(keys.insert(s.key).second) << s.key;
}

TEST(Settings, RejectsBadValues) {
  EXPECT_THROW(make_plan({{"targets", "0.5,1.0"}}), ConfigError);
  EXPECT_THROW(make_plan({{"targets", "0"}}), ConfigError);
  EXPECT_THROW(make_plan({{"workers", "0"}}), ConfigError);
  EXPECT_THROW(make_plan({{"workers", "2,"}}), ConfigError);
  EXPECT_THROW(make_plan({{"strategy", "asgd"}}), ConfigError);
  EXPECT_THROW(make_plan({{"lr", "fast"}}), ConfigError);
  EXPECT_THROW(make_plan({{"t-train", "-1"}}), ConfigError);
  EXPECT_THROW(make_plan({{"lockstep", "maybe"}}), ConfigError);
  EXPECT_THROW(make_plan({{"data", "csv"}}), ConfigError);
  EXPECT_THROW(make_plan({{"workers", "4"}, {"speed-multipliers", "1,2"}}), ConfigError);
  EXPECT_THROW(make_plan({{"nope", "1"}}), ConfigError);
}

TEST(CellConfig, DerivesStepsFromEpochs) {
  ExperimentPlan p = make_plan({{"model", "logreg"}, {"epochs", "3"}, {"batch", "4"}});
  const TrainData data = make_data(DataSpec{"blobs", {}, {}, 2, 11, 3, 0.5, 4, 9}, 1);
  ASSERT_EQ(data.train.size(), 18u);
  // Worker 0 of 4 holds 5 samples: 2 batches per epoch.
  const TrainConfig cfg = cell_config(p, data, 4, 7);
  EXPECT_EQ(cfg.steps, 6u);
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.model.input_dim, 3u);
  p.base.steps = 5;
  EXPECT_EQ(cell_config(p, data, 4, 7).steps, 5u);
}

TEST(MakeData, FixedDataSeedSharesTheTask) {
  DataSpec spec{"blobs", {}, {}, 2, 10, 2, 0.5, 4, std::nullopt};
  EXPECT_NE(make_data(spec, 1).train, make_data(spec, 2).train);
  spec.seed = 5;
  EXPECT_EQ(make_data(spec, 1).train, make_data(spec, 2).train);
}

}  // namespace
}  // namespace gradsync::harness
