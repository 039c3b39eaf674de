#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles/oracles.hpp"
#include "stabgap/evaluation.hpp"

using namespace stabgap;

namespace {

MetricsRecord rec(long it, int task, std::vector<double> acc, bool projected = false) {
  MetricsRecord r;
  r.global_iter = it;
  r.training_task = task;
  r.accuracy = std::move(acc);
  r.projected = projected;
  return r;
}

// Three tasks of 2 iterations each; task-0 trace after its training is
// 0.90, 0.70, 0.80, 0.85 and task-1 trace after its training is 0.75, 0.80.
MetricsLog hand_log() {
  MetricsLog log;
  log.records = {rec(1, 0, {0.5, 0.1, 0.1}), rec(2, 0, {0.95, 0.1, 0.1}), rec(3, 1, {0.90, 0.6, 0.1}),
                 rec(4, 1, {0.70, 0.9, 0.1}), rec(5, 2, {0.80, 0.75, 0.5}), rec(6, 2, {0.85, 0.80, 0.95})};
  log.task_boundaries = {2, 4, 6};
  return log;
}

}  // namespace

TEST(MinAcc, HandTrace) {
  const MetricsLog log = hand_log();
  EXPECT_EQ(min_acc(log, 0), 0.70);
  EXPECT_EQ(min_acc_record(log, 0).global_iter, 4);
  EXPECT_EQ(min_acc(log, 1), 0.75);
  EXPECT_NEAR(*avg_min_acc(log), 0.725, 1e-15);
  EXPECT_THROW(min_acc(log, 2), std::invalid_argument);
  EXPECT_THROW(min_acc(log, 3), std::out_of_range);
}

TEST(MinAcc, MonotoneAndConstantTraces) {
  MetricsLog log;
  log.records = {rec(1, 0, {0.9, 0.0}), rec(2, 1, {0.91, 0.5}), rec(3, 1, {0.95, 0.6}), rec(4, 1, {0.97, 0.7})};
  log.task_boundaries = {1, 4};
  EXPECT_EQ(min_acc(log, 0), 0.91);
  EXPECT_EQ(*avg_min_acc(log), 0.91);  // T = 2: single term
  for (auto& r : log.records) r.accuracy[0] = 0.6;
  EXPECT_EQ(min_acc(log, 0), 0.6);
}

TEST(MinAcc, NeverDroppingEqualsEndOfTaskAccuracy) {
  MetricsLog log;
  log.records = {rec(1, 0, {0.8, 0.0, 0.0}), rec(2, 1, {0.8, 0.9, 0.0}), rec(3, 2, {0.8, 0.9, 0.7})};
  log.task_boundaries = {1, 2, 3};
  EXPECT_NEAR(*avg_min_acc(log), (0.8 + 0.9) / 2.0, 1e-15);
}

TEST(MinAcc, AgainstLoopOracleOnRandomLogs) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 50; ++trial) {
    MetricsLog log;
    long it = 0;
    for (int t = 0; t < 4; ++t) {
      for (int i = 0; i < 10; ++i) log.records.push_back(rec(++it, t, {u(rng), u(rng), u(rng), u(rng)}));
      log.task_boundaries.push_back(it);
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < 3; ++t) {
      std::vector<std::pair<long, double>> trace;
      for (const auto& r : log.records) trace.emplace_back(r.global_iter, r.accuracy[t]);
      const double m = oracle::min_after(trace, log.task_boundaries[t]);
      EXPECT_EQ(min_acc(log, t), m);
      for (const auto& r : log.records)
        if (r.global_iter > log.task_boundaries[t]) EXPECT_LE(min_acc(log, t), r.accuracy[t]);
      sum += m;
    }
    EXPECT_NEAR(*avg_min_acc(log), sum / 3.0, 1e-15);
    const auto& last = log.records.back().accuracy;
    EXPECT_LE(*avg_min_acc(log), (last[0] + last[1] + last[2]) / 3.0 + 1e-15);
  }
}

TEST(FinalAvgAcc, Mean) {
  MetricsLog log;
  log.records = {rec(1, 0, {0.9, 0.8, 1.0})};
  log.task_boundaries = {1};
  EXPECT_NEAR(final_avg_acc(log), 0.9, 1e-15);
  log.records = {rec(1, 0, {0.42})};
  EXPECT_EQ(final_avg_acc(log), 0.42);
  EXPECT_FALSE(avg_min_acc(log).has_value());
  EXPECT_THROW(final_avg_acc(MetricsLog{}), std::invalid_argument);
}

TEST(ProjectionRate, Series) {
  std::vector<MetricsLog> logs(5);
  for (int s = 0; s < 5; ++s)
    for (long i = 1; i <= 3; ++i) logs[static_cast<std::size_t>(s)].records.push_back(rec(i, 0, {0.5}, i == 1 || (i == 2 && s < 3)));
  const auto r = projection_rate_series(logs);
  EXPECT_EQ(r, (std::vector<double>{1.0, 0.6, 0.0}));
  logs[2].records.pop_back();
  EXPECT_THROW(projection_rate_series(logs), std::invalid_argument);
  logs[2].records.push_back(rec(4, 0, {0.5}));
  EXPECT_THROW(projection_rate_series(logs), std::invalid_argument);
}

TEST(EvalSets, FixedSizeAndDeterministic) {
  auto d = testing_helpers::make_dataset(testing_helpers::random_batch(1500, 3, 4, 1));
  auto small = testing_helpers::make_dataset(testing_helpers::random_batch(20, 3, 4, 2));
  const auto a = build_eval_sets({d, small}, 1000, 7);
  const auto b = build_eval_sets({d, small}, 1000, 7);
  EXPECT_EQ(a.tasks[0].size(), 1000u);
  EXPECT_EQ(a.tasks[1].size(), 20u);
  EXPECT_TRUE(a.tasks[0].inputs == b.tasks[0].inputs);
  EXPECT_FALSE(a.tasks[0].inputs == build_eval_sets({d}, 1000, 8).tasks[0].inputs);
}

TEST(ContinualEval, ChanceLevelAndPurity) {
  const NetworkSpec spec{{20, 32, 10}};
  const ParamVector w = init_network(spec, 1);
  const ParamVector before = w;
  auto d = testing_helpers::make_dataset(testing_helpers::random_batch(3000, 20, 10, 3));
  const auto sets = build_eval_sets({d, d}, 1000, 1);
  const auto acc = continual_eval(w, spec, sets);
  ASSERT_EQ(acc.size(), 2u);
  for (double a : acc) EXPECT_NEAR(a, 0.1, 0.05);
  EXPECT_TRUE(w == before);
}

TEST(ContinualEval, PerfectMemorizerOnFirstTask) {
  // Linear net reading the label straight off a one-hot input.
  const NetworkSpec spec{{3, 3}};
  ParamVector w = ParamVector::Zero(12);
  w[0] = w[4] = w[8] = 1.0;
  Batch t1;
  t1.inputs = Matrix::Identity(3, 3);
  t1.labels = {0, 1, 2};
  Batch t2;
  t2.inputs = Matrix::Identity(3, 3);
  t2.labels = {1, 2, 0};
  EvalSets sets{{t1, t2}};
  const auto acc = continual_eval(w, spec, sets);
  EXPECT_EQ(acc[0], 1.0);
  EXPECT_EQ(acc[1], 0.0);
}
