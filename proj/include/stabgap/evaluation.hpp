#pragma once

// Continual evaluation: per-iteration accuracy on fixed per-task evaluation
// sets, and the stability-gap metrics derived from those traces.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabgap/core.hpp"
#include "stabgap/nn.hpp"

namespace stabgap {

/// Fixed evaluation subset per task, sampled once per run.
struct EvalSets {
  std::vector<Batch> tasks;

  [[nodiscard]] std::size_t size() const { return tasks.size(); }
};

/// Uniform sample without replacement of min(max_per_task, |test|) examples per task.
inline EvalSets build_eval_sets(const std::vector<DatasetPtr>& test_splits, std::size_t max_per_task, std::uint64_t seed) {
  EvalSets out;
  Rng rng = make_rng(seed, 0xe7a1);
  for (const auto& split : test_splits) {
    if (!split || split->size() == 0) throw std::invalid_argument("build_eval_sets: empty test split");
    std::vector<std::size_t> idx(split->size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const std::size_t keep = std::min(max_per_task, idx.size());
    for (std::size_t i = 0; i < keep; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    out.tasks.push_back(gather(*split, idx));
  }
  return out;
}

/// Optional post-hoc transform of logits (bias correction) applied before argmax.
using LogitTransform = std::function<void(Matrix&)>;

inline std::vector<double> continual_eval(const ParamVector& w, const NetworkSpec& spec, const EvalSets& sets,
                                          const LogitTransform& transform = {}) {
  std::vector<double> acc;
  acc.reserve(sets.size());
  for (const auto& b : sets.tasks) {
    Matrix logits = forward_logits(w, spec, b);
    if (transform) transform(logits);
    acc.push_back(accuracy_of_logits(logits, b.labels));
  }
  return acc;
}

struct MetricsRecord {
  long global_iter = 0;     // 1-based count of parameter updates so far
  int training_task = 0;    // 0-based task being trained
  std::vector<double> accuracy;  // per task
  bool projected = false;
  bool degenerate_ref = false;
  double wall_ms = 0.0;     // cumulative training time, evaluation excluded
};

struct MetricsLog {
  std::vector<MetricsRecord> records;
  std::vector<long> task_boundaries;  // global_iter of the last update of each task

  [[nodiscard]] std::size_t num_tasks() const { return task_boundaries.size(); }

  /// Boundaries rebuilt from the records: last logged iteration per training task.
  [[nodiscard]] static std::vector<long> boundaries_from(const std::vector<MetricsRecord>& records) {
    std::vector<long> b;
    for (const auto& r : records) {
      if (r.training_task < 0) throw std::invalid_argument("MetricsLog: negative training task");
      const auto t = static_cast<std::size_t>(r.training_task);
      if (b.size() <= t) b.resize(t + 1, -1);
      b[t] = std::max(b[t], r.global_iter);
    }
    for (std::size_t t = 0; t < b.size(); ++t)
      if (b[t] < 0) throw std::invalid_argument("MetricsLog: no record for training task " + std::to_string(t));
    return b;
  }
};

struct MinAccuracy {
  double value = 0.0;
  long global_iter = 0;  // where the minimum was first reached
};

/// Lowest logged accuracy on task t strictly after its last training update.
inline MinAccuracy min_acc_record(const MetricsLog& log, std::size_t t) {
  if (t >= log.num_tasks()) throw std::out_of_range("min_acc: task index out of range");
  if (t + 1 == log.num_tasks()) throw std::invalid_argument("min_acc: undefined for the final task");
  const long after = log.task_boundaries[t];
  std::optional<MinAccuracy> best;
  for (const auto& r : log.records) {
    if (r.global_iter <= after) continue;
    if (t >= r.accuracy.size()) throw std::invalid_argument("min_acc: record lacks task accuracy");
    if (!best || r.accuracy[t] < best->value) best = MinAccuracy{r.accuracy[t], r.global_iter};
  }
  if (!best) throw std::invalid_argument("min_acc: no record after task " + std::to_string(t));
  return *best;
}

inline double min_acc(const MetricsLog& log, std::size_t t) { return min_acc_record(log, t).value; }

/// Mean of min_acc over every task but the last; absent for a single task.
inline std::optional<double> avg_min_acc(const MetricsLog& log) {
  const std::size_t T = log.num_tasks();
  if (T < 2) return std::nullopt;
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < T; ++t) sum += min_acc(log, t);
  return sum / static_cast<double>(T - 1);
}

inline double final_avg_acc(const MetricsLog& log) {
  if (log.records.empty()) throw std::invalid_argument("final_avg_acc: empty log");
  const auto& acc = log.records.back().accuracy;
  if (acc.empty()) throw std::invalid_argument("final_avg_acc: empty accuracy vector");
  return std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
}

/// Fraction of logged records with a projected update.
inline double projected_fraction(const MetricsLog& log) {
  if (log.records.empty()) return 0.0;
  std::size_t n = 0;
  for (const auto& r : log.records) n += r.projected ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(log.records.size());
}

/// Per logged iteration, the fraction of runs whose update was projected.
inline std::vector<double> projection_rate_series(const std::vector<MetricsLog>& logs) {
  if (logs.empty()) throw std::invalid_argument("projection_rate_series: no logs");
  const auto& ref = logs.front().records;
  for (const auto& l : logs) {
    if (l.records.size() != ref.size()) throw std::invalid_argument("projection_rate_series: logs are not aligned");
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (l.records[i].global_iter != ref[i].global_iter)
        throw std::invalid_argument("projection_rate_series: logs are not aligned at record " + std::to_string(i));
  }
  std::vector<double> out(ref.size(), 0.0);
  for (const auto& l : logs)
    for (std::size_t i = 0; i < ref.size(); ++i) out[i] += l.records[i].projected ? 1.0 : 0.0;
  for (double& x : out) x /= static_cast<double>(logs.size());
  return out;
}

}  // namespace stabgap
