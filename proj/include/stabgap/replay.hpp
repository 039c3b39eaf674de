#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "stabgap/core.hpp"

namespace stabgap {

/// Stored examples of one class from one task. Rows index into the task's
/// (immutable) training set, which the bucket keeps alive.
struct ClassBucket {
  DatasetPtr source;
  std::vector<std::size_t> rows;        // replayable examples
  std::vector<std::size_t> holdout;     // validation examples (BiC), never replayed
  Matrix logits;                        // logits at insertion time, aligned with `rows` (DER); may be empty
};

/// Computes logits for a set of inputs; used to snapshot DER targets.
using LogitFn = std::function<Matrix(const Matrix&)>;

struct ReplayDraw {
  Batch batch;
  std::vector<int> source_tasks;
  Matrix stored_logits;  // rows aligned with batch when the buffer records logits
};

/// Per-task, per-class bounded memory. Filled once at the end of each task and
/// read-only afterwards.
class MemoryBuffer {
 public:
  struct Options {
    std::optional<std::size_t> capacity_per_class = 100;  // nullopt: store everything (full replay)
    std::size_t holdout_per_class = 0;                    // carved out of the capacity, not replayed
  };

  MemoryBuffer() = default;
  explicit MemoryBuffer(Options opts) : opts_(opts) {
    if (opts_.capacity_per_class && opts_.holdout_per_class >= *opts_.capacity_per_class && opts_.holdout_per_class > 0)
      throw std::invalid_argument("MemoryBuffer: holdout must be smaller than the per-class capacity");
  }

  // The flat index points into tasks_, so copies rebuild it.
  MemoryBuffer(const MemoryBuffer& other) : opts_(other.opts_), tasks_(other.tasks_) { reindex(); }
  MemoryBuffer& operator=(const MemoryBuffer& other) {
    if (this != &other) {
      opts_ = other.opts_;
      tasks_ = other.tasks_;
      reindex();
    }
    return *this;
  }
  MemoryBuffer(MemoryBuffer&&) noexcept = default;
  MemoryBuffer& operator=(MemoryBuffer&&) noexcept = default;
  ~MemoryBuffer() = default;

  static MemoryBuffer bounded(std::size_t capacity_per_class) { return MemoryBuffer(Options{capacity_per_class, 0}); }
  static MemoryBuffer full() { return MemoryBuffer(Options{std::nullopt, 0}); }

  [[nodiscard]] const Options& options() const { return opts_; }
  [[nodiscard]] bool is_full_replay() const { return !opts_.capacity_per_class.has_value(); }

  /// Class-balanced selection: per class, min(capacity, available) examples
  /// drawn uniformly without replacement.
  void update(int task_id, DatasetPtr task_data, Rng& rng, const LogitFn& logits = {}) {
    if (!task_data) throw std::invalid_argument("MemoryBuffer::update: null dataset");
    if (tasks_.contains(task_id))
      throw std::logic_error("MemoryBuffer::update: task " + std::to_string(task_id) + " already stored");

    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < task_data->size(); ++i) by_class[task_data->labels[i]].push_back(i);

    auto& task = tasks_[task_id];
    for (auto& [cls, idx] : by_class) {
      ClassBucket bucket;
      bucket.source = task_data;
      std::size_t keep = idx.size();
      if (opts_.capacity_per_class) {
        keep = std::min(keep, *opts_.capacity_per_class);
        // partial Fisher-Yates: the first `keep` entries become a uniform sample
        for (std::size_t i = 0; i < keep; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
          std::swap(idx[i], idx[pick(rng)]);
        }
        idx.resize(keep);
      }
      const std::size_t hold = std::min(opts_.holdout_per_class, keep > 0 ? keep - 1 : 0);
      bucket.holdout.assign(idx.end() - static_cast<std::ptrdiff_t>(hold), idx.end());
      idx.resize(keep - hold);
      bucket.rows = std::move(idx);
      if (logits && !bucket.rows.empty()) bucket.logits = logits(gather(*task_data, bucket.rows).inputs);
      task.emplace(cls, std::move(bucket));
    }
    reindex();
  }

  [[nodiscard]] bool empty() const { return flat_.empty(); }
  [[nodiscard]] std::size_t size() const { return flat_.size(); }
  [[nodiscard]] std::size_t num_tasks() const { return tasks_.size(); }
  [[nodiscard]] std::vector<int> task_ids() const {
    std::vector<int> ids;
    for (const auto& [t, _] : tasks_) ids.push_back(t);
    return ids;
  }
  [[nodiscard]] std::size_t task_size(int task_id) const {
    auto it = per_task_.find(task_id);
    return it == per_task_.end() ? 0 : it->second.size();
  }
  [[nodiscard]] const std::map<int, ClassBucket>& task_buckets(int task_id) const { return tasks_.at(task_id); }
  [[nodiscard]] bool records_logits() const {
    for (const auto& [t, buckets] : tasks_)
      for (const auto& [c, b] : buckets)
        if (b.logits.rows() > 0) return true;
    return false;
  }

  /// All held-out (validation) examples, across tasks.
  [[nodiscard]] Batch holdout_batch() const {
    Batch out;
    for (const auto& [t, buckets] : tasks_)
      for (const auto& [c, b] : buckets) out = concat(out, gather(*b.source, b.holdout));
    return out;
  }

  /// b draws, uniform with replacement over every stored example.
  [[nodiscard]] ReplayDraw sample_uniform(std::size_t b, Rng& rng) const {
    if (b < 1) throw std::invalid_argument("sample_uniform: b must be >= 1");
    return draw_from(flat_, b, rng);
  }

  /// One batch of b draws per stored task (ascending task id), each uniform
  /// with replacement within that task.
  [[nodiscard]] std::vector<Batch> sample_per_task_refs(std::size_t b, Rng& rng) const {
    if (tasks_.empty()) throw std::logic_error("sample_per_task_refs: buffer holds no past task");
    std::vector<Batch> out;
    for (const auto& [task_id, entries] : per_task_) {
      if (entries.empty())
        throw std::runtime_error("sample_per_task_refs: task " + std::to_string(task_id) + " has an empty buffer");
      out.push_back(draw_from(entries, b, rng).batch);
    }
    for (const auto& [task_id, _] : tasks_)
      if (!per_task_.contains(task_id))
        throw std::runtime_error("sample_per_task_refs: task " + std::to_string(task_id) + " has an empty buffer");
    return out;
  }

 private:
  struct Entry {
    int task;
    const ClassBucket* bucket;
    std::size_t pos;  // index into bucket->rows
  };

  void reindex() {
    flat_.clear();
    per_task_.clear();
    for (const auto& [t, buckets] : tasks_)
      for (const auto& [c, b] : buckets)
        for (std::size_t i = 0; i < b.rows.size(); ++i) {
          flat_.push_back({t, &b, i});
          per_task_[t].push_back({t, &b, i});
        }
  }

  static ReplayDraw draw_from(const std::vector<Entry>& entries, std::size_t b, Rng& rng) {
    ReplayDraw out;
    if (entries.empty()) return out;
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    const auto dim = entries.front().bucket->source->dim();
    const bool with_logits = entries.front().bucket->logits.rows() > 0;
    out.batch.inputs.resize(static_cast<Eigen::Index>(b), dim);
    out.batch.labels.resize(b);
    out.source_tasks.resize(b);
    if (with_logits) out.stored_logits.resize(static_cast<Eigen::Index>(b), entries.front().bucket->logits.cols());
    for (std::size_t i = 0; i < b; ++i) {
      const Entry& e = entries[pick(rng)];
      const auto row = static_cast<Eigen::Index>(e.bucket->rows[e.pos]);
      out.batch.inputs.row(static_cast<Eigen::Index>(i)) = e.bucket->source->inputs.row(row);
      out.batch.labels[i] = e.bucket->source->labels[static_cast<std::size_t>(row)];
      out.source_tasks[i] = e.task;
      if (with_logits) out.stored_logits.row(static_cast<Eigen::Index>(i)) = e.bucket->logits.row(static_cast<Eigen::Index>(e.pos));
    }
    return out;
  }

  Options opts_{};
  std::map<int, std::map<int, ClassBucket>> tasks_;
  std::vector<Entry> flat_;
  std::map<int, std::vector<Entry>> per_task_;
};

/// b draws, uniform with replacement, from the concatenation of the
/// reference batches. `source` (optional) receives the batch index of each draw.
inline Batch subsample_replay_batch(const std::vector<Batch>& refs, std::size_t b, Rng& rng,
                                    std::vector<int>* source = nullptr) {
  if (refs.empty()) throw std::invalid_argument("subsample_replay_batch: no reference batches");
  std::vector<std::pair<int, Eigen::Index>> pool;
  for (std::size_t k = 0; k < refs.size(); ++k)
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(refs[k].size()); ++i) pool.emplace_back(static_cast<int>(k), i);
  if (pool.empty()) throw std::invalid_argument("subsample_replay_batch: reference batches are empty");
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  Batch out;
  out.inputs.resize(static_cast<Eigen::Index>(b), refs.front().inputs.cols());
  out.labels.resize(b);
  if (source) source->resize(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto [k, row] = pool[pick(rng)];
    out.inputs.row(static_cast<Eigen::Index>(i)) = refs[static_cast<std::size_t>(k)].inputs.row(row);
    out.labels[i] = refs[static_cast<std::size_t>(k)].labels[static_cast<std::size_t>(row)];
    if (source) (*source)[i] = k;
  }
  return out;
}

/// Weights (1/t, 1 - 1/t) of the new-task and replay terms when training task t (1-based).
inline std::pair<double, double> joint_mix_weights(int t) {
  if (t < 1) throw std::invalid_argument("joint_mix_weights: t must be >= 1");
  const double w_new = 1.0 / static_cast<double>(t);
  return {w_new, 1.0 - w_new};
}

}  // namespace stabgap
