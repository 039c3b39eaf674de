#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "stabgap/replay.hpp"

using namespace stabgap;

namespace {

// n samples per class; input row i holds (task_tag, i) so membership is checkable.
DatasetPtr tagged_task(double tag, int classes, int per_class) {
  Dataset d;
  d.inputs.resize(classes * per_class, 2);
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      d.inputs(r, 0) = tag;
      d.inputs(r, 1) = r;
      d.labels.push_back(c);
    }
  return std::make_shared<Dataset>(std::move(d));
}

}  // namespace

TEST(Buffer, CapacityNotBinding) {
  auto buf = MemoryBuffer::bounded(100);
  Rng rng = make_rng(1, 0);
  buf.update(0, tagged_task(0, 1, 60), rng);
  EXPECT_EQ(buf.size(), 60u);
}

TEST(Buffer, CapacityBinding) {
  auto buf = MemoryBuffer::bounded(100);
  Rng rng = make_rng(1, 0);
  buf.update(0, tagged_task(0, 3, 5000), rng);
  EXPECT_EQ(buf.size(), 300u);
  for (const auto& [cls, bucket] : buf.task_buckets(0)) {
    EXPECT_EQ(bucket.rows.size(), 100u);
    EXPECT_EQ(std::set<std::size_t>(bucket.rows.begin(), bucket.rows.end()).size(), 100u) << "without replacement";
    for (auto r : bucket.rows) EXPECT_EQ(bucket.source->labels[r], cls);
  }
}

TEST(Buffer, FullReplayStoresEverything) {
  auto buf = MemoryBuffer::full();
  Rng rng = make_rng(1, 0);
  Dataset d;
  d.inputs = Matrix::Zero(5421, 1);
  for (int i = 0; i < 5421; ++i) d.labels.push_back(i % 10);
  buf.update(0, std::make_shared<Dataset>(std::move(d)), rng);
  EXPECT_EQ(buf.size(), 5421u);
}

TEST(Buffer, DeterministicGivenSeed) {
  auto a = MemoryBuffer::bounded(10), b = MemoryBuffer::bounded(10);
  Rng ra = make_rng(5, 0), rb = make_rng(5, 0);
  const auto data = tagged_task(0, 2, 50);
  a.update(0, data, ra);
  b.update(0, data, rb);
  EXPECT_EQ(a.task_buckets(0).at(1).rows, b.task_buckets(0).at(1).rows);
}

TEST(Buffer, StoredTasksNeverChange) {
  auto buf = MemoryBuffer::bounded(20);
  Rng rng = make_rng(2, 0);
  buf.update(0, tagged_task(0, 2, 50), rng);
  const auto before = buf.task_buckets(0).at(0).rows;
  const Batch before_data = gather(*buf.task_buckets(0).at(0).source, before);
  buf.update(1, tagged_task(1, 2, 50), rng);
  for (int i = 0; i < 50; ++i) (void)buf.sample_uniform(8, rng);
  EXPECT_EQ(buf.task_buckets(0).at(0).rows, before);
  EXPECT_TRUE(gather(*buf.task_buckets(0).at(0).source, before).inputs == before_data.inputs);
  EXPECT_THROW(buf.update(0, tagged_task(0, 2, 50), rng), std::logic_error);
}

TEST(Buffer, CopiesAreIndependent) {
  auto buf = MemoryBuffer::bounded(5);
  Rng rng = make_rng(2, 0);
  buf.update(0, tagged_task(0, 1, 10), rng);
  MemoryBuffer copy = buf;
  buf = MemoryBuffer::bounded(5);
  Rng r2 = make_rng(3, 0);
  const auto draw = copy.sample_uniform(4, r2);
  EXPECT_EQ(draw.batch.size(), 4u);
}

TEST(SampleUniform, EmptyBufferGivesEmptyDraw) {
  MemoryBuffer buf;
  Rng rng = make_rng(0, 0);
  const auto draw = buf.sample_uniform(5, rng);
  EXPECT_TRUE(draw.batch.empty());
  EXPECT_THROW((void)buf.sample_uniform(0, rng), std::invalid_argument);
}

TEST(SampleUniform, SingletonRepeated) {
  auto buf = MemoryBuffer::bounded(1);
  Rng rng = make_rng(0, 0);
  buf.update(0, tagged_task(7, 1, 1), rng);
  const auto draw = buf.sample_uniform(4, rng);
  ASSERT_EQ(draw.batch.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(draw.batch.inputs(i, 0), 7.0);
}

TEST(SampleUniform, BalancedAcrossEqualTasks) {
  auto buf = MemoryBuffer::bounded(50);
  Rng rng = make_rng(9, 0);
  buf.update(0, tagged_task(0, 2, 50), rng);
  buf.update(1, tagged_task(1, 2, 50), rng);
  const auto draw = buf.sample_uniform(10000, rng);
  int from0 = 0;
  for (int t : draw.source_tasks) from0 += t == 0 ? 1 : 0;
  const double sigma = std::sqrt(10000 * 0.25);
  EXPECT_LT(std::abs(from0 - 5000), 3 * sigma);
}

TEST(PerTaskRefs, TaskPureBatches) {
  auto buf = MemoryBuffer::bounded(30);
  Rng rng = make_rng(4, 0);
  for (int t = 0; t < 3; ++t) buf.update(t, tagged_task(t, 2, 40), rng);
  const auto refs = buf.sample_per_task_refs(10, rng);
  ASSERT_EQ(refs.size(), 3u);
  for (int t = 0; t < 3; ++t) {
    ASSERT_EQ(refs[static_cast<std::size_t>(t)].size(), 10u);
    for (int i = 0; i < 10; ++i) EXPECT_EQ(refs[static_cast<std::size_t>(t)].inputs(i, 0), t);
  }
}

TEST(PerTaskRefs, SingleTask) {
  auto buf = MemoryBuffer::bounded(100);
  Rng rng = make_rng(4, 0);
  buf.update(0, tagged_task(0, 10, 150), rng);
  const auto refs = buf.sample_per_task_refs(128, rng);
  ASSERT_EQ(refs.size(), 1u);
  EXPECT_EQ(refs[0].size(), 128u);
}

TEST(PerTaskRefs, MembershipInStoredRows) {
  auto buf = MemoryBuffer::bounded(5);
  Rng rng = make_rng(8, 0);
  buf.update(0, tagged_task(0, 2, 40), rng);
  buf.update(1, tagged_task(1, 2, 40), rng);
  const auto refs = buf.sample_per_task_refs(20, rng);
  for (int t = 0; t < 2; ++t) {
    std::set<double> stored;
    for (const auto& [c, b] : buf.task_buckets(t))
      for (auto r : b.rows) stored.insert(b.source->inputs(static_cast<Eigen::Index>(r), 1));
    for (int i = 0; i < 20; ++i) {
      EXPECT_EQ(refs[static_cast<std::size_t>(t)].inputs(i, 0), t);
      EXPECT_TRUE(stored.contains(refs[static_cast<std::size_t>(t)].inputs(i, 1)));
    }
  }
}

TEST(PerTaskRefs, ErrorsWithoutPastTasksOrWithEmptyBucket) {
  MemoryBuffer buf = MemoryBuffer::bounded(5);
  Rng rng = make_rng(0, 0);
  EXPECT_THROW((void)buf.sample_per_task_refs(4, rng), std::logic_error);
  Dataset empty;
  empty.inputs.resize(0, 2);
  buf.update(0, std::make_shared<Dataset>(empty), rng);
  EXPECT_THROW((void)buf.sample_per_task_refs(4, rng), std::runtime_error);
}

TEST(SubsampleReplay, SingleSourceAndMembership) {
  Rng rng = make_rng(3, 0);
  auto buf = MemoryBuffer::bounded(100);
  buf.update(0, tagged_task(0, 1, 20), rng);
  buf.update(1, tagged_task(1, 1, 20), rng);
  const auto refs = buf.sample_per_task_refs(10, rng);
  const Batch one = subsample_replay_batch({refs[0]}, 10, rng);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(one.inputs(i, 0), 0.0);

  const Batch mix = subsample_replay_batch(refs, 30, rng);
  for (int i = 0; i < 30; ++i) {
    bool found = false;
    for (const auto& r : refs)
      for (Eigen::Index j = 0; j < r.inputs.rows(); ++j) found = found || r.inputs.row(j) == mix.inputs.row(i);
    EXPECT_TRUE(found);
  }
}

TEST(SubsampleReplay, BalancedSources) {
  Rng rng = make_rng(3, 0);
  std::vector<Batch> refs(2);
  for (int k = 0; k < 2; ++k) {
    refs[static_cast<std::size_t>(k)].inputs = Matrix::Constant(10, 1, k);
    refs[static_cast<std::size_t>(k)].labels.assign(10, 0);
  }
  std::vector<int> src;
  (void)subsample_replay_batch(refs, 10000, rng, &src);
  int from0 = 0;
  for (int s : src) from0 += s == 0 ? 1 : 0;
  EXPECT_LT(std::abs(from0 - 5000), 3 * std::sqrt(2500.0));
}

TEST(JointMixWeights, Formula) {
  EXPECT_EQ(joint_mix_weights(1), std::make_pair(1.0, 0.0));
  EXPECT_EQ(joint_mix_weights(2), std::make_pair(0.5, 0.5));
  const auto [a, b] = joint_mix_weights(5);
  EXPECT_DOUBLE_EQ(a, 0.2);
  EXPECT_DOUBLE_EQ(b, 0.8);
  for (int t = 1; t < 50; ++t) {
    const auto [n, o] = joint_mix_weights(t);
    EXPECT_NEAR(n + o, 1.0, 1e-15);
  }
  EXPECT_THROW(joint_mix_weights(0), std::invalid_argument);
}
