#pragma once

#include <random>
#include <vector>

#include "stabgap/stabgap.hpp"

namespace testing_helpers {

inline stabgap::Batch random_batch(int n, int dim, int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  stabgap::Batch b;
  b.inputs.resize(n, dim);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) b.inputs(i, j) = nd(rng);
  for (int i = 0; i < n; ++i) b.labels.push_back(cls(rng));
  return b;
}

inline stabgap::ParamVector random_vector(Eigen::Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  stabgap::ParamVector v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

inline stabgap::DatasetPtr make_dataset(stabgap::Batch b) {
  return std::make_shared<stabgap::Dataset>(stabgap::Dataset{std::move(b.inputs), std::move(b.labels)});
}

}  // namespace testing_helpers
