#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace stabgap {

/// Row-major dense matrix; one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Flat parameter (or gradient) vector of a network.
using ParamVector = Eigen::VectorXd;

using Rng = std::mt19937_64;

/// A mini-batch of labelled samples.
struct Batch {
  Matrix inputs;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] bool empty() const { return labels.empty(); }
};

/// A labelled dataset split. Held through shared_ptr<const Dataset> so that
/// buffers can reference stored rows without copying them.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;

  [[nodiscard]] std::size_t size() const { return labels.size(); }
  [[nodiscard]] Eigen::Index dim() const { return inputs.cols(); }
};

using DatasetPtr = std::shared_ptr<const Dataset>;

/// Derive an independent generator for one purpose (init, batches, replay...)
/// from a run seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return Rng(seq);
}

/// Copy the selected rows of a dataset into a batch.
inline Batch gather(const Dataset& data, const std::vector<std::size_t>& rows) {
  Batch out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), data.dim());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.inputs.row(static_cast<Eigen::Index>(i)) = data.inputs.row(static_cast<Eigen::Index>(rows[i]));
    out.labels[i] = data.labels[rows[i]];
  }
  return out;
}

/// Row-wise concatenation of two batches.
inline Batch concat(const Batch& a, const Batch& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.inputs.cols() != b.inputs.cols()) throw std::invalid_argument("concat: input dimension mismatch");
  Batch out;
  out.inputs.resize(a.inputs.rows() + b.inputs.rows(), a.inputs.cols());
  out.inputs << a.inputs, b.inputs;
  out.labels = a.labels;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

}  // namespace stabgap
