#pragma once

// Dataset ingestion and task-stream construction: IDX (MNIST) files, rotation,
// global whitening, and Gaussian-blob synthetic streams.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "stabgap/core.hpp"

namespace stabgap {

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Scenario { DomainIL, ClassIL };

struct Task {
  DatasetPtr train;
  DatasetPtr test;
  std::string descriptor;
  std::vector<int> classes;  // labels present in this task
};

struct TaskStream {
  std::vector<Task> tasks;
  Scenario scenario = Scenario::DomainIL;
  int num_classes = 0;

  [[nodiscard]] std::size_t size() const { return tasks.size(); }
  [[nodiscard]] int input_dim() const { return tasks.empty() ? 0 : static_cast<int>(tasks.front().train->dim()); }
  [[nodiscard]] std::vector<DatasetPtr> test_splits() const {
    std::vector<DatasetPtr> out;
    for (const auto& t : tasks) out.push_back(t.test);
    return out;
  }
};

namespace detail {

// Reads a whole file through zlib, which passes plain files through untouched.
inline std::vector<unsigned char> read_maybe_gz(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> chunk{};
  for (;;) {
    const int n = gzread(f, chunk.data(), static_cast<unsigned>(chunk.size()));
    if (n < 0) {
      gzclose(f);
      throw DataError("read error in " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), chunk.begin(), chunk.begin() + n);
  }
  gzclose(f);
  return out;
}

inline std::uint32_t read_be32(const std::vector<unsigned char>& buf, std::size_t off, const std::string& field,
                               const std::string& file) {
  if (off + 4 > buf.size()) throw DataError(file + ": truncated while reading " + field);
  return (std::uint32_t{buf[off]} << 24) | (std::uint32_t{buf[off + 1]} << 16) | (std::uint32_t{buf[off + 2]} << 8) |
         std::uint32_t{buf[off + 3]};
}

}  // namespace detail

inline constexpr std::uint32_t kIdxImageMagic = 2051;
inline constexpr std::uint32_t kIdxLabelMagic = 2049;

/// Decode an IDX image/label file pair; pixel bytes are scaled by 1/255.
inline Dataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto img = detail::read_maybe_gz(images);
  const auto lab = detail::read_maybe_gz(labels);
  const std::string in = images.filename().string();
  const std::string ln = labels.filename().string();

  const auto img_magic = detail::read_be32(img, 0, "magic", in);
  if (img_magic != kIdxImageMagic)
    throw DataError(in + ": bad magic " + std::to_string(img_magic) + " (expected 2051)");
  const auto n_img = detail::read_be32(img, 4, "image count", in);
  const auto rows = detail::read_be32(img, 8, "row count", in);
  const auto cols = detail::read_be32(img, 12, "column count", in);

  const auto lab_magic = detail::read_be32(lab, 0, "magic", ln);
  if (lab_magic != kIdxLabelMagic)
    throw DataError(ln + ": bad magic " + std::to_string(lab_magic) + " (expected 2049)");
  const auto n_lab = detail::read_be32(lab, 4, "label count", ln);

  if (n_img != n_lab)
    throw DataError("count mismatch: " + std::to_string(n_img) + " images vs " + std::to_string(n_lab) + " labels");
  const std::size_t dim = std::size_t{rows} * cols;
  if (img.size() < 16 + std::size_t{n_img} * dim) throw DataError(in + ": truncated pixel data");
  if (lab.size() < 8 + std::size_t{n_lab}) throw DataError(ln + ": truncated label data");

  Dataset out;
  out.inputs.resize(n_img, static_cast<Eigen::Index>(dim));
  out.labels.resize(n_img);
  for (std::size_t i = 0; i < n_img; ++i) {
    for (std::size_t j = 0; j < dim; ++j)
      out.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = img[16 + i * dim + j] / 255.0;
    out.labels[i] = lab[8 + i];
  }
  return out;
}

/// Rotate a square row-major image counter-clockwise by `degrees` about its
/// centre. Bilinear sampling, zero outside the source.
inline Eigen::RowVectorXd rotate_image(const Eigen::Ref<const Eigen::RowVectorXd>& image, int side, double degrees) {
  if (image.size() != static_cast<Eigen::Index>(side) * side) throw std::invalid_argument("rotate_image: size mismatch");
  if (degrees == 0.0) return image;
  const double th = degrees * std::numbers::pi / 180.0;
  const double cs = std::cos(th);
  const double sn = std::sin(th);
  const double centre = (side - 1) / 2.0;
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(image.size());
  auto px = [&](int r, int c) -> double {
    if (r < 0 || c < 0 || r >= side || c >= side) return 0.0;
    return image[r * side + c];
  };
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) {
      const double dx = c - centre;
      const double dy = r - centre;
      const double sc = centre + cs * dx - sn * dy;
      const double sr = centre + sn * dx + cs * dy;
      const double fr = std::floor(sr);
      const double fc = std::floor(sc);
      const double ar = sr - fr;
      const double ac = sc - fc;
      const int r0 = static_cast<int>(fr);
      const int c0 = static_cast<int>(fc);
      out[r * side + c] = (1 - ar) * (1 - ac) * px(r0, c0) + (1 - ar) * ac * px(r0, c0 + 1) +
                          ar * (1 - ac) * px(r0 + 1, c0) + ar * ac * px(r0 + 1, c0 + 1);
    }
  }
  return out;
}

inline Dataset rotate_dataset(const Dataset& data, int side, double degrees) {
  Dataset out;
  out.labels = data.labels;
  out.inputs.resize(data.inputs.rows(), data.inputs.cols());
  for (Eigen::Index i = 0; i < data.inputs.rows(); ++i)
    out.inputs.row(i) = rotate_image(data.inputs.row(i), side, degrees);
  return out;
}

struct WhiteningStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Scalar mean and (population) standard deviation over every pixel.
inline WhiteningStats compute_whitening_stats(const Dataset& train) {
  const double n = static_cast<double>(train.inputs.size());
  if (n == 0) throw DataError("compute_whitening_stats: empty dataset");
  const double mean = train.inputs.sum() / n;
  const double var = (train.inputs.array() - mean).square().sum() / n;
  const double sd = std::sqrt(var);
  // rounding leaves a tiny residual variance on constant data
  if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) throw DataError("compute_whitening_stats: zero standard deviation");
  return {mean, sd};
}

inline void whiten(Dataset& data, const WhiteningStats& s) {
  if (!(s.std > 0)) throw DataError("whiten: zero standard deviation");
  data.inputs = (data.inputs.array() - s.mean) / s.std;
}

inline void unwhiten(Dataset& data, const WhiteningStats& s) { data.inputs = data.inputs.array() * s.std + s.mean; }

/// Locate an MNIST file, accepting either the plain or the .gz name.
inline std::filesystem::path find_idx_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& name : {stem, stem + ".gz"}) {
    const auto p = dir / name;
    if (std::filesystem::exists(p)) return p;
  }
  throw DataError("missing " + stem + "[.gz] in " + dir.string());
}

/// Domain-incremental Rotated MNIST: one task per rotation, rotation applied
/// to raw pixels, then whitening with statistics of the unrotated train split.
inline TaskStream build_rotated_mnist(const std::filesystem::path& data_dir,
                                      const std::vector<double>& rotations = {0.0, 80.0, 160.0},
                                      std::size_t max_train = 0) {
  Dataset train = load_idx(find_idx_file(data_dir, "train-images-idx3-ubyte"),
                           find_idx_file(data_dir, "train-labels-idx1-ubyte"));
  Dataset test = load_idx(find_idx_file(data_dir, "t10k-images-idx3-ubyte"),
                          find_idx_file(data_dir, "t10k-labels-idx1-ubyte"));
  if (train.dim() != 784) throw DataError("expected 28x28 MNIST images");
  if (max_train > 0 && max_train < train.size()) {
    train.inputs.conservativeResize(static_cast<Eigen::Index>(max_train), Eigen::NoChange);
    train.labels.resize(max_train);
  }
  const WhiteningStats stats = compute_whitening_stats(train);

  TaskStream stream;
  stream.scenario = Scenario::DomainIL;
  stream.num_classes = 10;
  std::vector<int> all(10);
  std::iota(all.begin(), all.end(), 0);
  for (double deg : rotations) {
    auto tr = std::make_shared<Dataset>(rotate_dataset(train, 28, deg));
    auto te = std::make_shared<Dataset>(rotate_dataset(test, 28, deg));
    whiten(*tr, stats);
    whiten(*te, stats);
    stream.tasks.push_back({std::move(tr), std::move(te), "rotation " + std::to_string(static_cast<int>(deg)), all});
  }
  return stream;
}

struct SyntheticConfig {
  Scenario scenario = Scenario::DomainIL;
  int num_tasks = 3;
  int classes = 4;
  int samples_per_class = 200;
  int test_per_class = 100;
  int dim = 8;
  double rotation_per_task_degrees = 60.0;
  double separation = 6.0;  // norm of each class mean
  double noise = 1.0;       // per-coordinate standard deviation
  std::uint64_t seed = 0;
};

/// Gaussian blobs. Domain-IL: every task holds all classes and the whole
/// constellation (means and samples) is rotated by task * rotation in each
/// coordinate plane (0,1), (2,3), ... Class-IL: classes are split into
/// consecutive equal groups, one group per task.
inline TaskStream build_synthetic_stream(const SyntheticConfig& cfg) {
  if (cfg.num_tasks < 1 || cfg.classes < 1 || cfg.samples_per_class < 1 || cfg.test_per_class < 1 || cfg.dim < 1)
    throw std::invalid_argument("build_synthetic_stream: parameters must be positive");
  if (cfg.scenario == Scenario::ClassIL && cfg.classes % cfg.num_tasks != 0)
    throw std::invalid_argument("build_synthetic_stream: classes must divide evenly across tasks");

  Rng rng = make_rng(cfg.seed, 0x5e7);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix means(cfg.classes, cfg.dim);
  for (int c = 0; c < cfg.classes; ++c) {
    Eigen::RowVectorXd m(cfg.dim);
    for (int j = 0; j < cfg.dim; ++j) m[j] = normal(rng);
    means.row(c) = cfg.separation * m / m.norm();
  }

  auto rotate = [&](Eigen::RowVectorXd x, double degrees) {
    const double th = degrees * std::numbers::pi / 180.0;
    const double cs = std::cos(th);
    const double sn = std::sin(th);
    for (int j = 0; j + 1 < cfg.dim; j += 2) {
      const double a = x[j];
      const double b = x[j + 1];
      x[j] = cs * a - sn * b;
      x[j + 1] = sn * a + cs * b;
    }
    return x;
  };

  TaskStream stream;
  stream.scenario = cfg.scenario;
  stream.num_classes = cfg.classes;
  const int per_task = cfg.scenario == Scenario::ClassIL ? cfg.classes / cfg.num_tasks : cfg.classes;
  for (int t = 0; t < cfg.num_tasks; ++t) {
    std::vector<int> classes(per_task);
    std::iota(classes.begin(), classes.end(), cfg.scenario == Scenario::ClassIL ? t * per_task : 0);
    const double deg = cfg.scenario == Scenario::DomainIL ? t * cfg.rotation_per_task_degrees : 0.0;
    auto make = [&](int per_class) {
      auto d = std::make_shared<Dataset>();
      d->inputs.resize(static_cast<Eigen::Index>(per_class) * per_task, cfg.dim);
      d->labels.reserve(static_cast<std::size_t>(per_class * per_task));
      Eigen::Index row = 0;
      for (int i = 0; i < per_class; ++i)
        for (int c : classes) {
          Eigen::RowVectorXd x = means.row(c);
          for (int j = 0; j < cfg.dim; ++j) x[j] += cfg.noise * normal(rng);
          d->inputs.row(row++) = rotate(x, deg);
          d->labels.push_back(c);
        }
      return d;
    };
    auto train = make(cfg.samples_per_class);
    auto test = make(cfg.test_per_class);
    stream.tasks.push_back({std::move(train), std::move(test), "synthetic task " + std::to_string(t), classes});
  }
  return stream;
}

}  // namespace stabgap
