#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace opidmd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Dense real snapshot matrix. Rows are state components, columns are time
/// samples spaced `dt` apart. The values are immutable and shared between
/// copies, so copying a SnapshotMatrix or taking a pair stream from it is cheap.
class SnapshotMatrix {
 public:
  SnapshotMatrix() = default;
  SnapshotMatrix(Matrix values, double dt);

  Eigen::Index n_state() const { return values_->rows(); }
  Eigen::Index n_time() const { return values_->cols(); }
  double dt() const { return dt_; }

  const Matrix& values() const { return *values_; }
  auto column(Eigen::Index k) const { return values_->col(k); }
  auto columns(Eigen::Index first, Eigen::Index count) const {
    return values_->middleCols(first, count);
  }

  // Copy of columns [first, first + count) as a new series.
  SnapshotMatrix slice(Eigen::Index first, Eigen::Index count) const;

  // Series extended by one column at the end.
  SnapshotMatrix append_column(const Vector& column) const;

  std::shared_ptr<const Matrix> shared_values() const { return values_; }

 private:
  std::shared_ptr<const Matrix> values_ = std::make_shared<const Matrix>();
  double dt_ = 1.0;
};

/// Time-shift pairs (x_k, y_k) = (column first+k, column first+k+1) of a
/// source series. Holds a shared reference to the source values; no copy.
class SnapshotPairStream {
 public:
  SnapshotPairStream() = default;
  SnapshotPairStream(std::shared_ptr<const Matrix> source, Eigen::Index first, Eigen::Index length);

  Eigen::Index length() const { return length_; }
  Eigen::Index n_state() const { return source_ ? source_->rows() : 0; }

  auto x(Eigen::Index k) const { return source_->col(first_ + k); }
  auto y(Eigen::Index k) const { return source_->col(first_ + k + 1); }

  auto X() const { return source_->middleCols(first_, length_); }
  auto Y() const { return source_->middleCols(first_ + 1, length_); }

 private:
  std::shared_ptr<const Matrix> source_;
  Eigen::Index first_ = 0;
  Eigen::Index length_ = 0;
};

struct NoiseSpec {
  double ratio = 0.25;
  std::uint64_t seed = 0;
};

struct SplitSpec {
  Eigen::Index m_train = 0;
  Eigen::Index m_test = 0;
  bool bridge = true;
};

struct SplitResult {
  SnapshotPairStream train;
  Vector init_state;
  SnapshotMatrix test;
};

// Throws SeriesTooShort for fewer than two columns.
SnapshotPairStream build_pairs(const SnapshotMatrix& series);

// Amplitude-proportional Gaussian noise: v + ratio * |v| * N(0, 1) per entry,
// drawn column by column from a generator seeded with spec.seed.
SnapshotMatrix add_noise(const SnapshotMatrix& series, const NoiseSpec& spec);

// Train pairs from noisy columns [0, m_train); init_state is column
// m_train - 1 (clean when bridging, noisy otherwise); test is clean columns
// [m_train, m_train + m_test).
SplitResult split(const SnapshotMatrix& clean, const SnapshotMatrix& noisy, const SplitSpec& spec);

// CSV layout: `# n_state,<int>,n_time,<int>,dt,<float>` then one line per
// state row. Further lines starting with '#' directly after the header are
// comments. Values are written with 17 significant digits.
void write_csv(const SnapshotMatrix& series, const std::filesystem::path& path,
               const std::vector<std::string>& comments = {});
SnapshotMatrix read_csv(const std::filesystem::path& path);

// Plain matrix helpers using the same layout with dt = 1.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

}  // namespace opidmd
