#pragma once

#include <atomic>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cpmm/errors.hpp"
#include "cpmm/random.hpp"

namespace cpmm {

using Index = Eigen::Index;

/// Matrix-free linear operator X -> Y with a paired transpose application.
///
/// The transpose is whatever the constructor was given: for exact-adjoint
/// maps it is the true transpose of `apply`, for mismatched views it is a
/// different discretization. Both closures must be pure; copies of a
/// LinearMap share their captured state.
class LinearMap {
 public:
  using Fn = std::function<Vec(const Vec&)>;

  LinearMap(Index rows, Index cols, Fn apply, Fn apply_transpose,
            std::string name = {}, std::shared_ptr<const Mat> matrix = nullptr)
      : rows_(rows),
        cols_(cols),
        apply_(std::move(apply)),
        apply_transpose_(std::move(apply_transpose)),
        name_(std::move(name)),
        matrix_(std::move(matrix)) {
    require(rows_ >= 1 && cols_ >= 1, ErrorKind::InvalidParameter,
            "linear map dimensions must be positive");
  }

  Index rows() const noexcept { return rows_; }
  Index cols() const noexcept { return cols_; }
  const std::string& name() const noexcept { return name_; }

  Vec apply(const Vec& x) const {
    if (x.size() != cols_)
      throw Error(ErrorKind::DimensionMismatch,
                  name_ + ": apply expects " + std::to_string(cols_) +
                      " entries, got " + std::to_string(x.size()));
    return apply_(x);
  }

  Vec apply_transpose(const Vec& y) const {
    if (y.size() != rows_)
      throw Error(ErrorKind::DimensionMismatch,
                  name_ + ": apply_transpose expects " + std::to_string(rows_) +
                      " entries, got " + std::to_string(y.size()));
    return apply_transpose_(y);
  }

  /// Backing matrix for dense maps (nullptr for matrix-free ones). When set,
  /// apply/apply_transpose are exactly M*x and M^T*y.
  const Mat* matrix() const noexcept { return matrix_.get(); }

 private:
  Index rows_;
  Index cols_;
  Fn apply_;
  Fn apply_transpose_;
  std::string name_;
  std::shared_ptr<const Mat> matrix_;
};

inline LinearMap dense_map(Mat m, std::string name = "dense") {
  auto shared = std::make_shared<const Mat>(std::move(m));
  const Index rows = shared->rows();
  const Index cols = shared->cols();
  return LinearMap(
      rows, cols, [shared](const Vec& x) -> Vec { return (*shared) * x; },
      [shared](const Vec& y) -> Vec { return shared->transpose() * y; },
      std::move(name), shared);
}

inline LinearMap zero_map(Index rows, Index cols) {
  return dense_map(Mat::Zero(rows, cols), "zero");
}

inline LinearMap identity_map(Index n, double scale = 1.0) {
  return dense_map(scale * Mat::Identity(n, n), "identity");
}

/// c * map; the transpose is scaled by the same factor.
inline LinearMap scaled(double c, const LinearMap& map) {
  if (const Mat* m = map.matrix()) return dense_map(c * (*m), map.name());
  return LinearMap(
      map.rows(), map.cols(), [map, c](const Vec& x) -> Vec { return c * map.apply(x); },
      [map, c](const Vec& y) -> Vec { return c * map.apply_transpose(y); },
      map.name());
}

/// Pointwise difference a - b (apply and transpose both differenced).
inline LinearMap difference(const LinearMap& a, const LinearMap& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(ErrorKind::DimensionMismatch, "difference: shapes differ");
  return LinearMap(
      a.rows(), a.cols(), [a, b](const Vec& x) -> Vec { return a.apply(x) - b.apply(x); },
      [a, b](const Vec& y) -> Vec { return a.apply_transpose(y) - b.apply_transpose(y); },
      a.name() + "-" + b.name());
}

/// Forward from one map, transpose from another: the building block for
/// deliberately mismatched pairs.
inline LinearMap with_transpose_of(const LinearMap& forward, const LinearMap& transpose_source) {
  if (forward.rows() != transpose_source.rows() || forward.cols() != transpose_source.cols())
    throw Error(ErrorKind::DimensionMismatch, "with_transpose_of: shapes differ");
  return LinearMap(
      forward.rows(), forward.cols(), [forward](const Vec& x) { return forward.apply(x); },
      [transpose_source](const Vec& y) { return transpose_source.apply_transpose(y); },
      forward.name() + "/" + transpose_source.name() + "^T");
}

/// Vertical concatenation of blocks sharing `cols`. The transpose sums the
/// blockwise transposes in block order.
inline LinearMap stack(std::vector<LinearMap> blocks, std::string name = "stack") {
  require(!blocks.empty(), ErrorKind::InvalidParameter, "stack: no blocks");
  const Index cols = blocks.front().cols();
  Index rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw Error(ErrorKind::DimensionMismatch, "stack: column counts differ");
    rows += b.rows();
  }
  auto shared = std::make_shared<const std::vector<LinearMap>>(std::move(blocks));
  auto forward = [shared, rows](const Vec& x) -> Vec {
    Vec out(rows);
    Index offset = 0;
    for (const auto& b : *shared) {
      out.segment(offset, b.rows()) = b.apply(x);
      offset += b.rows();
    }
    return out;
  };
  auto transpose = [shared, cols](const Vec& y) -> Vec {
    Vec out = Vec::Zero(cols);
    Index offset = 0;
    for (const auto& b : *shared) {
      out += b.apply_transpose(y.segment(offset, b.rows()));
      offset += b.rows();
    }
    return out;
  };
  return LinearMap(rows, cols, forward, transpose, std::move(name));
}

/// Shared counters for operator-call accounting.
struct CallCounts {
  std::atomic<long> apply{0};
  std::atomic<long> apply_transpose{0};
};

inline LinearMap counted(const LinearMap& map, std::shared_ptr<CallCounts> counts) {
  return LinearMap(
      map.rows(), map.cols(),
      [map, counts](const Vec& x) {
        ++counts->apply;
        return map.apply(x);
      },
      [map, counts](const Vec& y) {
        ++counts->apply_transpose;
        return map.apply_transpose(y);
      },
      map.name());
}

/// Dense matrix of `apply` (column j = apply(e_j)).
inline Mat assemble_apply(const LinearMap& map) {
  Mat out(map.rows(), map.cols());
  Vec e = Vec::Zero(map.cols());
  for (Index j = 0; j < map.cols(); ++j) {
    e[j] = 1.0;
    out.col(j) = map.apply(e);
    e[j] = 0.0;
  }
  return out;
}

/// Dense matrix B with B^T = matrix of `apply_transpose`, i.e. the forward
/// operator whose exact transpose is the map's transpose routine.
inline Mat assemble_transpose(const LinearMap& map) {
  Mat out(map.rows(), map.cols());
  Vec e = Vec::Zero(map.rows());
  for (Index i = 0; i < map.rows(); ++i) {
    e[i] = 1.0;
    out.row(i) = map.apply_transpose(e).transpose();
    e[i] = 0.0;
  }
  return out;
}

// Plain-text matrix format: "rows cols" header, then row-major values.

inline void write_matrix_text(std::ostream& os, const Mat& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ' ';
      os << m(i, j);
    }
    os << '\n';
  }
}

inline Mat read_matrix_text(std::istream& is) {
  long rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows < 1 || cols < 1)
    throw Error(ErrorKind::ParseError, "matrix header must be two positive integers");
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      if (!(is >> m(i, j)))
        throw Error(ErrorKind::ParseError, "matrix data truncated at entry (" +
                                               std::to_string(i) + ", " + std::to_string(j) + ")");
  std::string extra;
  if (is >> extra) throw Error(ErrorKind::ParseError, "trailing data after matrix: " + extra);
  return m;
}

}  // namespace cpmm
