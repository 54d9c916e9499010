#pragma once

// Shared domain types: errors, raster images, homogeneous points and lines,
// grid specification and the ideal (model) vertex lattice.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tofgrid {

using Point2 = Eigen::Vector2d;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user configuration (thresholds, grid sizes, depth limits...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or unsupported file contents.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Geometrically or numerically degenerate input.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// No usable board support in the segmented image.
class NoBoardError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

/// No sweep-line holds the requested number of Hough clusters.
class NoPencilError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

/// Recovered lines do not intersect in a usable lattice.
class GeometryError : public DegenerateError {
 public:
  using DegenerateError::DegenerateError;
};

// ---------------------------------------------------------------------------
// Raster
// ---------------------------------------------------------------------------

/// Dense row-major raster. Pixel (x, y) has its centre at integer coordinates,
/// x rightward, y downward.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) {
      throw ConfigError("image dimensions must be non-negative");
    }
    data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }

  std::span<T> pixels() noexcept { return data_; }
  std::span<const T> pixels() const noexcept { return data_; }

  template <typename U>
  bool same_size(const Image<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Null / invalid marker for masked and depth samples.
inline constexpr double kNull = std::numeric_limits<double>::quiet_NaN();
inline bool is_null(double v) noexcept { return std::isnan(v); }

// ---------------------------------------------------------------------------
// Grid specification
// ---------------------------------------------------------------------------

/// Internal-vertex layout of a chequerboard with (rows+1) x (cols+1) squares.
/// `rows` lines form pencil L, `cols` lines form pencil M.
struct GridSpec {
  int rows = 0;
  int cols = 0;

  static GridSpec make(int rows, int cols) {
    if (rows < 2 || cols < 2) {
      throw ConfigError("grid needs at least 2 x 2 internal vertices");
    }
    if (rows >= cols) {
      // Square grids make the pencil/label correspondence ambiguous.
      throw ConfigError("grid rows must be strictly fewer than cols (got " +
                        std::to_string(rows) + " x " + std::to_string(cols) + ")");
    }
    return GridSpec{rows, cols};
  }

  int count() const noexcept { return rows * cols; }
  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

// ---------------------------------------------------------------------------
// Homogeneous geometry
// ---------------------------------------------------------------------------

struct HomPoint {
  Eigen::Vector3d h = Eigen::Vector3d::UnitZ();

  HomPoint() = default;
  explicit HomPoint(const Eigen::Vector3d& v) : h(v) {}
  HomPoint(double x, double y, double w = 1.0) : h(x, y, w) {}
  static HomPoint from(const Point2& p) { return HomPoint(p.x(), p.y(), 1.0); }

  bool at_infinity(double rel_tol = 1e-12) const {
    return std::abs(h.z()) <= rel_tol * h.head<2>().norm();
  }
  Point2 euclidean() const { return h.head<2>() / h.z(); }
};

/// Line a*x + b*y + c = 0.
struct HomLine {
  Eigen::Vector3d h = Eigen::Vector3d::UnitX();

  HomLine() = default;
  explicit HomLine(const Eigen::Vector3d& v) : h(v) {}
  HomLine(double a, double b, double c) : h(a, b, c) {}

  /// Scaled so that a^2 + b^2 = 1; evaluate() then returns signed distance.
  HomLine normalized() const {
    const double n = h.head<2>().norm();
    if (n == 0.0) throw DegenerateError("line has zero normal");
    return HomLine(h / n);
  }
  double evaluate(const Point2& p) const { return h.x() * p.x() + h.y() * p.y() + h.z(); }
  Point2 normal() const { return h.head<2>(); }
};

/// Intersection of two lines via the cross product. Returns a point at
/// infinity (w = 0) for parallel lines; identical lines are degenerate.
inline HomPoint line_intersect(const HomLine& l, const HomLine& m) {
  const Eigen::Vector3d p = l.h.cross(m.h);
  if (p.norm() <= 1e-14 * l.h.norm() * m.h.norm()) {
    throw DegenerateError("cannot intersect identical lines");
  }
  return HomPoint(p);
}

/// Line through two points.
inline HomLine line_through(const HomPoint& a, const HomPoint& b) {
  return HomLine(a.h.cross(b.h));
}

/// Ordered set of lines sharing a common apex (possibly at infinity).
struct Pencil {
  std::vector<HomLine> lines;
  HomPoint apex;
};

// ---------------------------------------------------------------------------
// Vertex lattice
// ---------------------------------------------------------------------------

/// rows x cols inhomogeneous points, indexed (i, j) from zero. Row i holds
/// the intersections of line L_i with every line of M.
class VertexGrid {
 public:
  VertexGrid() = default;
  VertexGrid(int rows, int cols)
      : rows_(rows), cols_(cols),
        points_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), Point2::Zero()) {}

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return points_.size(); }
  bool empty() const noexcept { return points_.empty(); }

  Point2& at(int i, int j) { return points_[index(i, j)]; }
  const Point2& at(int i, int j) const { return points_[index(i, j)]; }

  std::span<Point2> points() noexcept { return points_; }
  std::span<const Point2> points() const noexcept { return points_; }

  /// Grid with i and/or j order reversed.
  VertexGrid flipped(bool flip_i, bool flip_j) const {
    VertexGrid out(rows_, cols_);
    for (int i = 0; i < rows_; ++i) {
      for (int j = 0; j < cols_; ++j) {
        out.at(i, j) = at(flip_i ? rows_ - 1 - i : i, flip_j ? cols_ - 1 - j : j);
      }
    }
    return out;
  }

 private:
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(cols_) +
           static_cast<std::size_t>(j);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<Point2> points_;
};

/// Unit-spaced lattice centred at the origin: v_ij = (j - (m+1)/2, i - (l+1)/2)
/// with one-based i, j.
inline VertexGrid ideal_grid(const GridSpec& spec) {
  VertexGrid grid(spec.rows, spec.cols);
  const double cx = 0.5 * (spec.cols + 1);
  const double cy = 0.5 * (spec.rows + 1);
  for (int i = 0; i < spec.rows; ++i) {
    for (int j = 0; j < spec.cols; ++j) {
      grid.at(i, j) = Point2((j + 1) - cx, (i + 1) - cy);
    }
  }
  return grid;
}

/// Largest point-wise distance between two equally shaped grids.
inline double max_vertex_distance(const VertexGrid& a, const VertexGrid& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ConfigError("vertex grids differ in shape");
  }
  double worst = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    worst = std::max(worst, (a.points()[k] - b.points()[k]).norm());
  }
  return worst;
}

/// Distance between grids modulo reversal of the i and/or j index order.
inline double max_vertex_distance_unordered(const VertexGrid& detected, const VertexGrid& truth) {
  double best = std::numeric_limits<double>::infinity();
  for (int f = 0; f < 4; ++f) {
    best = std::min(best, max_vertex_distance(detected.flipped(f & 1, f & 2), truth));
  }
  return best;
}

}  // namespace tofgrid
