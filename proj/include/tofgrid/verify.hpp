#pragma once

// Acceptance tests for a candidate lattice and subpixel vertex refinement.
//
// corrupted: ratios of successive vertex intervals along the outer lines of
//   each pencil must stay near one (an affine test).
// displaced: along each line segment, black/white and white/black transitions
//   must balance; a segment on the pattern perimeter sees only one polarity.

#include "tofgrid/core.hpp"
#include "tofgrid/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace tofgrid {

enum class VerdictReason { ok, corrupted, displaced };

inline const char* to_string(VerdictReason r) {
  switch (r) {
    case VerdictReason::ok: return "ok";
    case VerdictReason::corrupted: return "corrupted";
    case VerdictReason::displaced: return "displaced";
  }
  return "unknown";
}

struct Verdict {
  bool accepted = false;
  VerdictReason reason = VerdictReason::corrupted;
  double worst_f_deviation = 0.0;
  double worst_g_deviation = 0.0;
};

enum class GradientSampling { bilinear, nearest };

inline constexpr double kUnbalanced = std::numeric_limits<double>::infinity();

/// F = |v(j+1) - v(j)| / |v(k+1) - v(k)| along row i (zero-based indices).
/// A zero denominator yields +inf.
inline double interval_ratio_F(const VertexGrid& grid, int i, int j, int k) {
  const double num = (grid.at(i, j + 1) - grid.at(i, j)).norm();
  const double den = (grid.at(i, k + 1) - grid.at(i, k)).norm();
  if (den == 0.0) return std::numeric_limits<double>::infinity();
  return num / den;
}

inline VertexGrid transposed(const VertexGrid& g) {
  VertexGrid t(g.cols(), g.rows());
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) t.at(j, i) = g.at(i, j);
  }
  return t;
}

/// Largest |1 - F| over the first and last row of the grid.
inline double worst_interval_deviation(const VertexGrid& grid) {
  double worst = 0.0;
  const int intervals = grid.cols() - 1;
  for (int i : {0, grid.rows() - 1}) {
    for (int j = 0; j < intervals; ++j) {
      for (int k = 0; k < intervals; ++k) {
        if (j == k) continue;
        worst = std::max(worst, std::abs(1.0 - interval_ratio_F(grid, i, j, k)));
      }
    }
  }
  return worst;
}

struct TestOutcome {
  bool passed = false;
  double worst = 0.0;
};

/// |1 - F_jk| <= f on the outer lines of both pencils.
inline TestOutcome corrupted_test(const VertexGrid& grid, double f) {
  if (!(f >= 0.0)) throw ConfigError("f threshold must be non-negative");
  const double worst = std::max(worst_interval_deviation(grid), worst_interval_deviation(transposed(grid)));
  return {worst <= f, worst};
}

/// Ratio of positive to negative gradient projections onto the unit normal
/// of `line`, walking floor(d) + 1 points from a to b. +inf when no negative
/// projection is seen.
inline double transition_ratio_G(const HomLine& line, const Point2& a, const Point2& b,
                                 const GradientField& grads,
                                 GradientSampling sampling = GradientSampling::bilinear) {
  const Point2 n = line.normalized().normal();
  const double d = (b - a).norm();
  if (!(d >= 1.0)) throw DegenerateError("segment shorter than one pixel");
  const int steps = static_cast<int>(std::floor(d));
  double pos = 0.0, neg = 0.0;
  for (int k = 0; k <= steps; ++k) {
    const double t = k / d;
    const Point2 w = (1 - t) * a + t * b;
    const Point2 g = sampling == GradientSampling::bilinear ? grads.sample(w) : grads.sample_nearest(w);
    const double proj = n.dot(g);
    if (proj > 0) pos += proj;
    else neg -= proj;
  }
  if (neg == 0.0) return kUnbalanced;
  return pos / neg;
}

/// Deviation of G from its expected balance on a segment spanning `squares`
/// chequer squares. An even count alternates evenly; an odd count leaves one
/// extra square of either polarity, so the expected ratio is (n+1)/(n-1) or
/// its inverse. Returns NaN when a single square cannot be judged.
inline double balance_deviation(double G, int squares) {
  if (squares < 2) return std::numeric_limits<double>::quiet_NaN();
  if (!std::isfinite(G)) return std::numeric_limits<double>::infinity();
  if (squares % 2 == 0) return std::abs(1.0 - G);
  const double expected = double(squares + 1) / double(squares - 1);
  return std::abs(1.0 - (G >= 1.0 ? G / expected : G * expected));
}

/// Balance test on every line of both pencils, between its first and last
/// vertex.
inline TestOutcome displaced_test(const Pencil& L, const Pencil& M, const VertexGrid& grid,
                                  const GradientField& grads, double g,
                                  GradientSampling sampling = GradientSampling::bilinear) {
  if (!(g >= 0.0)) throw ConfigError("g threshold must be non-negative");
  double worst = 0.0;
  auto check = [&](const HomLine& line, const Point2& a, const Point2& b, int squares) {
    if ((b - a).norm() < 1.0) {
      worst = std::numeric_limits<double>::infinity();
      return;
    }
    const double dev = balance_deviation(transition_ratio_G(line, a, b, grads, sampling), squares);
    if (!std::isnan(dev)) worst = std::max(worst, dev);
  };
  const int l = grid.rows(), m = grid.cols();
  for (int i = 0; i < l; ++i) check(L.lines[static_cast<std::size_t>(i)], grid.at(i, 0), grid.at(i, m - 1), m - 1);
  for (int j = 0; j < m; ++j) check(M.lines[static_cast<std::size_t>(j)], grid.at(0, j), grid.at(l - 1, j), l - 1);
  return {worst <= g, worst};
}

struct RefinedVertex {
  Point2 position = Point2::Zero();
  bool refined = false;    // false: input returned unchanged
  bool converged = false;  // last update below tolerance
  int iterations = 0;
};

/// Per-sample weight of the orthogonality constraint. `squared` uses g g^T;
/// `magnitude` uses g g^T / |g|, which is unbiased for box-filtered edges
/// sampled at unit spacing.
enum class CornerWeighting { squared, magnitude };

/// Gradient-orthogonality refinement: x0 <- (sum G_p)^-1 sum G_p p over a
/// (2*half_width+1)^2 window of sample points centred on the estimate.
inline RefinedVertex subpixel_refine(const Point2& start, const GradientField& grads, int half_width = 2,
                                     int max_iter = 20, double tol = 0.01,
                                     CornerWeighting weighting = CornerWeighting::magnitude) {
  RefinedVertex out{start, false, false, 0};
  if (half_width < 2) throw ConfigError("subpixel window half-width must be >= 2");
  const double margin = half_width + 1;
  auto inside = [&](const Point2& p) {
    return p.x() >= margin && p.y() >= margin && p.x() <= grads.width() - 1 - margin &&
           p.y() <= grads.height() - 1 - margin;
  };
  if (!inside(start)) return out;

  Point2 x = start;
  for (int it = 1; it <= max_iter; ++it) {
    Eigen::Matrix2d A = Eigen::Matrix2d::Zero();
    Eigen::Vector2d rhs = Eigen::Vector2d::Zero();
    for (int dy = -half_width; dy <= half_width; ++dy) {
      for (int dx = -half_width; dx <= half_width; ++dx) {
        const Point2 p = x + Point2(dx, dy);
        const Point2 g = grads.sample(p);
        Eigen::Matrix2d G = g * g.transpose();
        if (weighting == CornerWeighting::magnitude) {
          const double r = g.norm();
          if (!(r > 0.0)) continue;
          G /= r;
        }
        A += G;
        rhs += G * p;
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(A);
    const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(1);
    if (!(lo > 0.0) || hi / lo > 1e8) return RefinedVertex{start, false, false, it};
    const Point2 next = A.ldlt().solve(rhs);
    const double step = (next - x).norm();
    x = next;
    out.iterations = it;
    // A point that wanders off the window has lost the corner.
    if ((x - start).norm() > half_width + 1 || !inside(x)) return RefinedVertex{start, false, false, it};
    if (step < tol) {
      out.converged = true;
      break;
    }
  }
  out.position = x;
  out.refined = true;
  return out;
}

}  // namespace tofgrid
