#pragma once

// Independent reference computations for the test suites. Everything here is
// written the slow, obvious way and shares no code with the library beyond
// its value types.

#include "tofgrid/core.hpp"
#include "tofgrid/hough.hpp"
#include "tofgrid/imageio.hpp"
#include "tofgrid/metrics.hpp"
#include "tofgrid/preprocess.hpp"
#include "tofgrid/sweep.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

using tofgrid::Point2;

/// Chebyshev erosion by direct neighbourhood scan; out-of-raster pixels are
/// ignored.
inline tofgrid::MaskedImage erode(const tofgrid::MaskedImage& in, int r) {
  tofgrid::MaskedImage out{tofgrid::Image<double>(in.width(), in.height(), tofgrid::kNull)};
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      bool keep = true;
      for (int dy = -r; dy <= r && keep; ++dy) {
        for (int dx = -r; dx <= r && keep; ++dx) {
          if (!in.samples.contains(x + dx, y + dy)) continue;
          if (tofgrid::is_null(in.samples(x + dx, y + dy))) keep = false;
        }
      }
      if (keep) out.samples(x, y) = in.samples(x, y);
    }
  }
  return out;
}

/// (xi, eta) at one pixel from the central-difference definition.
inline Point2 gradient_at(const tofgrid::MaskedImage& b, int x, int y) {
  auto v = [&](int px, int py) -> double {
    if (!b.samples.contains(px, py)) return tofgrid::kNull;
    return b.samples(px, py);
  };
  const double c = v(x, y), l = v(x - 1, y), r = v(x + 1, y), u = v(x, y - 1), d = v(x, y + 1);
  for (double s : {c, l, r, u, d}) {
    if (std::isnan(s)) return Point2::Zero();
  }
  return Point2((r - l) / 2.0, (d - u) / 2.0);
}

/// Double angle through trigonometry rather than the algebraic identity.
inline Point2 double_angle_trig(double xi, double eta) {
  const double rho = std::hypot(xi, eta);
  const double theta = std::atan2(eta, xi);
  return Point2(rho * std::cos(2 * theta), rho * std::sin(2 * theta));
}

/// Cross product written out component by component.
inline Eigen::Vector3d cross(const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
  return Eigen::Vector3d(a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]);
}

/// Every interval ratio on the first and last row and column; returns the
/// largest |1 - F|.
inline double worst_f(const tofgrid::VertexGrid& g) {
  double worst = 0.0;
  auto scan = [&](auto at, int lines, int count, bool outer_only) {
    for (int i = 0; i < lines; ++i) {
      if (outer_only && i != 0 && i != lines - 1) continue;
      for (int j = 0; j + 1 < count; ++j) {
        for (int k = 0; k + 1 < count; ++k) {
          if (j == k) continue;
          const double a = (at(i, j + 1) - at(i, j)).norm();
          const double b = (at(i, k + 1) - at(i, k)).norm();
          worst = std::max(worst, std::abs(1.0 - a / b));
        }
      }
    }
  };
  scan([&](int i, int j) { return g.at(i, j); }, g.rows(), g.cols(), true);
  scan([&](int i, int j) { return g.at(j, i); }, g.cols(), g.rows(), true);
  return worst;
}

inline Point2 apply(const Eigen::Matrix3d& H, const Point2& p) {
  const Eigen::Vector3d q = H * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return Point2(q.x() / q.z(), q.y() / q.z());
}

/// Homography with modest perspective that keeps the unit lattice of size
/// up to 8 x 8 in front of the camera and well conditioned.
inline Eigen::Matrix3d random_homography(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double angle = u(rng) * std::numbers::pi;
  const double scale = 8.0 + 4.0 * (u(rng) + 1.0);
  Eigen::Matrix3d H;
  H << scale * std::cos(angle) + u(rng), -scale * std::sin(angle) + u(rng), 80 + 10 * u(rng),
      scale * std::sin(angle) + u(rng), scale * std::cos(angle) + u(rng), 70 + 10 * u(rng),
      0.02 * u(rng), 0.02 * u(rng), 1.0;
  return H;
}

inline tofgrid::VertexGrid projected_lattice(const Eigen::Matrix3d& H, const tofgrid::GridSpec& spec) {
  tofgrid::VertexGrid g = tofgrid::ideal_grid(spec);
  for (auto& p : g.points()) p = apply(H, p);
  return g;
}

/// Area of [x0, x1] x [y0, y1] covered by the quadrant X < cx, Y < cy.
inline double quadrant_area(double x0, double x1, double y0, double y1, double cx, double cy) {
  const double w = std::clamp(cx - x0, 0.0, x1 - x0);
  const double h = std::clamp(cy - y0, 0.0, y1 - y0);
  return w * h;
}

/// Exact box-filtered image of an axis-aligned X-corner at (cx, cy): the
/// top-left and bottom-right quadrants are `dark`, the others `light`.
inline tofgrid::AmplitudeImage axis_corner(int w, int h, double cx, double cy, double dark, double light) {
  tofgrid::AmplitudeImage img{tofgrid::Image<double>(w, h)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double x0 = x - 0.5, x1 = x + 0.5, y0 = y - 0.5, y1 = y + 0.5;
      const double tl = quadrant_area(x0, x1, y0, y1, cx, cy);
      const double left = std::clamp(cx - x0, 0.0, 1.0);  // column fraction left of cx
      const double top = std::clamp(cy - y0, 0.0, 1.0);
      const double tr = top - tl;
      const double bl = left - tl;
      const double br = 1.0 - tl - tr - bl;
      img.samples(x, y) = (tl + br) * dark + (tr + bl) * light;
    }
  }
  return img;
}

/// Number of splat positions of one labelled point that land inside the
/// array, counted from the accumulation rule.
inline long in_bounds_samples(const tofgrid::LabelledPoint& p, const tofgrid::HoughGeometry& g) {
  double x = p.local.x(), y = p.local.y();
  if (p.label == tofgrid::Label::mu) std::swap(x, y);
  const double s = g.u0() + x - y * (0 - g.v0()) * g.slope_per_bin;
  const double t = g.u0() + x - y * (g.v1 - g.v0()) * g.slope_per_bin;
  const double w1 = std::sqrt((t - s) * (t - s) + double(g.v1) * g.v1);
  long n = 0;
  for (int w = 0; w <= static_cast<int>(std::floor(w1)); ++w) {
    const double a = w / w1;
    const double u = (1 - a) * s + a * t, v = a * g.v1;
    if (u >= 0 && v >= 0 && u <= g.u1 && v <= g.v1) ++n;
  }
  return n;
}

struct SweepPick {
  int s = -1;
  int t = -1;
  double score = 0.0;
};

/// Exhaustive sweep search using only the public single-sweep helpers.
inline SweepPick brute_force_sweep(const tofgrid::HoughArray& H, int n, double run_fraction) {
  const auto& g = H.geometry();
  SweepPick best;
  for (int s = 0; s <= g.v1; ++s) {
    for (int t = 0; t <= g.v1; ++t) {
      const auto hist = tofgrid::sweep_histogram(H, s, t);
      const double peak = *std::max_element(hist.h.begin(), hist.h.end());
      if (!(peak > 0)) continue;
      const auto runs = tofgrid::find_runs(hist.h, run_fraction * peak);
      const double score = tofgrid::total_score(runs, n);
      if (!(score > 0)) continue;
      bool take = best.s < 0 || score > best.score;
      if (!take && score == best.score) {
        const double dc = std::abs(s - g.v0()) + std::abs(t - g.v0());
        const double db = std::abs(best.s - g.v0()) + std::abs(best.t - g.v0());
        take = dc < db || (dc == db && (s < best.s || (s == best.s && t < best.t)));
      }
      if (take) best = {s, t, score};
    }
  }
  return best;
}

/// Reprojection RMS minimised from several random restarts with a plain
/// Gauss-Newton on the 8 parameters (h33 fixed to 1).
inline double refit_rms(const tofgrid::VertexGrid& model, const tofgrid::VertexGrid& observed, int restarts,
                        std::mt19937_64& rng) {
  const auto n = static_cast<int>(model.size());
  auto cost = [&](const Eigen::Matrix<double, 8, 1>& h) {
    Eigen::Matrix3d H;
    H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
    double c = 0;
    for (int k = 0; k < n; ++k) c += (observed.points()[k] - apply(H, model.points()[k])).squaredNorm();
    return c;
  };
  // Start from an affine least-squares fit.
  Eigen::MatrixXd A(2 * n, 6);
  Eigen::VectorXd b(2 * n);
  for (int k = 0; k < n; ++k) {
    const Point2 m = model.points()[k], o = observed.points()[k];
    A.row(2 * k) << m.x(), m.y(), 1, 0, 0, 0;
    A.row(2 * k + 1) << 0, 0, 0, m.x(), m.y(), 1;
    b(2 * k) = o.x();
    b(2 * k + 1) = o.y();
  }
  const Eigen::VectorXd aff = A.colPivHouseholderQr().solve(b);
  std::normal_distribution<double> jitter(0.0, 1.0);
  double best = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Eigen::Matrix<double, 8, 1> h;
    h << aff(0), aff(1), aff(2), aff(3), aff(4), aff(5), 0, 0;
    if (r > 0) {
      for (int q = 0; q < 6; ++q) h(q) += 0.05 * jitter(rng) * (std::abs(h(q)) + 1);
      h(6) = 1e-3 * jitter(rng);
      h(7) = 1e-3 * jitter(rng);
    }
    double c = cost(h);
    double mu = 1e-3;
    for (int it = 0; it < 500; ++it) {
      Eigen::Matrix<double, 8, 8> JtJ = Eigen::Matrix<double, 8, 8>::Zero();
      Eigen::Matrix<double, 8, 1> Jtr = Eigen::Matrix<double, 8, 1>::Zero();
      for (int k = 0; k < n; ++k) {
        // Numerical Jacobian keeps this oracle independent of the library's.
        const Point2 m = model.points()[k], o = observed.points()[k];
        auto proj = [&](const Eigen::Matrix<double, 8, 1>& p) {
          const double w = p(6) * m.x() + p(7) * m.y() + 1.0;
          return Point2((p(0) * m.x() + p(1) * m.y() + p(2)) / w, (p(3) * m.x() + p(4) * m.y() + p(5)) / w);
        };
        const Point2 base = proj(h);
        Eigen::Matrix<double, 2, 8> J;
        for (int q = 0; q < 8; ++q) {
          Eigen::Matrix<double, 8, 1> hp = h;
          const double step = 1e-7 * std::max(1.0, std::abs(h(q)));
          hp(q) += step;
          J.col(q) = (proj(hp) - base) / step;
        }
        JtJ += J.transpose() * J;
        Jtr += J.transpose() * (o - base);
      }
      Eigen::Matrix<double, 8, 8> Aug = JtJ;
      Aug.diagonal() *= (1 + mu);
      const Eigen::Matrix<double, 8, 1> trial = h + Aug.ldlt().solve(Jtr);
      const double tc = cost(trial);
      if (tc < c) {
        const bool done = c - tc < 1e-15 * std::max(c, 1e-300);
        h = trial;
        c = tc;
        mu = std::max(mu / 10, 1e-12);
        if (done) break;
      } else {
        mu *= 10;
        if (mu > 1e12) break;
      }
    }
    best = std::min(best, c);
  }
  return std::sqrt(best / n);
}

}  // namespace oracle
