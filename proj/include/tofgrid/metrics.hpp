#pragma once

// Homography fitting (normalised DLT + Levenberg-Marquardt) between the
// ideal lattice and a detected one, and the geometric and photometric error
// statistics derived from it.

#include "tofgrid/core.hpp"
#include "tofgrid/preprocess.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace tofgrid {

/// Frobenius-normalised 3x3 matrix with non-negative H(2,2).
struct Homography {
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity() / std::sqrt(3.0);

  Homography() = default;
  explicit Homography(const Eigen::Matrix3d& raw) : m(normalize(raw)) {}

  static Eigen::Matrix3d normalize(const Eigen::Matrix3d& raw) {
    const double n = raw.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw DegenerateError("homography is zero or non-finite");
    Eigen::Matrix3d out = raw / n;
    if (out(2, 2) < 0.0) out = -out;
    return out;
  }

  Point2 apply(const Point2& p) const {
    const Eigen::Vector3d q = m * Eigen::Vector3d(p.x(), p.y(), 1.0);
    return q.head<2>() / q.z();
  }
};

/// Maximum absolute entry difference after scale alignment.
inline double homography_distance(const Homography& a, const Homography& b) {
  return std::min((a.m - b.m).cwiseAbs().maxCoeff(), (a.m + b.m).cwiseAbs().maxCoeff());
}

namespace detail {

/// Similarity taking points to zero centroid and mean distance sqrt(2).
inline Eigen::Matrix3d normalizing_transform(std::span<const Point2> pts) {
  Point2 c = Point2::Zero();
  for (const auto& p : pts) c += p;
  c /= static_cast<double>(pts.size());
  double mean = 0.0;
  for (const auto& p : pts) mean += (p - c).norm();
  mean /= static_cast<double>(pts.size());
  if (!(mean > 0.0)) throw DegenerateError("all points coincide");
  const double s = std::sqrt(2.0) / mean;
  Eigen::Matrix3d T;
  T << s, 0, -s * c.x(), 0, s, -s * c.y(), 0, 0, 1;
  return T;
}

inline Point2 transform(const Eigen::Matrix3d& T, const Point2& p) {
  const Eigen::Vector3d q = T * Eigen::Vector3d(p.x(), p.y(), 1.0);
  return q.head<2>() / q.z();
}

}  // namespace detail

/// Normalised DLT for observed ~ H * model.
inline Homography fit_dlt(std::span<const Point2> model, std::span<const Point2> observed) {
  if (model.size() != observed.size()) throw ConfigError("correspondence sets differ in size");
  if (model.size() < 4) throw DegenerateError("homography needs at least 4 correspondences");
  const Eigen::Matrix3d Tm = detail::normalizing_transform(model);
  const Eigen::Matrix3d To = detail::normalizing_transform(observed);
  const auto n = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd A(2 * n, 9);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Point2 x = detail::transform(Tm, model[static_cast<std::size_t>(k)]);
    const Point2 y = detail::transform(To, observed[static_cast<std::size_t>(k)]);
    A.row(2 * k) << 0, 0, 0, -x.x(), -x.y(), -1, y.y() * x.x(), y.y() * x.y(), y.y();
    A.row(2 * k + 1) << x.x(), x.y(), 1, 0, 0, 0, -y.x() * x.x(), -y.x() * x.y(), -y.x();
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  // The null space must be one-dimensional: the 8th singular value is the
  // smallest non-null one.
  if (!(sv(7) > 1e-9 * sv(0))) throw DegenerateError("correspondences are degenerate for a homography");
  const Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  return Homography(To.inverse() * Hn * Tm);
}

inline double reprojection_cost(const Homography& H, std::span<const Point2> model,
                                std::span<const Point2> observed) {
  double cost = 0.0;
  for (std::size_t k = 0; k < model.size(); ++k) cost += (observed[k] - H.apply(model[k])).squaredNorm();
  return cost;
}

struct LmReport {
  Homography H;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool warning = false;  // a non-finite cost was met
};

/// Levenberg-Marquardt on the nine entries of H, renormalised after every
/// accepted step. Never returns a costlier estimate than H0.
inline LmReport refine_lm_report(const Homography& H0, std::span<const Point2> model,
                                 std::span<const Point2> observed, int max_iter = 100) {
  if (!H0.m.allFinite()) throw DegenerateError("initial homography is not finite");
  LmReport rep{H0, 0.0, 0.0, 0, false};
  double cost = reprojection_cost(H0, model, observed);
  rep.initial_cost = cost;
  rep.final_cost = cost;
  if (!std::isfinite(cost)) {
    rep.warning = true;
    return rep;
  }
  Eigen::Matrix<double, 9, 1> h = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(
      Eigen::Matrix<double, 3, 3, Eigen::RowMajor>(H0.m).data());
  double lambda = 1e-3;
  const auto n = model.size();
  for (int it = 0; it < max_iter; ++it) {
    rep.iterations = it + 1;
    Eigen::Matrix<double, 9, 9> JtJ = Eigen::Matrix<double, 9, 9>::Zero();
    Eigen::Matrix<double, 9, 1> Jtr = Eigen::Matrix<double, 9, 1>::Zero();
    for (std::size_t k = 0; k < n; ++k) {
      const double x = model[k].x(), y = model[k].y();
      const double a = h(0) * x + h(1) * y + h(2);
      const double b = h(3) * x + h(4) * y + h(5);
      const double c = h(6) * x + h(7) * y + h(8);
      const double rx = observed[k].x() - a / c;
      const double ry = observed[k].y() - b / c;
      Eigen::Matrix<double, 2, 9> J;  // Jacobian of the projection
      J << x / c, y / c, 1 / c, 0, 0, 0, -a * x / (c * c), -a * y / (c * c), -a / (c * c),
          0, 0, 0, x / c, y / c, 1 / c, -b * x / (c * c), -b * y / (c * c), -b / (c * c);
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * Eigen::Vector2d(rx, ry);
    }
    bool accepted = false;
    while (lambda < 1e16) {
      Eigen::Matrix<double, 9, 9> Aug = JtJ;
      const double scale = JtJ.diagonal().maxCoeff();
      Aug.diagonal().array() += lambda * (JtJ.diagonal().array() + 1e-12 * scale);
      const Eigen::Matrix<double, 9, 1> delta = Aug.ldlt().solve(Jtr);
      Eigen::Matrix<double, 9, 1> trial = h + delta;
      trial /= trial.norm();
      if (trial(8) < 0) trial = -trial;
      Eigen::Matrix3d Ht;
      Ht << trial(0), trial(1), trial(2), trial(3), trial(4), trial(5), trial(6), trial(7), trial(8);
      const double tcost = reprojection_cost(Homography(Ht), model, observed);
      if (!std::isfinite(tcost)) {
        rep.warning = true;
        lambda *= 10;
        continue;
      }
      if (tcost < cost) {
        const double rel = (cost - tcost) / std::max(cost, 1e-300);
        const double step = (trial - h).norm();
        h = trial;
        cost = tcost;
        lambda = std::max(lambda / 10, 1e-12);
        accepted = true;
        if (rel < 1e-12 || step < 1e-12) lambda = 1e16;  // converged
        break;
      }
      lambda *= 10;
    }
    if (!accepted || lambda >= 1e16 || cost == 0.0) break;
  }
  Eigen::Matrix3d Hf;
  Hf << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  rep.H = Homography(Hf);
  rep.final_cost = cost;
  return rep;
}

inline Homography refine_lm(const Homography& H0, std::span<const Point2> model,
                            std::span<const Point2> observed) {
  return refine_lm_report(H0, model, observed).H;
}

struct GeometricFit {
  Homography H;
  double rms = 0.0;
};

/// RMS distance between the observed lattice and the optimally fitted
/// homography image of the model lattice.
inline GeometricFit geometric_fit(const VertexGrid& model, const VertexGrid& observed) {
  if (model.rows() != observed.rows() || model.cols() != observed.cols()) {
    throw ConfigError("model and observed grids differ in shape");
  }
  const Homography H0 = fit_dlt(model.points(), observed.points());
  const Homography H = refine_lm(H0, model.points(), observed.points());
  const double cost = reprojection_cost(H, model.points(), observed.points());
  return {H, std::sqrt(cost / static_cast<double>(model.size()))};
}

inline double geometric_error(const VertexGrid& model, const VertexGrid& observed) {
  return geometric_fit(model, observed).rms;
}

/// RMS of (xi, eta) . (p - v) over a window of whole pixels around each
/// vertex, with gradients divided by the window's mean magnitude.
inline double photometric_error(std::span<const Point2> vertices, const GradientField& grads, int window = 5) {
  if (window < 1 || window % 2 == 0) throw ConfigError("photometric window must be odd and positive");
  const int hw = window / 2;
  double sum = 0.0;
  long count = 0;
  for (const auto& v : vertices) {
    const int cx = static_cast<int>(std::lround(v.x()));
    const int cy = static_cast<int>(std::lround(v.y()));
    double mean_rho = 0.0;
    int inside = 0;
    for (int dy = -hw; dy <= hw; ++dy) {
      for (int dx = -hw; dx <= hw; ++dx) {
        if (!grads.xi.contains(cx + dx, cy + dy)) continue;
        mean_rho += grads.rho(cx + dx, cy + dy);
        ++inside;
      }
    }
    count += window * window;
    if (inside == 0 || !(mean_rho > 0.0)) continue;
    mean_rho /= inside;
    for (int dy = -hw; dy <= hw; ++dy) {
      for (int dx = -hw; dx <= hw; ++dx) {
        if (!grads.xi.contains(cx + dx, cy + dy)) continue;
        const Point2 p(cx + dx, cy + dy);
        const double r = grads.at(cx + dx, cy + dy).dot(p - v) / mean_rho;
        sum += r * r;
      }
    }
  }
  return count > 0 ? std::sqrt(sum / static_cast<double>(count)) : 0.0;
}

}  // namespace tofgrid
