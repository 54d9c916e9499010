#pragma once

// Gradient clustering: every pixel gets one of three labels, lambda, mu or
// none, by either the double-angle principal-component method or the RANSAC
// two-line method.

#include "tofgrid/core.hpp"
#include "tofgrid/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace tofgrid {

enum class Label : std::uint8_t { none = 0, lambda = 1, mu = 2 };
using LabelMap = Image<Label>;

enum class ClusterMethod { pca, ransac };

inline const char* to_string(ClusterMethod m) { return m == ClusterMethod::pca ? "pca" : "ransac"; }

/// Gradients below this magnitude carry no orientation.
inline constexpr double kRhoEpsilon = std::numeric_limits<double>::epsilon();

struct DoubleAnglePoint {
  double sigma = 0.0;
  double tau = 0.0;
  double norm() const { return std::hypot(sigma, tau); }
};

/// (xi, eta) = rho (cos t, sin t)  ->  rho (cos 2t, sin 2t).
inline DoubleAnglePoint double_angle(double xi, double eta) {
  const double rho = std::hypot(xi, eta);
  if (!(rho > kRhoEpsilon)) throw DegenerateError("double-angle map needs a non-zero gradient");
  return {(xi * xi - eta * eta) / rho, 2.0 * xi * eta / rho};
}

struct ClusterModel {
  ClusterMethod method = ClusterMethod::pca;
  /// pca: unit vector (cos 2phi, sin 2phi).
  Point2 axis = Point2::UnitX();
  /// ransac: unit normals of the two sampled gradient lines.
  Point2 normal_lambda = Point2::UnitY();
  Point2 normal_mu = -Point2::UnitX();
  double pi_min = 0.0;
  /// Board orientation phi (radians): lambda gradients point along phi.
  double phi = 0.0;
};

/// Dominant eigenvector of the uncentred second-moment matrix of the
/// double-angle points, with non-negative first component.
inline Point2 principal_axis(std::span<const DoubleAnglePoint> points) {
  double a = 0.0, b = 0.0, c = 0.0;
  for (const auto& p : points) {
    a += p.sigma * p.sigma;
    b += p.sigma * p.tau;
    c += p.tau * p.tau;
  }
  const double mean = 0.5 * (a + c);
  const double rad = std::hypot(0.5 * (a - c), b);
  const double l1 = mean + rad;
  const double l2 = mean - rad;
  if (!(l1 > 0.0) || l1 < 1.05 * l2) {
    throw DegenerateError("gradient distribution has no dominant orientation");
  }
  const double angle = 0.5 * std::atan2(2.0 * b, a - c);
  Point2 axis(std::cos(angle), std::sin(angle));
  if (axis.x() < 0.0 || (axis.x() == 0.0 && axis.y() < 0.0)) axis = -axis;
  if (std::abs(axis.x()) < 1e-15) axis.x() = 0.0;
  return axis;
}

/// pi_min = fraction * (percentile of rho over pixels with non-zero gradient).
inline double pi_min_from_percentile(const GradientField& g, double fraction, double percentile) {
  std::vector<double> rho;
  rho.reserve(g.xi.size());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const double r = g.rho(x, y);
      if (r > kRhoEpsilon) rho.push_back(r);
    }
  }
  if (rho.empty()) throw DegenerateError("image has no gradients");
  const auto k = static_cast<std::size_t>(
      std::clamp(percentile, 0.0, 1.0) * static_cast<double>(rho.size() - 1) + 0.5);
  std::nth_element(rho.begin(), rho.begin() + static_cast<std::ptrdiff_t>(k), rho.end());
  return fraction * rho[k];
}

inline std::vector<DoubleAnglePoint> double_angle_points(const GradientField& g) {
  std::vector<DoubleAnglePoint> pts;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (g.rho(x, y) > kRhoEpsilon) pts.push_back(double_angle(g.xi(x, y), g.eta(x, y)));
    }
  }
  return pts;
}

inline ClusterModel fit_pca(const GradientField& g, double pi_min) {
  const auto pts = double_angle_points(g);
  if (pts.size() < 2) throw DegenerateError("too few gradients to cluster");
  ClusterModel model;
  model.method = ClusterMethod::pca;
  model.axis = principal_axis(pts);
  model.pi_min = pi_min;
  model.phi = 0.5 * std::atan2(model.axis.y(), model.axis.x());
  return model;
}

inline Label label_pca(double xi, double eta, const ClusterModel& model) {
  if (!(std::hypot(xi, eta) > kRhoEpsilon)) return Label::none;
  const auto d = double_angle(xi, eta);
  const double proj = d.sigma * model.axis.x() + d.tau * model.axis.y();
  if (proj >= model.pi_min) return Label::lambda;
  if (proj <= -model.pi_min) return Label::mu;
  return Label::none;
}

inline LabelMap classify_pca(const GradientField& g, const ClusterModel& model) {
  LabelMap labels(g.width(), g.height(), Label::none);
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) labels(x, y) = label_pca(g.xi(x, y), g.eta(x, y), model);
  }
  return labels;
}

/// Slab rule: lambda if inside the lambda slab only, mu if inside the mu slab
/// only; points in both slabs or neither are unlabelled.
inline Label label_slab(const Point2& grad, const Point2& normal_lambda, const Point2& normal_mu,
                        double pi_min) {
  if (!(grad.norm() > kRhoEpsilon)) return Label::none;
  const bool in_l = std::abs(normal_lambda.dot(grad)) <= pi_min;
  const bool in_m = std::abs(normal_mu.dot(grad)) <= pi_min;
  if (in_l && !in_m) return Label::lambda;
  if (in_m && !in_l) return Label::mu;
  return Label::none;
}

/// Board angle from the mean double-angle vector of lambda-labelled pixels.
inline double mean_lambda_phi(const GradientField& g, const LabelMap& labels) {
  double s = 0.0, t = 0.0;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (labels(x, y) != Label::lambda) continue;
      const auto d = double_angle(g.xi(x, y), g.eta(x, y));
      s += d.sigma;
      t += d.tau;
    }
  }
  if (s == 0.0 && t == 0.0) throw DegenerateError("no lambda-labelled gradients");
  return 0.5 * std::atan2(t, s);
}

struct RansacResult {
  LabelMap labels;
  ClusterModel model;
};

/// RANSAC clustering. Candidate gradient pairs are drawn from pixels whose
/// magnitude exceeds pi_min (falling back to all non-zero gradients); the
/// labelling with the most labelled pixels wins, earliest on ties.
inline RansacResult classify_ransac(const GradientField& g, double pi_min, int iterations,
                                    std::uint64_t seed) {
  if (iterations < 1) throw ConfigError("ransac iterations must be >= 1");
  std::vector<Point2> all;
  std::vector<Point2> strong;
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      const Point2 v = g.at(x, y);
      const double r = v.norm();
      if (r > kRhoEpsilon) {
        all.push_back(v);
        if (r > pi_min) strong.push_back(v);
      }
    }
  }
  if (all.size() < 2) throw DegenerateError("too few gradients for ransac");
  const auto& pool = strong.size() >= 2 ? strong : all;

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const double min_sin = std::sin(std::numbers::pi / 180.0);

  long best_count = -1;
  Point2 best_l, best_m;
  int accepted = 0;
  const int max_draws = 100 * iterations + 1000;
  for (int draw = 0; draw < max_draws && accepted < iterations; ++draw) {
    const std::size_t i = pick(rng);
    const std::size_t j = pick(rng);
    if (i == j) continue;
    const Point2 a = pool[i].normalized();
    const Point2 b = pool[j].normalized();
    if (std::abs(a.x() * b.y() - a.y() * b.x()) < min_sin) continue;  // near-parallel pair
    ++accepted;
    const Point2 nl(-a.y(), a.x());
    const Point2 nm(-b.y(), b.x());
    long count = 0;
    for (const auto& v : all) count += label_slab(v, nl, nm, pi_min) != Label::none;
    if (count > best_count) {
      best_count = count;
      best_l = nl;
      best_m = nm;
    }
  }
  if (best_count < 0) throw DegenerateError("ransac found no non-degenerate gradient pair");

  RansacResult out{LabelMap(g.width(), g.height(), Label::none), ClusterModel{}};
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) out.labels(x, y) = label_slab(g.at(x, y), best_l, best_m, pi_min);
  }
  out.model.method = ClusterMethod::ransac;
  out.model.normal_lambda = best_l;
  out.model.normal_mu = best_m;
  out.model.pi_min = pi_min;
  out.model.axis = Point2(std::cos(2.0 * std::atan2(-best_l.x(), best_l.y())),
                          std::sin(2.0 * std::atan2(-best_l.x(), best_l.y())));
  out.model.phi = mean_lambda_phi(g, out.labels);
  return out;
}

struct LabelCounts {
  long lambda = 0;
  long mu = 0;
  long none = 0;
};

inline LabelCounts count_labels(const LabelMap& labels) {
  LabelCounts c;
  for (Label l : labels.pixels()) {
    if (l == Label::lambda) ++c.lambda;
    else if (l == Label::mu) ++c.mu;
    else ++c.none;
  }
  return c;
}

}  // namespace tofgrid
