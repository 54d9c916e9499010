#pragma once

// Board-centred, board-aligned Euclidean frame.

#include "tofgrid/core.hpp"
#include "tofgrid/imageio.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>

namespace tofgrid {

/// Centroid of the pixel grid weighted by (1 - B) after min/max
/// normalisation of the non-null samples. Dark squares dominate.
inline Point2 board_centroid(const MaskedImage& b) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : b.samples.pixels()) {
    if (is_null(v)) continue;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (!(lo <= hi)) throw NoBoardError("mask has no board pixels");
  const double span = hi - lo;
  double total = 0.0;
  Point2 acc = Point2::Zero();
  for (int y = 0; y < b.height(); ++y) {
    for (int x = 0; x < b.width(); ++x) {
      const double v = b.samples(x, y);
      if (is_null(v)) continue;
      const double w = span > 0.0 ? 1.0 - (v - lo) / span : 1.0;
      total += w;
      acc += w * Point2(x, y);
    }
  }
  if (total < 1e-9) throw NoBoardError("centroid weight vanishes");
  return acc / total;
}

/// to_local(p) = R(-phi) (p - centre).
class LocalFrame {
 public:
  LocalFrame() = default;
  LocalFrame(const Point2& centre, double phi) : centre_(centre), phi_(phi) {}

  const Point2& centre() const noexcept { return centre_; }
  double phi() const noexcept { return phi_; }

  Point2 to_local(const Point2& p) const {
    const double c = std::cos(phi_), s = std::sin(phi_);
    const Point2 d = p - centre_;
    return Point2(c * d.x() + s * d.y(), -s * d.x() + c * d.y());
  }

  Point2 to_image(const Point2& q) const {
    const double c = std::cos(phi_), s = std::sin(phi_);
    return Point2(c * q.x() - s * q.y(), s * q.x() + c * q.y()) + centre_;
  }

  /// Homogeneous matrix E with local = E * image.
  Eigen::Matrix3d matrix() const {
    const double c = std::cos(phi_), s = std::sin(phi_);
    Eigen::Matrix3d rot;
    rot << c, s, 0, -s, c, 0, 0, 0, 1;
    Eigen::Matrix3d tr = Eigen::Matrix3d::Identity();
    tr(0, 2) = -centre_.x();
    tr(1, 2) = -centre_.y();
    return rot * tr;
  }

  /// Local-frame line transported into image coordinates (row vector * E).
  HomLine line_to_image(const HomLine& local) const {
    return HomLine((local.h.transpose() * matrix()).transpose());
  }

 private:
  Point2 centre_ = Point2::Zero();
  double phi_ = 0.0;
};

inline LocalFrame build_frame(const Point2& centroid, double phi) {
  if (!std::isfinite(phi) || !centroid.allFinite()) throw DegenerateError("frame needs finite inputs");
  return LocalFrame(centroid, phi);
}

}  // namespace tofgrid
