#pragma once

// Depth gating, perimeter erosion and central-difference gradients.

#include "tofgrid/core.hpp"
#include "tofgrid/imageio.hpp"

#include <cmath>
#include <optional>

namespace tofgrid {

/// Per-pixel image gradient (xi, eta), positive where intensity increases
/// with x (resp. y).
struct GradientField {
  Image<double> xi;
  Image<double> eta;

  GradientField() = default;
  GradientField(int width, int height) : xi(width, height, 0.0), eta(width, height, 0.0) {}

  int width() const noexcept { return xi.width(); }
  int height() const noexcept { return xi.height(); }

  Point2 at(int x, int y) const { return Point2(xi(x, y), eta(x, y)); }
  double rho(int x, int y) const { return std::hypot(xi(x, y), eta(x, y)); }

  /// Bilinear sample; positions outside the raster contribute zero.
  Point2 sample(const Point2& p) const {
    const double fx = std::floor(p.x());
    const double fy = std::floor(p.y());
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = p.x() - fx;
    const double ay = p.y() - fy;
    Point2 acc = Point2::Zero();
    const double w[4] = {(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
    const int dx[4] = {0, 1, 0, 1};
    const int dy[4] = {0, 0, 1, 1};
    for (int k = 0; k < 4; ++k) {
      const int x = x0 + dx[k];
      const int y = y0 + dy[k];
      if (w[k] != 0.0 && xi.contains(x, y)) acc += w[k] * at(x, y);
    }
    return acc;
  }

  /// Nearest-pixel sample; zero outside the raster.
  Point2 sample_nearest(const Point2& p) const {
    const int x = static_cast<int>(std::lround(p.x()));
    const int y = static_cast<int>(std::lround(p.y()));
    return xi.contains(x, y) ? at(x, y) : Point2::Zero();
  }
};

/// Keeps A where d0 < D < d1; invalid depth and the interval bounds are null.
inline MaskedImage segment_depth(const AmplitudeImage& amplitude, const DepthImage& depth,
                                 double d0, double d1) {
  if (!(d0 < d1)) throw ConfigError("depth limits require d0 < d1");
  if (!amplitude.samples.same_size(depth.samples)) {
    throw ConfigError("amplitude and depth images differ in size");
  }
  MaskedImage out{Image<double>(amplitude.width(), amplitude.height(), kNull)};
  auto a = amplitude.samples.pixels();
  auto d = depth.samples.pixels();
  auto b = out.samples.pixels();
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!is_null(d[k]) && d0 < d[k] && d[k] < d1) b[k] = a[k];
  }
  return out;
}

/// Amplitude-only mode: no gating.
inline MaskedImage segment_none(const AmplitudeImage& amplitude) {
  return MaskedImage{amplitude.samples};
}

/// Square (Chebyshev) erosion of the non-null support. Pixels outside the
/// raster do not count as null.
inline MaskedImage erode_mask(const MaskedImage& in, int radius) {
  if (radius < 0) throw ConfigError("erosion radius must be non-negative");
  if (radius == 0) return in;
  const int w = in.width();
  const int h = in.height();
  // Separable: a horizontal then a vertical run-length test.
  Image<std::uint8_t> horiz(w, h, 0);
  for (int y = 0; y < h; ++y) {
    int run = 0;  // consecutive valid pixels ending at x
    std::vector<int> left(static_cast<std::size_t>(w));
    for (int x = 0; x < w; ++x) {
      run = is_null(in.samples(x, y)) ? 0 : run + 1;
      left[static_cast<std::size_t>(x)] = run;
    }
    for (int x = 0; x < w; ++x) {
      const int hi = std::min(w - 1, x + radius);
      const int lo = std::max(0, x - radius);
      horiz(x, y) = left[static_cast<std::size_t>(hi)] >= hi - lo + 1;
    }
  }
  MaskedImage out{Image<double>(w, h, kNull)};
  for (int x = 0; x < w; ++x) {
    std::vector<int> up(static_cast<std::size_t>(h));
    int run = 0;
    for (int y = 0; y < h; ++y) {
      run = horiz(x, y) ? run + 1 : 0;
      up[static_cast<std::size_t>(y)] = run;
    }
    for (int y = 0; y < h; ++y) {
      const int hi = std::min(h - 1, y + radius);
      const int lo = std::max(0, y - radius);
      if (up[static_cast<std::size_t>(hi)] >= hi - lo + 1) out.samples(x, y) = in.samples(x, y);
    }
  }
  return out;
}

/// Central differences with kernel (-1/2, 0, 1/2), no pre-smoothing. Any null
/// or out-of-range operand yields a zero gradient at that pixel.
inline GradientField gradient(const MaskedImage& b) {
  const int w = b.width();
  const int h = b.height();
  GradientField g(w, h);
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double c = b.samples(x, y);
      const double l = b.samples(x - 1, y);
      const double r = b.samples(x + 1, y);
      const double u = b.samples(x, y - 1);
      const double d = b.samples(x, y + 1);
      if (is_null(c) || is_null(l) || is_null(r) || is_null(u) || is_null(d)) continue;
      g.xi(x, y) = 0.5 * (r - l);
      g.eta(x, y) = 0.5 * (d - u);
    }
  }
  return g;
}

inline GradientField gradient(const AmplitudeImage& a) { return gradient(segment_none(a)); }

}  // namespace tofgrid
