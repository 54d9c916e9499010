#pragma once

// Cartesian Hough transform over labelled local-frame points. A point (x, y)
// becomes the line u(v) = u0 + x - y * (v - v0) * slope_per_bin in the
// (u, v) accumulator; the mu transform swaps x and y.

#include "tofgrid/cluster.hpp"
#include "tofgrid/core.hpp"

#include <cmath>
#include <vector>

namespace tofgrid {

struct HoughGeometry {
  int u1 = 2;
  int v1 = 2;
  /// Slope represented by one bin of v.
  double slope_per_bin = 1.0;

  double u0() const noexcept { return 0.5 * u1; }
  double v0() const noexcept { return 0.5 * v1; }

  /// Square array sized from the image: u1 = v1 = round(scale * (X + Y) / 2),
  /// with the v range spanning slopes (-1, 1).
  static HoughGeometry for_image(int width, int height, double scale = 1.5) {
    const int n = static_cast<int>(std::lround(scale * 0.5 * (width + height)));
    if (n < 2) throw ConfigError("hough array too small");
    return HoughGeometry{n, n, 2.0 / n};
  }
};

inline double hough_u(double x, double y, double v, Label label, const HoughGeometry& geom) {
  if (label == Label::mu) std::swap(x, y);
  return geom.u0() + x - y * (v - geom.v0()) * geom.slope_per_bin;
}

class HoughArray {
 public:
  HoughArray() = default;
  explicit HoughArray(const HoughGeometry& geom)
      : geom_(geom), bins_(static_cast<std::size_t>(geom.u1 + 1) * static_cast<std::size_t>(geom.v1 + 1), 0.0) {
    if (geom.u1 < 2 || geom.v1 < 2) throw ConfigError("hough array needs u1, v1 >= 2");
  }

  const HoughGeometry& geometry() const noexcept { return geom_; }
  int columns() const noexcept { return geom_.u1 + 1; }
  int rows() const noexcept { return geom_.v1 + 1; }

  double operator()(int u, int v) const { return bins_[index(u, v)]; }
  double& operator()(int u, int v) { return bins_[index(u, v)]; }
  std::span<const double> bins() const noexcept { return bins_; }

  double total() const {
    double t = 0.0;
    for (double b : bins_) t += b;
    return t;
  }

  /// Adds unit mass at (u, v), shared bilinearly between the four nearest
  /// bins. Returns false (and adds nothing) outside [0, u1] x [0, v1].
  bool splat(double u, double v) {
    if (!(u >= 0.0 && v >= 0.0 && u <= geom_.u1 && v <= geom_.v1)) return false;
    int iu = static_cast<int>(u);
    int iv = static_cast<int>(v);
    if (iu == geom_.u1) --iu;
    if (iv == geom_.v1) --iv;
    const double au = u - iu;
    const double av = v - iv;
    bins_[index(iu, iv)] += (1 - au) * (1 - av);
    bins_[index(iu + 1, iv)] += au * (1 - av);
    bins_[index(iu, iv + 1)] += (1 - au) * av;
    bins_[index(iu + 1, iv + 1)] += au * av;
    return true;
  }

  /// Bilinear read; zero outside the array.
  double sample(double u, double v) const {
    if (!(u >= 0.0 && v >= 0.0 && u <= geom_.u1 && v <= geom_.v1)) return 0.0;
    int iu = static_cast<int>(u);
    int iv = static_cast<int>(v);
    if (iu == geom_.u1) --iu;
    if (iv == geom_.v1) --iv;
    const double au = u - iu;
    const double av = v - iv;
    const double* row0 = &bins_[index(0, iv)];
    const double* row1 = row0 + columns();
    return (1 - av) * ((1 - au) * row0[iu] + au * row0[iu + 1]) +
           av * ((1 - au) * row1[iu] + au * row1[iu + 1]);
  }

  void scale(double k) {
    for (double& b : bins_) b *= k;
  }

  void add(const HoughArray& other) {
    for (std::size_t k = 0; k < bins_.size(); ++k) bins_[k] += other.bins_[k];
  }

 private:
  std::size_t index(int u, int v) const noexcept {
    return static_cast<std::size_t>(v) * static_cast<std::size_t>(geom_.u1 + 1) +
           static_cast<std::size_t>(u);
  }

  HoughGeometry geom_;
  std::vector<double> bins_;
};

struct LabelledPoint {
  Point2 local;
  Label label = Label::none;
};

struct HoughPair {
  HoughArray lambda;
  HoughArray mu;
  long samples_in = 0;  // splats that landed inside an array

  const HoughArray& of(Label l) const { return l == Label::mu ? mu : lambda; }
};

/// Rasterises every labelled point's Hough line from (s, 0) to (t, v1) with
/// floor(w1) + 1 evenly spaced unit splats.
inline void accumulate_point(HoughArray& h, const LabelledPoint& p, long& samples_in) {
  const auto& geom = h.geometry();
  const double s = hough_u(p.local.x(), p.local.y(), 0.0, p.label, geom);
  const double t = hough_u(p.local.x(), p.local.y(), geom.v1, p.label, geom);
  const double w1 = std::hypot(t - s, static_cast<double>(geom.v1));
  const int steps = static_cast<int>(std::floor(w1));
  for (int w = 0; w <= steps; ++w) {
    const double a = w / w1;
    samples_in += h.splat((1 - a) * s + a * t, a * geom.v1);
  }
}

inline HoughPair accumulate(std::span<const LabelledPoint> points, const HoughGeometry& geom) {
  HoughPair out{HoughArray(geom), HoughArray(geom), 0};
  for (const auto& p : points) {
    if (p.label == Label::lambda) accumulate_point(out.lambda, p, out.samples_in);
    else if (p.label == Label::mu) accumulate_point(out.mu, p, out.samples_in);
  }
  return out;
}

/// Labelled pixels mapped into the local frame.
template <typename Frame>
std::vector<LabelledPoint> labelled_points(const LabelMap& labels, const Frame& frame) {
  std::vector<LabelledPoint> pts;
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const Label l = labels(x, y);
      if (l != Label::none) pts.push_back({frame.to_local(Point2(x, y)), l});
    }
  }
  return pts;
}

/// Accumulator rendered for inspection: bins scaled so the maximum hits maxval.
inline Image<double> hough_to_image(const HoughArray& h, double maxval = 255.0) {
  Image<double> img(h.columns(), h.rows(), 0.0);
  double peak = 0.0;
  for (double b : h.bins()) peak = std::max(peak, b);
  for (int v = 0; v < h.rows(); ++v) {
    for (int u = 0; u < h.columns(); ++u) img(u, v) = peak > 0 ? maxval * h(u, v) / peak : 0.0;
  }
  return img;
}

}  // namespace tofgrid
