#pragma once

// Sweep-line analysis of the two Hough accumulators: every line from (0, s)
// to (u1, t) is sampled into a 1-D histogram, its runs of non-zero values are
// scored, and the line holding the n best-scoring runs is kept. The pencil
// with l lines and the pencil with m lines are then matched to the lambda and
// mu labels by total score.

#include "tofgrid/core.hpp"
#include "tofgrid/frame.hpp"
#include "tofgrid/hough.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace tofgrid {

struct ClusterRun {
  int a = 0;
  int b = 0;
  double score = 0.0;     // mean of h over [a, b]
  double centroid = 0.0;  // mass centroid, sample index units
};

struct SweepHistogram {
  double s = 0.0;
  double t = 0.0;
  double w1 = 0.0;
  std::vector<double> h;
};

inline double sweep_length(const HoughGeometry& geom, double s, double t) {
  return std::hypot(static_cast<double>(geom.u1), t - s);
}

/// Samples H at floor(w1) + 1 unit-spaced points along (0, s) -> (u1, t).
inline void sample_sweep(const HoughArray& H, double s, double t, std::vector<double>& out) {
  const auto& geom = H.geometry();
  const double w1 = sweep_length(geom, s, t);
  const int steps = static_cast<int>(std::floor(w1));
  out.resize(static_cast<std::size_t>(steps) + 1);
  const double du = geom.u1 / w1;
  const double dv = (t - s) / w1;
  for (int w = 0; w <= steps; ++w) out[static_cast<std::size_t>(w)] = H.sample(w * du, s + w * dv);
}

inline SweepHistogram sweep_histogram(const HoughArray& H, double s, double t) {
  const auto& geom = H.geometry();
  if (s < 0 || t < 0 || s > geom.v1 || t > geom.v1) throw ConfigError("sweep endpoints outside [0, v1]");
  SweepHistogram out{s, t, sweep_length(geom, s, t), {}};
  sample_sweep(H, s, t, out.h);
  return out;
}

/// Maximal runs with h > eps. The centroid offset is measured from a.
inline std::vector<ClusterRun> find_runs(std::span<const double> h, double eps) {
  std::vector<ClusterRun> runs;
  const int n = static_cast<int>(h.size());
  int w = 0;
  while (w < n) {
    if (!(h[static_cast<std::size_t>(w)] > eps)) {
      ++w;
      continue;
    }
    ClusterRun run;
    run.a = w;
    double mass = 0.0, moment = 0.0;
    while (w < n && h[static_cast<std::size_t>(w)] > eps) {
      mass += h[static_cast<std::size_t>(w)];
      moment += h[static_cast<std::size_t>(w)] * (w - run.a);
      ++w;
    }
    run.b = w - 1;
    run.score = mass / (1 + run.b - run.a);
    run.centroid = run.a + moment / mass;
    runs.push_back(run);
  }
  return runs;
}

/// Sum of the n highest run scores, or zero when there are fewer than n runs.
inline double total_score(std::span<const ClusterRun> runs, int n) {
  if (n < 1) throw ConfigError("pencil size must be >= 1");
  if (static_cast<int>(runs.size()) < n) return 0.0;
  std::vector<double> scores;
  scores.reserve(runs.size());
  for (const auto& r : runs) scores.push_back(r.score);
  std::partial_sort(scores.begin(), scores.begin() + n, scores.end(), std::greater<>());
  double sum = 0.0;
  for (int k = 0; k < n; ++k) sum += scores[static_cast<std::size_t>(k)];
  return sum;
}

/// The n best runs of a histogram, ordered by centroid.
inline std::vector<ClusterRun> best_runs(std::vector<ClusterRun> runs, int n) {
  std::stable_sort(runs.begin(), runs.end(),
                   [](const ClusterRun& x, const ClusterRun& y) { return x.score > y.score; });
  runs.resize(std::min<std::size_t>(runs.size(), static_cast<std::size_t>(n)));
  std::sort(runs.begin(), runs.end(),
            [](const ClusterRun& x, const ClusterRun& y) { return x.centroid < y.centroid; });
  return runs;
}

/// Optimal sweep-line for one accumulator and one pencil size.
struct SweepResult {
  int n = 0;
  int s = 0;
  int t = 0;
  double w1 = 0.0;
  double score = 0.0;
  std::vector<ClusterRun> runs;     // n runs, ordered by centroid
  std::vector<Point2> hough_points; // (u*, v*) per run
};

namespace detail {

struct SweepCandidate {
  double score = 0.0;
  int s = -1;
  int t = -1;
};

/// Higher score first; ties prefer sweeps nearer the midline, then smaller s,
/// then smaller t.
inline bool better(const SweepCandidate& c, const SweepCandidate& best, double v0) {
  if (best.s < 0) return true;
  if (c.score != best.score) return c.score > best.score;
  const double dc = std::abs(c.s - v0) + std::abs(c.t - v0);
  const double db = std::abs(best.s - v0) + std::abs(best.t - v0);
  if (dc != db) return dc < db;
  if (c.s != best.s) return c.s < best.s;
  return c.t < best.t;
}

inline SweepResult finish(const HoughArray& H, int n, const SweepCandidate& c, double run_fraction) {
  const auto& geom = H.geometry();
  SweepResult r;
  r.n = n;
  r.s = c.s;
  r.t = c.t;
  r.score = c.score;
  std::vector<double> h;
  sample_sweep(H, c.s, c.t, h);
  r.w1 = sweep_length(geom, c.s, c.t);
  const double peak = *std::max_element(h.begin(), h.end());
  r.runs = best_runs(find_runs(h, run_fraction * peak), n);
  for (const auto& run : r.runs) {
    const double a = run.centroid / r.w1;
    r.hough_points.emplace_back(a * geom.u1, (1 - a) * c.s + a * c.t);
  }
  return r;
}

}  // namespace detail

/// Exhaustive integer (s, t) search for several pencil sizes at once; the
/// per-sweep run finding is shared. Results follow the order of `sizes`.
inline std::vector<SweepResult> best_sweeps(const HoughArray& H, std::span<const int> sizes,
                                            double run_fraction) {
  const auto& geom = H.geometry();
  for (int n : sizes) {
    if (n < 1) throw ConfigError("pencil size must be >= 1");
  }
  std::vector<detail::SweepCandidate> best(sizes.size());
  std::vector<double> h;
  std::vector<double> scores;
  for (int s = 0; s <= geom.v1; ++s) {
    for (int t = 0; t <= geom.v1; ++t) {
      sample_sweep(H, s, t, h);
      const double peak = *std::max_element(h.begin(), h.end());
      if (!(peak > 0.0)) continue;
      const double eps = run_fraction * peak;
      // Inline run scoring: only the means are needed here.
      scores.clear();
      const std::size_t len = h.size();
      for (std::size_t w = 0; w < len;) {
        if (!(h[w] > eps)) {
          ++w;
          continue;
        }
        double mass = 0.0;
        const std::size_t a = w;
        while (w < len && h[w] > eps) mass += h[w++];
        scores.push_back(mass / static_cast<double>(w - a));
      }
      std::sort(scores.begin(), scores.end(), std::greater<>());
      for (std::size_t k = 0; k < sizes.size(); ++k) {
        const auto n = static_cast<std::size_t>(sizes[k]);
        if (scores.size() < n) continue;
        double sum = 0.0;
        for (std::size_t q = 0; q < n; ++q) sum += scores[q];
        const detail::SweepCandidate c{sum, s, t};
        if (detail::better(c, best[k], geom.v0())) best[k] = c;
      }
    }
  }
  std::vector<SweepResult> out;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (best[k].s < 0 || !(best[k].score > 0.0)) {
      SweepResult empty;
      empty.n = sizes[k];
      out.push_back(empty);
    } else {
      out.push_back(detail::finish(H, sizes[k], best[k], run_fraction));
    }
  }
  return out;
}

/// Optimal sweep for a single pencil size; throws when no sweep holds n runs.
inline SweepResult best_sweep(const HoughArray& H, int n, double run_fraction) {
  const int sizes[1] = {n};
  auto r = best_sweeps(H, sizes, run_fraction);
  if (!(r[0].score > 0.0)) throw NoPencilError("no sweep-line holds " + std::to_string(n) + " clusters");
  return std::move(r[0]);
}

/// Which label carries the pencil with fewer lines.
enum class Correspondence { lambda_is_L, mu_is_L };

/// (L, M) <-> (lambda, mu) iff S^l_lambda + S^m_mu > S^l_mu + S^m_lambda.
inline Correspondence resolve_pencils(double l_lambda, double m_mu, double l_mu, double m_lambda) {
  const double direct = l_lambda + m_mu;
  const double swapped = l_mu + m_lambda;
  if (direct == 0.0 && swapped == 0.0) throw NoPencilError("no pencil pair found");
  return direct > swapped ? Correspondence::lambda_is_L : Correspondence::mu_is_L;
}

/// Local-frame line for Hough point (u*, v*): lambda lines x = alpha + beta y,
/// mu lines y = alpha + beta x.
inline HomLine hough_line(const Point2& hp, Label label, const HoughGeometry& geom) {
  const double alpha = hp.x() - geom.u0();
  const double beta = (hp.y() - geom.v0()) * geom.slope_per_bin;
  return label == Label::mu ? HomLine(beta, -1.0, alpha) : HomLine(-1.0, beta, alpha);
}

/// Image-space pencil from an optimal sweep, lines ordered by centroid.
inline Pencil pencil_lines(const SweepResult& r, Label label, const HoughGeometry& geom,
                           const LocalFrame& frame) {
  Pencil p;
  for (const auto& hp : r.hough_points) p.lines.push_back(frame.line_to_image(hough_line(hp, label, geom)));
  const HomLine first = hough_line(Point2(0.0, r.s), label, geom);
  const HomLine last = hough_line(Point2(geom.u1, r.t), label, geom);
  const Eigen::Vector3d apex_local = first.h.cross(last.h);
  p.apex = HomPoint(frame.matrix().inverse() * apex_local);
  return p;
}

/// All l x m intersections v_ij = L_i x M_j, dehomogenised. Vertices at
/// infinity or outside the doubled image box are a geometric failure.
inline VertexGrid grid_vertices(const Pencil& L, const Pencil& M, int width, int height) {
  VertexGrid grid(static_cast<int>(L.lines.size()), static_cast<int>(M.lines.size()));
  for (int i = 0; i < grid.rows(); ++i) {
    for (int j = 0; j < grid.cols(); ++j) {
      const Eigen::Vector3d v = L.lines[static_cast<std::size_t>(i)].h.cross(M.lines[static_cast<std::size_t>(j)].h);
      if (std::abs(v.z()) <= 1e-12 * v.head<2>().norm()) throw GeometryError("pencils meet at infinity");
      const Point2 p = v.head<2>() / v.z();
      if (p.x() < -0.5 * width || p.x() > 1.5 * width || p.y() < -0.5 * height ||
          p.y() > 1.5 * height) {
        throw GeometryError("vertex outside the image neighbourhood");
      }
      grid.at(i, j) = p;
    }
  }
  return grid;
}

}  // namespace tofgrid
