#pragma once

// Synthetic chequerboard scenes with known ground truth, and the
// slant-robustness experiment for the gradient labelling.

#include "tofgrid/cluster.hpp"
#include "tofgrid/core.hpp"
#include "tofgrid/imageio.hpp"
#include "tofgrid/metrics.hpp"
#include "tofgrid/preprocess.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <thread>
#include <vector>

namespace tofgrid {

/// Raised when a requested board does not fit the image.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Pinhole camera; the default focal length equals the image width.
struct Intrinsics {
  double focal = 176.0;
  Point2 principal = Point2(87.5, 71.5);

  Eigen::Matrix3d K() const {
    Eigen::Matrix3d k;
    k << focal, 0, principal.x(), 0, focal, principal.y(), 0, 0, 1;
    return k;
  }

  static Intrinsics centred(int width, int height) {
    return {static_cast<double>(width), Point2(0.5 * (width - 1), 0.5 * (height - 1))};
  }
};

/// R = R(slant, w(tilt)) R(cyclo, z), with w(tilt) = (cos tilt, sin tilt, 0).
inline Eigen::Matrix3d slant_rotation(double slant, double tilt, double cyclo) {
  const Eigen::Vector3d w(std::cos(tilt), std::sin(tilt), 0.0);
  return (Eigen::AngleAxisd(slant, w) * Eigen::AngleAxisd(cyclo, Eigen::Vector3d::UnitZ())).toRotationMatrix();
}

/// H = K R K^-1.
inline Homography rotation_homography(double slant, double tilt, double cyclo, const Intrinsics& k) {
  if (!(std::abs(slant) < 0.5 * std::numbers::pi)) throw ConfigError("slant must be below 90 degrees");
  return Homography(k.K() * slant_rotation(slant, tilt, cyclo) * k.K().inverse());
}

enum class Background { plain, clutter };

inline const char* to_string(Background b) { return b == Background::plain ? "plain" : "clutter"; }

struct RenderOptions {
  double black = 20.0;
  double white = 220.0;
  double background = 100.0;
  int border = 1;          // white border width, squares
  int supersample = 64;    // per axis, pixels straddling a cell boundary
  double margin = 2.0;     // px between the board outline and the image edge
  bool allow_crop = false; // skip the fit check (cut-off boards)
  bool with_depth = true;
  double board_range = 1.2;       // metres
  double background_range = 4.0;  // metres
  Background mode = Background::plain;
  int clutter_shapes = 14;
  double clutter_range = 2.5;     // in-band wall behind the clutter
};

struct SynthScene {
  GridSpec spec;
  Homography H;  // board plane (unit squares, centred) -> image
  AmplitudeImage amplitude;
  std::optional<DepthImage> depth;
  VertexGrid truth;
  double noise = 0.0;
  Background mode = Background::plain;
  bool has_board = true;
};

namespace detail {

struct ClutterShape {
  Point2 centre;
  Point2 half;
  double angle = 0.0;
  double level = 0.0;
  Point2 slope = Point2::Zero();  // shading, grey levels per px
};

struct ClutterField {
  double base = 0.0;
  Point2 ramp = Point2::Zero();
  std::vector<ClutterShape> shapes;

  double value(const Point2& p) const {
    double v = base + ramp.dot(p);
    for (const auto& s : shapes) {
      const Point2 d = p - s.centre;
      const double c = std::cos(s.angle), sn = std::sin(s.angle);
      const Point2 q(c * d.x() + sn * d.y(), -sn * d.x() + c * d.y());
      if (std::abs(q.x()) <= s.half.x() && std::abs(q.y()) <= s.half.y()) v = s.level + s.slope.dot(d);
    }
    return v;
  }
};

/// Rectangles and linear ramps at 20-80% of the 8-bit range.
inline ClutterField make_clutter(int width, int height, int shapes, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> level(0.2 * 255, 0.8 * 255);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ClutterField f;
  f.base = level(rng);
  f.ramp = Point2(unit(rng) - 0.5, unit(rng) - 0.5) * 0.6;
  for (int k = 0; k < shapes; ++k) {
    ClutterShape s;
    s.centre = Point2(unit(rng) * width, unit(rng) * height);
    s.half = Point2(4 + unit(rng) * 26, 4 + unit(rng) * 26);
    s.angle = unit(rng) * std::numbers::pi;
    s.level = level(rng);
    if (unit(rng) < 0.5) s.slope = Point2(unit(rng) - 0.5, unit(rng) - 0.5) * 2.0;
    f.shapes.push_back(s);
  }
  return f;
}

}  // namespace detail

/// Board-plane extent including the white border: |X| <= hx, |Y| <= hy.
inline Point2 board_half_extent(const GridSpec& spec, int border) {
  return Point2(0.5 * (spec.cols + 1) + border, 0.5 * (spec.rows + 1) + border);
}

inline VertexGrid project_grid(const Homography& H, const GridSpec& spec) {
  VertexGrid g = ideal_grid(spec);
  for (auto& p : g.points()) p = H.apply(p);
  return g;
}

/// Renders the board under H with box-filtered supersampling and additive
/// Gaussian noise. Square (0, 0) in the top-left corner is black.
inline SynthScene render_board(const GridSpec& spec, const Homography& H, int width, int height,
                               double noise, std::uint64_t seed, const RenderOptions& opt = {}) {
  if (width < 8 || height < 8) throw ConfigError("synthetic image too small");
  if (opt.supersample < 1) throw ConfigError("supersample factor must be >= 1");
  if (!(noise >= 0.0)) throw ConfigError("noise sigma must be non-negative");
  const Point2 ext = board_half_extent(spec, opt.border);
  const Eigen::Matrix3d Hinv = H.m.inverse();

  // The board must lie wholly in front of the camera: w keeps one sign.
  const Point2 corners[4] = {{-ext.x(), -ext.y()}, {ext.x(), -ext.y()}, {ext.x(), ext.y()}, {-ext.x(), ext.y()}};
  double wsign = 0.0;
  for (const auto& c : corners) {
    const double w = H.m.row(2).dot(Eigen::Vector3d(c.x(), c.y(), 1.0));
    if (wsign == 0.0) wsign = w > 0 ? 1.0 : -1.0;
    if (!(w * wsign > 0.0)) throw GenerationError("board crosses the vanishing line");
  }
  if (!opt.allow_crop) {
    for (const auto& c : corners) {
      const Point2 p = H.apply(c);
      if (p.x() < opt.margin || p.y() < opt.margin || p.x() > width - 1 - opt.margin ||
          p.y() > height - 1 - opt.margin) {
        throw GenerationError("board does not fit inside the image");
      }
    }
  }

  std::mt19937_64 rng(seed);
  std::optional<detail::ClutterField> clutter;
  if (opt.mode == Background::clutter) clutter = detail::make_clutter(width, height, opt.clutter_shapes, rng);
  const double grid_x = 0.5 * (spec.cols + 1);
  const double grid_y = 0.5 * (spec.rows + 1);

  // 0: off board, 1: on board; value in `v`.
  auto board_value = [&](const Point2& p, double& v) {
    const Eigen::Vector3d q = Hinv * Eigen::Vector3d(p.x(), p.y(), 1.0);
    if (!(q.z() * wsign > 0.0)) return false;
    const double X = q.x() / q.z(), Y = q.y() / q.z();
    if (std::abs(X) > ext.x() || std::abs(Y) > ext.y()) return false;
    if (std::abs(X) >= grid_x || std::abs(Y) >= grid_y) {
      v = opt.white;
      return true;
    }
    const auto ix = static_cast<long>(std::floor(X + grid_x));
    const auto iy = static_cast<long>(std::floor(Y + grid_y));
    v = (ix + iy) % 2 == 0 ? opt.black : opt.white;
    return true;
  };
  auto background_value = [&](const Point2& p) { return clutter ? clutter->value(p) : opt.background; };

  SynthScene scene;
  scene.spec = spec;
  scene.H = H;
  scene.noise = noise;
  scene.mode = opt.mode;
  scene.amplitude.samples = Image<double>(width, height, 0.0);
  if (opt.with_depth) scene.depth = DepthImage{Image<double>(width, height, 0.0)};
  // Board-plane unit cell under an image point; every cell (chequer square,
  // border square or background) has one value.
  constexpr long kOff = std::numeric_limits<long>::min();
  auto cell_of = [&](const Point2& p) -> std::pair<long, long> {
    const Eigen::Vector3d q = Hinv * Eigen::Vector3d(p.x(), p.y(), 1.0);
    if (!(q.z() * wsign > 0.0)) return {kOff, kOff};
    const double X = q.x() / q.z(), Y = q.y() / q.z();
    if (std::abs(X) > ext.x() || std::abs(Y) > ext.y()) return {kOff, kOff};
    return {static_cast<long>(std::floor(X + grid_x)), static_cast<long>(std::floor(Y + grid_y))};
  };
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      // A pixel whose four corners share a convex cell is uniform.
      const auto c = cell_of(Point2(x - 0.5, y - 0.5));
      const bool same = c == cell_of(Point2(x + 0.5, y - 0.5)) && c == cell_of(Point2(x - 0.5, y + 0.5)) &&
                        c == cell_of(Point2(x + 0.5, y + 0.5));
      // Clutter only needs coarse antialiasing.
      const int S = same && c.first == kOff && clutter ? std::min(opt.supersample, 8) : opt.supersample;
      double value;
      if (same && (c.first != kOff || !clutter)) {
        double v;
        value = board_value(Point2(x, y), v) ? v : background_value(Point2(x, y));
      } else {
        double acc = 0.0;
        for (int sy = 0; sy < S; ++sy) {
          for (int sx = 0; sx < S; ++sx) {
            const Point2 p(x - 0.5 + (sx + 0.5) / S, y - 0.5 + (sy + 0.5) / S);
            double v;
            acc += board_value(p, v) ? v : background_value(p);
          }
        }
        value = acc / (S * S);
      }
      scene.amplitude.samples(x, y) = value;
      if (scene.depth) {
        double v;
        const double far = clutter ? opt.clutter_range : opt.background_range;
        scene.depth->samples(x, y) = board_value(Point2(x, y), v) ? opt.board_range : far;
      }
    }
  }
  if (noise > 0.0) {
    std::normal_distribution<double> n(0.0, noise);
    for (double& v : scene.amplitude.samples.pixels()) v += n(rng);
  }
  scene.truth = project_grid(H, spec);
  return scene;
}

/// Clutter-only negative scene: no board, clutter depth inside the band.
inline SynthScene render_clutter(const GridSpec& spec, int width, int height, double noise, std::uint64_t seed,
                                 RenderOptions opt = {}) {
  opt.mode = Background::clutter;
  opt.allow_crop = true;
  // A homography placing the board far outside the image.
  Eigen::Matrix3d far = Eigen::Matrix3d::Identity();
  far(0, 2) = -1e6;
  SynthScene s = render_board(spec, Homography(far), width, height, noise, seed, opt);
  s.has_board = false;
  s.truth = VertexGrid();
  return s;
}

struct BoardPose {
  double slant = 0.0;
  double tilt = 0.0;
  double cyclo = 0.0;
  Eigen::Vector3d t = Eigen::Vector3d(0, 0, 20);  // board centre, camera frame, square units
};

/// Board plane (unit squares) -> image for a posed board: K [r1 r2 t].
inline Homography board_homography(const BoardPose& pose, const Intrinsics& k) {
  const Eigen::Matrix3d R = slant_rotation(pose.slant, pose.tilt, pose.cyclo);
  Eigen::Matrix3d P;
  P.col(0) = R.col(0);
  P.col(1) = R.col(1);
  P.col(2) = pose.t;
  return Homography(k.K() * P);
}

struct SceneSampler {
  GridSpec spec = GridSpec::make(4, 5);
  int width = 176;
  int height = 144;
  Intrinsics camera = Intrinsics::centred(176, 144);
  double slant_max = 60.0 * std::numbers::pi / 180.0;
  double square_px_min = 10.0;  // fronto-parallel square size at the board centre
  double square_px_max = 14.0;
  double centre_jitter = 12.0;  // px
  double noise = 2.0;
  RenderOptions render;
  int max_attempts = 1000;
};

/// Draws random poses until one renders inside the image.
inline SynthScene sample_scene(const SceneSampler& cfg, std::uint64_t seed, BoardPose* pose_out = nullptr) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    BoardPose pose;
    pose.slant = unit(rng) * cfg.slant_max;
    pose.tilt = unit(rng) * 2 * std::numbers::pi;
    pose.cyclo = unit(rng) * 2 * std::numbers::pi;
    const double sq = cfg.square_px_min + unit(rng) * (cfg.square_px_max - cfg.square_px_min);
    const double z = cfg.camera.focal / sq;
    const Point2 c = cfg.camera.principal +
                     cfg.centre_jitter * Point2(2 * unit(rng) - 1, 2 * unit(rng) - 1);
    pose.t = Eigen::Vector3d((c.x() - cfg.camera.principal.x()) * z / cfg.camera.focal,
                             (c.y() - cfg.camera.principal.y()) * z / cfg.camera.focal, z);
    const std::uint64_t render_seed = rng();
    try {
      SynthScene s = render_board(cfg.spec, board_homography(pose, cfg.camera), cfg.width, cfg.height, cfg.noise,
                                  render_seed, cfg.render);
      if (pose_out) *pose_out = pose;
      return s;
    } catch (const GenerationError&) {
      continue;
    }
  }
  throw GenerationError("no pose fits the image after " + std::to_string(cfg.max_attempts) + " attempts");
}

/// Per-trial seed from a base seed and an index (splitmix64 finaliser).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// (xi, eta, 1) <- (xi, eta, 1) H^-1, rescaled to a unit third component.
/// Zero gradients stay zero; a vanishing third component gives zero.
inline GradientField transport_gradients(const GradientField& g, const Homography& H) {
  const Eigen::Matrix3d Hinv = H.m.inverse();
  GradientField out(g.width(), g.height());
  for (int y = 0; y < g.height(); ++y) {
    for (int x = 0; x < g.width(); ++x) {
      if (!(g.rho(x, y) > kRhoEpsilon)) continue;
      const Eigen::RowVector3d r = Eigen::RowVector3d(g.xi(x, y), g.eta(x, y), 1.0) * Hinv;
      if (std::abs(r.z()) <= 1e-12 * r.norm()) continue;
      out.xi(x, y) = r.x() / r.z();
      out.eta(x, y) = r.y() / r.z();
    }
  }
  return out;
}

/// Fraction of pixels labelled in `reference` that carry the same label in
/// `labels`. Empty reference edge set gives nullopt.
inline std::optional<double> consistency(const LabelMap& labels, const LabelMap& reference) {
  if (!labels.same_size(reference)) throw ConfigError("label maps differ in size");
  long edges = 0, same = 0;
  for (std::size_t k = 0; k < reference.size(); ++k) {
    const Label r = reference.pixels()[k];
    if (r == Label::none) continue;
    ++edges;
    same += labels.pixels()[k] == r;
  }
  if (edges == 0) return std::nullopt;
  return static_cast<double>(same) / static_cast<double>(edges);
}

inline LabelMap swap_labels(LabelMap labels) {
  for (Label& l : labels.pixels()) {
    if (l == Label::lambda) l = Label::mu;
    else if (l == Label::mu) l = Label::lambda;
  }
  return labels;
}

/// Consistency maximised over the arbitrary lambda/mu naming.
inline std::optional<double> consistency_up_to_naming(const LabelMap& labels, const LabelMap& reference) {
  const auto a = consistency(labels, reference);
  if (!a) return a;
  return std::max(*a, *consistency(swap_labels(labels), reference));
}

struct LabellingPolicy {
  ClusterMethod method = ClusterMethod::pca;
  double pi_fraction = 0.2;
  double pi_percentile = 0.95;
  int ransac_iterations = 100;
};

inline LabelMap label_gradients(const GradientField& g, const LabellingPolicy& p, std::uint64_t seed) {
  const double pi_min = pi_min_from_percentile(g, p.pi_fraction, p.pi_percentile);
  if (p.method == ClusterMethod::pca) return classify_pca(g, fit_pca(g, pi_min));
  return classify_ransac(g, pi_min, p.ransac_iterations, seed).labels;
}

struct SlantConfig {
  int trials = 100;
  std::vector<double> slants_deg = {0, 10, 20, 30, 40, 50, 60, 70, 80};
  std::uint64_t seed = 0;
  int samples = 5000;
  LabellingPolicy policy;
  Intrinsics camera = Intrinsics::centred(176, 144);
  int jobs = 1;
};

struct SlantPoint {
  double slant_deg = 0.0;
  double mean = 0.0;
  double stddev = 0.0;
  int defined = 0;  // trials with a non-empty edge set
};

/// The gradient sample of the fronto-parallel base image and its labels.
struct SlantBase {
  GradientField grads;  // only sampled pixels non-zero
  LabelMap labels;
};

inline SlantBase make_slant_base(const GradientField& full, const SlantConfig& cfg) {
  std::vector<std::pair<int, int>> pixels;
  for (int y = 0; y < full.height(); ++y) {
    for (int x = 0; x < full.width(); ++x) {
      if (full.rho(x, y) > kRhoEpsilon) pixels.emplace_back(x, y);
    }
  }
  if (pixels.empty()) throw DegenerateError("base image has no gradients");
  std::mt19937_64 rng(derive_seed(cfg.seed, 0xBA5E));
  if (static_cast<int>(pixels.size()) > cfg.samples) {
    std::shuffle(pixels.begin(), pixels.end(), rng);
    pixels.resize(static_cast<std::size_t>(cfg.samples));
  }
  SlantBase base{GradientField(full.width(), full.height()), {}};
  for (const auto& [x, y] : pixels) {
    base.grads.xi(x, y) = full.xi(x, y);
    base.grads.eta(x, y) = full.eta(x, y);
  }
  base.labels = label_gradients(base.grads, cfg.policy, cfg.seed);
  return base;
}

/// Transported orientation with the fronto-parallel magnitude kept, so the
/// intensity-unit threshold keeps its meaning.
inline GradientField slant_gradients(const GradientField& base, const Homography& H) {
  GradientField t = transport_gradients(base, H);
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      const double r = t.rho(x, y);
      if (!(r > 0.0)) continue;
      const double k = base.rho(x, y) / r;
      t.xi(x, y) *= k;
      t.eta(x, y) *= k;
    }
  }
  return t;
}

/// Consistency of one trial; H is expressed about the principal point.
inline std::optional<double> slant_trial(const SlantBase& base, double slant, double tilt, double cyclo,
                                         const SlantConfig& cfg, std::uint64_t seed) {
  Intrinsics centred = cfg.camera;
  centred.principal = Point2::Zero();
  const Homography H = rotation_homography(slant, tilt, cyclo, centred);
  const GradientField g = slant_gradients(base.grads, H);
  try {
    return consistency_up_to_naming(label_gradients(g, cfg.policy, seed), base.labels);
  } catch (const DegenerateError&) {
    return 0.0;  // no labelling at all: every edge label lost
  }
}

inline std::vector<SlantPoint> slant_experiment(const SlantBase& base, const SlantConfig& cfg) {
  if (cfg.trials < 1) throw ConfigError("slant experiment needs at least one trial");
  const std::size_t n_slant = cfg.slants_deg.size();
  const std::size_t total = n_slant * static_cast<std::size_t>(cfg.trials);
  std::vector<std::optional<double>> results(total);
  auto run = [&](std::size_t k) {
    const std::size_t si = k / static_cast<std::size_t>(cfg.trials);
    std::mt19937_64 rng(derive_seed(cfg.seed, k));
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi);
    const double tilt = angle(rng);
    const double cyclo = angle(rng);
    results[k] = slant_trial(base, cfg.slants_deg[si] * std::numbers::pi / 180.0, tilt, cyclo, cfg, rng());
  };
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (std::size_t k = 0; k < total; ++k) run(k);
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) {
      pool.emplace_back([&, j] {
        for (std::size_t k = static_cast<std::size_t>(j); k < total; k += static_cast<std::size_t>(jobs)) run(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  std::vector<SlantPoint> curve;
  for (std::size_t si = 0; si < n_slant; ++si) {
    SlantPoint p;
    p.slant_deg = cfg.slants_deg[si];
    double sum = 0.0, sq = 0.0;
    for (int t = 0; t < cfg.trials; ++t) {
      const auto& r = results[si * static_cast<std::size_t>(cfg.trials) + static_cast<std::size_t>(t)];
      if (!r) continue;
      ++p.defined;
      sum += *r;
      sq += *r * *r;
    }
    if (p.defined > 0) {
      p.mean = sum / p.defined;
      p.stddev = p.defined > 1 ? std::sqrt(std::max(0.0, (sq - p.defined * p.mean * p.mean) / (p.defined - 1))) : 0.0;
    } else {
      p.mean = std::numeric_limits<double>::quiet_NaN();
    }
    curve.push_back(p);
  }
  return curve;
}

/// Fronto-parallel base scene used when no real image is supplied.
inline SynthScene slant_base_scene(std::uint64_t seed, double noise = 2.0) {
  SceneSampler s;
  BoardPose pose;
  pose.t = Eigen::Vector3d(0, 0, s.camera.focal / 12.0);
  return render_board(s.spec, board_homography(pose, s.camera), s.width, s.height, noise, seed, s.render);
}

inline std::string slant_csv(const std::vector<SlantPoint>& curve) {
  std::string out = "slant_deg,mean_consistency,stddev\n";
  char buf[96];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f\n", p.slant_deg, p.mean, p.stddev);
    out += buf;
  }
  return out;
}

}  // namespace tofgrid
