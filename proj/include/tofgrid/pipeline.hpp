#pragma once

// End-to-end detection: depth gating and erosion, gradient labelling, local
// frame, dual Hough transform, sweep analysis, lattice construction, the two
// acceptance tests and subpixel refinement.

#include "tofgrid/cluster.hpp"
#include "tofgrid/core.hpp"
#include "tofgrid/frame.hpp"
#include "tofgrid/hough.hpp"
#include "tofgrid/imageio.hpp"
#include "tofgrid/metrics.hpp"
#include "tofgrid/preprocess.hpp"
#include "tofgrid/sweep.hpp"
#include "tofgrid/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tofgrid {

struct DetectorConfig {
  double d0 = 0.3;  // metres
  double d1 = 3.0;
  int erosion = 2;
  ClusterMethod method = ClusterMethod::pca;
  double pi_fraction = 0.2;
  double pi_percentile = 0.95;
  int ransac_iterations = 100;
  std::uint64_t seed = 0;
  double hough_scale = 1.5;
  double run_fraction = 0.05;
  double f = 0.4;
  double g = 0.5;
  int subpixel_half_width = 3;  // upper bound; see refine_half_width
  int subpixel_iterations = 20;
  double subpixel_tolerance = 0.01;

  /// Throws ConfigError on the first invalid field.
  void validate() const {
    if (!(d0 < d1)) throw ConfigError("d0 must be below d1");
    if (erosion < 0) throw ConfigError("erosion radius must be non-negative");
    if (!(pi_fraction > 0.0)) throw ConfigError("pi_fraction must be positive");
    if (!(pi_percentile > 0.0 && pi_percentile <= 1.0)) throw ConfigError("pi_percentile must lie in (0, 1]");
    if (ransac_iterations < 1) throw ConfigError("ransac_iterations must be >= 1");
    if (!(hough_scale > 0.0)) throw ConfigError("hough_scale must be positive");
    if (!(run_fraction > 0.0 && run_fraction < 1.0)) throw ConfigError("run_fraction must lie in (0, 1)");
    if (!(f > 0.0)) throw ConfigError("f must be positive");
    if (!(g > 0.0)) throw ConfigError("g must be positive");
    if (subpixel_half_width < 2) throw ConfigError("subpixel_half_width must be >= 2");
    if (subpixel_iterations < 1) throw ConfigError("subpixel_iterations must be >= 1");
    if (!(subpixel_tolerance > 0.0)) throw ConfigError("subpixel_tolerance must be positive");
  }
};

/// Largest window half-width, at least 2 and at most max_hw, that keeps the
/// refinement window of vertex (i, j) clear of its lattice neighbours.
inline int refine_half_width(const VertexGrid& grid, int i, int j, int max_hw) {
  double d = std::numeric_limits<double>::infinity();
  const Point2 v = grid.at(i, j);
  if (i > 0) d = std::min(d, (grid.at(i - 1, j) - v).norm());
  if (i + 1 < grid.rows()) d = std::min(d, (grid.at(i + 1, j) - v).norm());
  if (j > 0) d = std::min(d, (grid.at(i, j - 1) - v).norm());
  if (j + 1 < grid.cols()) d = std::min(d, (grid.at(i, j + 1) - v).norm());
  const double fit = std::isfinite(d) ? std::floor(d / 2.0) - 1.0 : max_hw;
  return static_cast<int>(std::clamp(fit, 2.0, static_cast<double>(max_hw)));
}

/// Stage at which a detection was rejected.
enum class RejectStage { none, no_board_mask, degenerate_cluster, no_pencil, geometric_failure, corrupted, displaced };

inline const char* to_string(RejectStage s) {
  switch (s) {
    case RejectStage::none: return "none";
    case RejectStage::no_board_mask: return "no_board_mask";
    case RejectStage::degenerate_cluster: return "degenerate_cluster";
    case RejectStage::no_pencil: return "no_pencil";
    case RejectStage::geometric_failure: return "geometric_failure";
    case RejectStage::corrupted: return "corrupted";
    case RejectStage::displaced: return "displaced";
  }
  return "unknown";
}

struct SweepScores {
  double lambda_rows = 0.0;  // l clusters on the lambda array
  double lambda_cols = 0.0;  // m clusters on the lambda array
  double mu_rows = 0.0;
  double mu_cols = 0.0;
};

struct Diagnostics {
  LabelCounts labels;
  double pi_min = 0.0;
  double phi = 0.0;
  Point2 centroid = Point2::Zero();
  SweepScores scores;
  std::optional<Correspondence> correspondence;
  double worst_f = 0.0;
  double worst_g = 0.0;
  int refined_vertices = 0;
  std::string message;
};

struct DetectionResult {
  bool accepted = false;
  RejectStage stage = RejectStage::none;
  GridSpec spec;
  ClusterMethod method = ClusterMethod::pca;
  VertexGrid vertices;  // empty unless accepted
  std::optional<double> geometric_error;
  std::optional<double> photometric_error;
  Diagnostics diag;
  std::vector<std::pair<std::string, double>> timing_ms;
  std::optional<HoughPair> hough;  // kept on request
};

struct DetectOptions {
  bool keep_hough = false;
};

/// Masked image after depth gating (when depth is present) and erosion.
inline MaskedImage board_mask(const AmplitudeImage& a, const DepthImage* d, const DetectorConfig& cfg) {
  MaskedImage b = d ? segment_depth(a, *d, cfg.d0, cfg.d1) : segment_none(a);
  return erode_mask(b, cfg.erosion);
}

namespace detail {

class StageClock {
 public:
  explicit StageClock(std::vector<std::pair<std::string, double>>& out) : out_(out), t_(now()) {}
  void lap(const char* name) {
    const auto t = now();
    out_.emplace_back(name, std::chrono::duration<double, std::milli>(t - t_).count());
    t_ = t;
  }

 private:
  static std::chrono::steady_clock::time_point now() { return std::chrono::steady_clock::now(); }
  std::vector<std::pair<std::string, double>>& out_;
  std::chrono::steady_clock::time_point t_;
};

}  // namespace detail

/// Runs every stage. Stage failures become rejections; only invalid
/// configuration or mismatched inputs throw.
inline DetectionResult detect(const AmplitudeImage& a, const DepthImage* d, const GridSpec& spec,
                              const DetectorConfig& cfg, const DetectOptions& opts = {}) {
  cfg.validate();
  GridSpec::make(spec.rows, spec.cols);
  if (d && !a.samples.same_size(d->samples)) throw ConfigError("amplitude and depth images differ in size");
  if (a.width() < 3 || a.height() < 3) throw ConfigError("image too small");

  DetectionResult res;
  res.spec = spec;
  res.method = cfg.method;
  detail::StageClock clock(res.timing_ms);
  auto reject = [&](RejectStage stage, const std::string& why) {
    res.accepted = false;
    res.stage = stage;
    res.diag.message = why;
    res.vertices = VertexGrid();
    return res;
  };

  // Preprocessing.
  const MaskedImage mask = board_mask(a, d, cfg);
  const GradientField grads = gradient(mask);
  clock.lap("preprocess");

  // Gradient labelling.
  LabelMap labels;
  ClusterModel model;
  try {
    res.diag.pi_min = pi_min_from_percentile(grads, cfg.pi_fraction, cfg.pi_percentile);
    if (cfg.method == ClusterMethod::pca) {
      model = fit_pca(grads, res.diag.pi_min);
      labels = classify_pca(grads, model);
    } else {
      auto r = classify_ransac(grads, res.diag.pi_min, cfg.ransac_iterations, cfg.seed);
      labels = std::move(r.labels);
      model = r.model;
    }
  } catch (const DegenerateError& e) {
    bool any = false;
    for (double v : mask.samples.pixels()) any = any || !is_null(v);
    return reject(any ? RejectStage::degenerate_cluster : RejectStage::no_board_mask, e.what());
  }
  res.diag.labels = count_labels(labels);
  res.diag.phi = model.phi;
  clock.lap("cluster");

  // Local frame.
  LocalFrame frame;
  try {
    res.diag.centroid = board_centroid(mask);
    frame = build_frame(res.diag.centroid, model.phi);
  } catch (const NoBoardError& e) {
    return reject(RejectStage::no_board_mask, e.what());
  }
  clock.lap("frame");

  // Hough transform.
  const HoughGeometry geom = HoughGeometry::for_image(a.width(), a.height(), cfg.hough_scale);
  const auto points = labelled_points(labels, frame);
  HoughPair hough = accumulate(points, geom);
  clock.lap("hough");

  // Sweep analysis and pencil correspondence.
  const int sizes[2] = {spec.rows, spec.cols};
  auto sweeps_lambda = best_sweeps(hough.lambda, sizes, cfg.run_fraction);
  auto sweeps_mu = best_sweeps(hough.mu, sizes, cfg.run_fraction);
  res.diag.scores = {sweeps_lambda[0].score, sweeps_lambda[1].score, sweeps_mu[0].score, sweeps_mu[1].score};
  if (opts.keep_hough) res.hough = hough;
  clock.lap("sweep");
  Correspondence corr;
  try {
    corr = resolve_pencils(res.diag.scores.lambda_rows, res.diag.scores.mu_cols, res.diag.scores.mu_rows,
                           res.diag.scores.lambda_cols);
  } catch (const NoPencilError& e) {
    return reject(RejectStage::no_pencil, e.what());
  }
  // The score rule can prefer the wrong pairing when one accumulator is much
  // stronger than the other (a perimeter line then outscores a real one), so
  // the other pairing is tried when the preferred lattice is rejected.
  struct Attempt {
    RejectStage stage = RejectStage::none;
    std::string why;
    Pencil L, M;
    VertexGrid grid;
    double worst_f = 0.0, worst_g = 0.0;
  };
  auto attempt = [&](Correspondence c) {
    Attempt at;
    const bool lambda_is_L = c == Correspondence::lambda_is_L;
    const SweepResult& sweep_L = lambda_is_L ? sweeps_lambda[0] : sweeps_mu[0];
    const SweepResult& sweep_M = lambda_is_L ? sweeps_mu[1] : sweeps_lambda[1];
    if (!(sweep_L.score > 0.0) || !(sweep_M.score > 0.0) || static_cast<int>(sweep_L.runs.size()) != spec.rows ||
        static_cast<int>(sweep_M.runs.size()) != spec.cols) {
      at.stage = RejectStage::no_pencil;
      at.why = "pencil sweep holds too few clusters";
      return at;
    }
    try {
      at.L = pencil_lines(sweep_L, lambda_is_L ? Label::lambda : Label::mu, geom, frame);
      at.M = pencil_lines(sweep_M, lambda_is_L ? Label::mu : Label::lambda, geom, frame);
      at.grid = grid_vertices(at.L, at.M, a.width(), a.height());
    } catch (const DegenerateError& e) {
      at.stage = RejectStage::geometric_failure;
      at.why = e.what();
      return at;
    }
    const TestOutcome fo = corrupted_test(at.grid, cfg.f);
    at.worst_f = fo.worst;
    if (!fo.passed) {
      at.stage = RejectStage::corrupted;
      at.why = "interval ratios out of tolerance";
      return at;
    }
    try {
      const TestOutcome go = displaced_test(at.L, at.M, at.grid, grads, cfg.g);
      at.worst_g = go.worst;
      if (!go.passed) {
        at.stage = RejectStage::displaced;
        at.why = "edge polarities unbalanced";
      }
    } catch (const DegenerateError& e) {
      at.stage = RejectStage::displaced;
      at.why = e.what();
    }
    return at;
  };
  const Correspondence other =
      corr == Correspondence::lambda_is_L ? Correspondence::mu_is_L : Correspondence::lambda_is_L;
  Attempt chosen = attempt(corr);
  if (chosen.stage != RejectStage::none) {
    Attempt alt = attempt(other);
    if (alt.stage == RejectStage::none) {
      chosen = std::move(alt);
      corr = other;
    }
  }
  res.diag.correspondence = corr;
  res.diag.worst_f = chosen.worst_f;
  res.diag.worst_g = chosen.worst_g;
  clock.lap("verify");
  if (chosen.stage != RejectStage::none) return reject(chosen.stage, chosen.why);
  VertexGrid grid = std::move(chosen.grid);

  // Subpixel refinement on the unmasked amplitude gradient.
  const GradientField raw = gradient(a);
  const VertexGrid lattice = ideal_grid(spec);
  std::vector<Point2> model_refined, image_refined;
  std::vector<bool> refined(grid.size(), false);
  const VertexGrid coarse = grid;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    Point2& p = grid.points()[k];
    const int i = static_cast<int>(k) / grid.cols(), j = static_cast<int>(k) % grid.cols();
    const int hw = refine_half_width(coarse, i, j, cfg.subpixel_half_width);
    const RefinedVertex r = subpixel_refine(p, raw, hw, cfg.subpixel_iterations, cfg.subpixel_tolerance);
    if (r.refined) {
      p = r.position;
      refined[k] = true;
      model_refined.push_back(lattice.points()[k]);
      image_refined.push_back(p);
    }
  }
  res.diag.refined_vertices = static_cast<int>(model_refined.size());
  // Vertices too close to the border for a local window are predicted from
  // the homography of the refined ones.
  if (model_refined.size() >= 4 && model_refined.size() < grid.size()) {
    try {
      const Homography Hr = refine_lm(fit_dlt(model_refined, image_refined), model_refined, image_refined);
      for (std::size_t k = 0; k < grid.size(); ++k) {
        if (!refined[k]) grid.points()[k] = Hr.apply(lattice.points()[k]);
      }
    } catch (const DegenerateError&) {
    }
  }
  clock.lap("refine");

  res.accepted = true;
  res.stage = RejectStage::none;
  res.vertices = grid;
  try {
    res.geometric_error = geometric_error(lattice, grid);
  } catch (const DegenerateError&) {
    res.geometric_error.reset();
  }
  res.photometric_error = photometric_error(grid.points(), raw);
  clock.lap("metrics");
  return res;
}

inline DetectionResult detect(const AmplitudeImage& a, const std::optional<DepthImage>& d, const GridSpec& spec,
                              const DetectorConfig& cfg, const DetectOptions& opts = {}) {
  return detect(a, d ? &*d : nullptr, spec, cfg, opts);
}

}  // namespace tofgrid
