#include "tofgrid/synth.hpp"

#include "support/oracles.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

using namespace tofgrid;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

Eigen::Matrix3d rotation(double w) {
  Eigen::Matrix3d R;
  R << std::cos(w), -std::sin(w), 0, std::sin(w), std::cos(w), 0, 0, 0, 1;
  return R;
}

}  // namespace

TEST(RotationHomography, Examples) {
  const Intrinsics k = Intrinsics::centred(176, 144);
  EXPECT_EQ(k.focal, 176.0);
  EXPECT_EQ(k.principal, Point2(87.5, 71.5));
  for (double tilt : {0.0, 1.0, 4.0}) {
    EXPECT_LE(homography_distance(rotation_homography(0, tilt, 0, k), Homography(Eigen::Matrix3d::Identity())),
              1e-15);
  }
  // Cyclorotation only: the principal point stays fixed.
  const Point2 c = rotation_homography(0, 0.3, 40 * kDeg, k).apply(k.principal);
  EXPECT_LE((c - k.principal).norm(), 1e-9);
  // Slant moves it along the direction normal to the tilt axis.
  const Point2 d = rotation_homography(40 * kDeg, 0.0, 0, k).apply(k.principal) - k.principal;
  EXPECT_NEAR(d.x(), 0.0, 1e-9);
  EXPECT_NEAR(std::abs(d.y()), k.focal * std::tan(40 * kDeg), 1e-9);
  EXPECT_THROW(rotation_homography(90 * kDeg, 0, 0, k), ConfigError);
}

TEST(Render, FrontoParallelLayout) {
  BoardPose pose;
  pose.t = Eigen::Vector3d(0, 0, 176.0 / 12.0);
  const Intrinsics cam = Intrinsics::centred(176, 144);
  const GridSpec spec = GridSpec::make(4, 5);
  RenderOptions opt;
  const SynthScene s = render_board(spec, board_homography(pose, cam), 176, 144, 0.0, 1, opt);
  // Square size 12 px, vertices at the principal point +- half squares.
  EXPECT_LE((s.truth.at(0, 0) - (cam.principal + Point2(-2 * 12, -1.5 * 12))).norm(), 1e-9);
  // Top-left chequer square is black, its right neighbour white.
  const Point2 tl = s.H.apply(Point2(-2.5, -2));
  EXPECT_EQ(s.amplitude.samples(int(std::lround(tl.x())), int(std::lround(tl.y()))), opt.black);
  const Point2 next = s.H.apply(Point2(-1.5, -2));
  EXPECT_EQ(s.amplitude.samples(int(std::lround(next.x())), int(std::lround(next.y()))), opt.white);
  EXPECT_EQ(s.amplitude.samples(0, 0), opt.background);
  ASSERT_TRUE(s.depth);
  EXPECT_EQ(s.depth->samples(0, 0), opt.background_range);
  EXPECT_EQ(s.depth->samples(88, 72), opt.board_range);
}

TEST(Render, ExactTruthAndBoxFilteredEdges) {
  SceneSampler sampler;
  sampler.noise = 0.0;
  for (int k = 0; k < 10; ++k) {
    const SynthScene s = sample_scene(sampler, derive_seed(3, k));
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 5; ++j) {
        EXPECT_LE((s.truth.at(i, j) - s.H.apply(ideal_grid(s.spec).at(i, j))).norm(), 1e-12);
      }
    }
    for (double v : s.amplitude.samples.pixels()) {
      EXPECT_GE(v, 20.0 - 1e-9);
      EXPECT_LE(v, 220.0 + 1e-9);
    }
  }
}

TEST(Render, NoiseStatistics) {
  BoardPose pose;
  pose.t = Eigen::Vector3d(0, 0, 15);
  const Homography H = board_homography(pose, Intrinsics::centred(176, 144));
  const GridSpec spec = GridSpec::make(4, 5);
  const SynthScene clean = render_board(spec, H, 176, 144, 0.0, 9);
  const SynthScene noisy = render_board(spec, H, 176, 144, 2.0, 9);
  double sum = 0;
  for (std::size_t k = 0; k < clean.amplitude.samples.size(); ++k) {
    sum += std::abs(noisy.amplitude.samples.pixels()[k] - clean.amplitude.samples.pixels()[k]);
  }
  const double mad = sum / static_cast<double>(clean.amplitude.samples.size());
  EXPECT_NEAR(mad, 2.0 * std::sqrt(2.0 / std::numbers::pi), 0.03);
}

TEST(Render, DeterministicPerSeed) {
  SceneSampler sampler;
  const SynthScene a = sample_scene(sampler, 42), b = sample_scene(sampler, 42), c = sample_scene(sampler, 43);
  EXPECT_EQ(a.amplitude.samples, b.amplitude.samples);
  EXPECT_NE(a.amplitude.samples, c.amplitude.samples);
}

TEST(Render, RejectsImpossiblePoses) {
  BoardPose pose;
  pose.t = Eigen::Vector3d(0, 0, 2);  // far too close: does not fit
  const Homography H = board_homography(pose, Intrinsics::centred(176, 144));
  EXPECT_THROW(render_board(GridSpec::make(4, 5), H, 176, 144, 0.0, 1), GenerationError);
  EXPECT_THROW(render_board(GridSpec::make(4, 5), H, 4, 4, 0.0, 1), ConfigError);
}

TEST(Render, ClutterHasNoBoardAndInBandDepth) {
  const SynthScene s = render_clutter(GridSpec::make(4, 5), 176, 144, 2.0, 11);
  EXPECT_FALSE(s.has_board);
  EXPECT_TRUE(s.truth.empty());
  ASSERT_TRUE(s.depth);
  for (double d : s.depth->samples.pixels()) EXPECT_EQ(d, RenderOptions{}.clutter_range);
}

TEST(DeriveSeed, DistinctStreams) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t base : {0ull, 1ull, 12345ull}) {
    for (std::uint64_t k = 0; k < 300; ++k) seen.insert(derive_seed(base, k));
  }
  EXPECT_EQ(seen.size(), 900u);
}

TEST(Transport, CompositionProperty) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  auto near_identity = [&] {
    Eigen::Matrix3d H = Eigen::Matrix3d::Identity();
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) H(r, c) += (r == 2 ? 0.002 : 0.3) * u(rng);
    }
    return Homography(H);
  };
  for (int n = 0; n < 1000; ++n) {
    GradientField g(4, 4);
    for (double& x : g.xi.pixels()) x = 50 * u(rng);
    for (double& x : g.eta.pixels()) x = 50 * u(rng);
    const Homography H1 = near_identity(), H2 = near_identity();
    const GradientField once = transport_gradients(g, Homography(H1.m * H2.m));
    const GradientField twice = transport_gradients(transport_gradients(g, H2), H1);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const Point2 a = once.at(x, y), b = twice.at(x, y);
        EXPECT_LE((a - b).norm(), 1e-9 * (1 + a.norm()));
      }
    }
  }
}

TEST(Transport, RotationTurnsGradientsByOmega) {
  // Row-vector transport under a pure rotation by w rotates each gradient by +w.
  GradientField g(1, 1);
  g.xi(0, 0) = 3;
  g.eta(0, 0) = 0;
  const double w = 0.4;
  const GradientField t = transport_gradients(g, Homography(rotation(w)));
  const Point2 expected = 3 * Point2(std::cos(w), std::sin(w));
  EXPECT_LE((t.at(0, 0) - expected).norm(), 1e-12);
  // Zero gradients stay zero.
  EXPECT_EQ(transport_gradients(GradientField(2, 2), Homography(rotation(w))).at(1, 1), Point2(0, 0));
}

TEST(Consistency, Examples) {
  LabelMap ref(4, 1, Label::none), lab(4, 1, Label::none);
  ref(0, 0) = Label::lambda;
  ref(1, 0) = Label::mu;
  ref(2, 0) = Label::lambda;
  lab(0, 0) = Label::lambda;
  lab(1, 0) = Label::lambda;
  lab(3, 0) = Label::mu;  // outside the reference edge set
  EXPECT_DOUBLE_EQ(*consistency(lab, ref), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(*consistency(ref, ref), 1.0);
  EXPECT_DOUBLE_EQ(*consistency(swap_labels(ref), ref), 0.0);
  EXPECT_DOUBLE_EQ(*consistency_up_to_naming(swap_labels(ref), ref), 1.0);
  EXPECT_FALSE(consistency(lab, LabelMap(4, 1, Label::none)));
  EXPECT_THROW(consistency(lab, LabelMap(3, 1)), ConfigError);
}

TEST(Consistency, SymmetricOnSharedEdgeSetProperty) {
  std::mt19937_64 rng(2);
  for (int n = 0; n < 1000; ++n) {
    LabelMap a(8, 6, Label::none), b(8, 6, Label::none);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (rng() % 3 == 0) continue;
      a.pixels()[k] = rng() & 1 ? Label::lambda : Label::mu;
      b.pixels()[k] = rng() & 1 ? Label::lambda : Label::mu;
    }
    const auto ab = consistency(a, b), ba = consistency(b, a);
    ASSERT_EQ(ab.has_value(), ba.has_value());
    if (ab) EXPECT_EQ(*ab, *ba);
  }
}

TEST(SlantExperiment, FrontoParallelIsConsistentAndDeterministic) {
  const SynthScene base_scene = slant_base_scene(0, 2.0);
  SlantConfig cfg;
  cfg.trials = 5;
  cfg.slants_deg = {0, 40};
  const SlantBase base = make_slant_base(gradient(segment_none(base_scene.amplitude)), cfg);
  const auto a = slant_experiment(base, cfg);
  const auto b = slant_experiment(base, cfg);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_GE(a[0].mean, 0.99);
  EXPECT_EQ(a[0].defined, 5);
  EXPECT_EQ(slant_csv(a), slant_csv(b));
  cfg.jobs = 2;
  EXPECT_EQ(slant_csv(slant_experiment(base, cfg)), slant_csv(a));
  EXPECT_EQ(slant_csv(a).substr(0, 33), "slant_deg,mean_consistency,stddev");
}
