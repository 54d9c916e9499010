#include "tofgrid/cli.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace tofgrid;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run(std::vector<std::string> args) {
  args.insert(args.begin(), "tofgrid");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

class TempDir {
 public:
  TempDir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    path_ = fs::temp_directory_path() /
            ("tofgrid_" + std::string(info->name()) + "_" + std::to_string(::getpid()));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string operator/(const std::string& name) const { return (path_ / name).string(); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void write(const std::string& path, const std::string& text) { std::ofstream(path, std::ios::binary) << text; }

}  // namespace

TEST(ConfigText, ParsesKeyValueLines) {
  const auto kv = parse_config_text("# header\n rows = 4 \n\ncols=5 # trailing\nmethod = ransac");
  ASSERT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv[0], std::make_pair(std::string("rows"), std::string("4")));
  EXPECT_EQ(kv[2].second, "ransac");
  EXPECT_THROW(parse_config_text("rows 4"), ConfigError);
  EXPECT_THROW(parse_config_text(" = 4"), ConfigError);
}

TEST(ConfigText, RejectsUnknownKeysAndBadValues) {
  Settings s;
  EXPECT_THROW(apply_setting(s, "colour", "red"), ConfigError);
  EXPECT_THROW(apply_setting(s, "f", "0.4x"), ConfigError);
  EXPECT_THROW(apply_setting(s, "rows", "4.5"), ConfigError);
  EXPECT_THROW(apply_setting(s, "method", "hough"), ConfigError);
  apply_setting(s, "f", "0.3");
  EXPECT_EQ(s.detector.f, 0.3);
}

TEST(ConfigPrecedence, DefaultsFileFlags) {
  const double dflt = DetectorConfig{}.f;
  const std::vector<std::pair<SettingValues, SettingValues>> cases = {
      {{}, {}}, {{{"f", "0.3"}}, {}}, {{}, {{"f", "0.2"}}}, {{{"f", "0.3"}}, {{"f", "0.2"}}}};
  const std::vector<double> expected = {dflt, 0.3, 0.2, 0.2};
  for (std::size_t k = 0; k < cases.size(); ++k) {
    const Settings s = resolve_settings(cases[k].first, cases[k].second);
    EXPECT_EQ(s.detector.f, expected[k]) << k;
    // Untouched keys keep their defaults.
    EXPECT_EQ(s.detector.g, DetectorConfig{}.g);
  }
  const Settings s = resolve_settings({{"d0", "0.5"}, {"g", "0.7"}}, {{"d1", "2"}});
  EXPECT_TRUE(s.d0_set && s.d1_set);
  EXPECT_EQ(s.detector.g, 0.7);
  EXPECT_EQ(settings_json(s)["d1"], "2");
}

TEST(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, 0);
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"detect"}).code, 1);
  EXPECT_EQ(run({"detect", "x.pgm", "--no-such-flag"}).code, 1);
  EXPECT_EQ(run({"synth", "--out", "/tmp/x", "--slant-max", "95"}).code, 1);
}

TEST(Cli, SynthIsDeterministic) {
  TempDir a, b;
  ASSERT_EQ(run({"synth", "--count", "2", "--seed", "7", "--out", a / "s"}).code, 0);
  ASSERT_EQ(run({"synth", "--count", "2", "--seed", "7", "--out", b / "s"}).code, 0);
  for (const char* name : {"scene_0000.pgm", "scene_0000.pfm", "scene_0000.json", "scene_0001.pgm"}) {
    const std::string x = slurp(a / ("s/" + std::string(name)));
    EXPECT_FALSE(x.empty()) << name;
    EXPECT_EQ(x, slurp(b / ("s/" + std::string(name)))) << name;
  }
  ASSERT_EQ(run({"synth", "--count", "1", "--seed", "8", "--out", b / "t"}).code, 0);
  EXPECT_NE(slurp(a / "s/scene_0000.pgm"), slurp(b / "t/scene_0000.pgm"));
  ASSERT_EQ(run({"synth", "--count", "1", "--no-depth", "--out", b / "u"}).code, 0);
  EXPECT_FALSE(fs::exists(b / "u/scene_0000.pfm"));
}

TEST(Cli, DetectExitCodesAndJson) {
  TempDir d;
  ASSERT_EQ(run({"synth", "--count", "1", "--seed", "3", "--slant-max", "20", "--out", d / "b"}).code, 0);
  ASSERT_EQ(run({"synth", "--count", "1", "--seed", "3", "--clutter", "--out", d / "c"}).code, 0);

  const CliRun ok = run({"detect", d / "b/scene_0000.pgm", "--depth", d / "b/scene_0000.pfm", "--rows", "4", "--cols",
                      "5", "--d0", "0.3", "--d1", "3"});
  ASSERT_EQ(ok.code, 0) << ok.err;
  const DetectionRecord rec = parse_detection_json(ok.out);
  EXPECT_TRUE(rec.detected);
  const Sidecar truth = parse_sidecar(slurp(d / "b/scene_0000.json"), GridSpec::make(4, 5));
  EXPECT_LE(max_vertex_distance_unordered(rec.vertices, truth.vertices), 0.5);

  const CliRun rejected = run({"detect", d / "c/scene_0000.pgm", "--depth", d / "c/scene_0000.pfm", "--rows", "4",
                            "--cols", "5", "--d0", "0.3", "--d1", "3"});
  EXPECT_EQ(rejected.code, 2);
  EXPECT_FALSE(parse_detection_json(rejected.out).detected);

  // Depth without a depth band, unreadable input, missing shape.
  EXPECT_EQ(run({"detect", d / "b/scene_0000.pgm", "--depth", d / "b/scene_0000.pfm", "--rows", "4", "--cols", "5"})
                .code,
            1);
  EXPECT_EQ(run({"detect", d / "missing.pgm", "--rows", "4", "--cols", "5"}).code, 1);
  EXPECT_EQ(run({"detect", d / "b/scene_0000.pgm"}).code, 1);
  EXPECT_EQ(run({"detect", d / "b/scene_0000.pgm", "--rows", "5", "--cols", "5"}).code, 1);

  // --json writes the same record to a file; --dump-hough writes both arrays.
  ASSERT_EQ(run({"detect", d / "b/scene_0000.pgm", "--depth", d / "b/scene_0000.pfm", "--rows", "4", "--cols", "5",
                 "--d0", "0.3", "--d1", "3", "--json", d / "out.json", "--dump-hough", d.path().string()})
                .code,
            0);
  EXPECT_EQ(slurp(d / "out.json"), ok.out);
  EXPECT_TRUE(fs::exists(d / "hough_lambda.pgm"));
  EXPECT_TRUE(fs::exists(d / "hough_mu.pgm"));
}

TEST(Cli, ConfigFileAndFlagPrecedence) {
  TempDir d;
  ASSERT_EQ(run({"synth", "--count", "1", "--seed", "3", "--slant-max", "20", "--out", d / "b"}).code, 0);
  write(d / "cfg.txt", "rows = 2\ncols = 3\nd0 = 0.3\nd1 = 3\n");
  const CliRun r = run({"detect", d / "b/scene_0000.pgm", "--depth", d / "b/scene_0000.pfm", "--config", d / "cfg.txt",
                     "--rows", "4", "--cols", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const DetectionRecord rec = parse_detection_json(r.out);
  EXPECT_EQ(rec.rows, 4);
  EXPECT_EQ(rec.cols, 5);
  write(d / "bad.txt", "rows = 4\nshape = square\n");
  EXPECT_EQ(run({"detect", d / "b/scene_0000.pgm", "--config", d / "bad.txt", "--cols", "5"}).code, 1);
}

TEST(Cli, BatchSurvivesCorruptFiles) {
  TempDir d;
  ASSERT_EQ(run({"synth", "--count", "2", "--seed", "4", "--slant-max", "20", "--out", d / "in"}).code, 0);
  write(d / "in/broken.pgm", "P5\n10 10\n255\nshort");
  const CliRun r = run({"batch", d / "in", "--rows", "4", "--cols", "5", "--d0", "0.3", "--d1", "3", "--manifest",
                     d / "manifest.json", "--jobs", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int count = 0;
  while (std::getline(lines, line)) {
    parse_detection_json(line);
    ++count;
  }
  EXPECT_EQ(count, 2);
  const Json m = Json::parse(slurp(d / "manifest.json"));
  EXPECT_EQ(m["command"], "batch");
  EXPECT_EQ(m["files"].size(), 3u);
  EXPECT_EQ(m["files"][0], "broken.pgm");
  ASSERT_EQ(m["errors"].size(), 1u);
  EXPECT_EQ(m["errors"][0]["file"], "broken.pgm");
  EXPECT_EQ(m["results"].size(), 2u);
  EXPECT_EQ(m["config"]["rows"], "4");

  TempDir empty;
  EXPECT_EQ(run({"batch", empty.path().string(), "--rows", "4", "--cols", "5"}).code, 1);
}

TEST(Cli, EvalScoresAgainstSidecars) {
  TempDir d;
  ASSERT_EQ(run({"synth", "--count", "3", "--seed", "5", "--slant-max", "30", "--out", d / "in"}).code, 0);
  ASSERT_EQ(run({"synth", "--count", "2", "--seed", "6", "--clutter", "--out", d / "neg"}).code, 0);
  for (const char* ext : {".pgm", ".pfm", ".json"}) {
    for (int k = 0; k < 2; ++k) {
      fs::rename(d / ("neg/scene_000" + std::to_string(k) + ext), d / ("in/clutter_" + std::to_string(k) + ext));
    }
  }
  const CliRun r = run({"eval", d / "in", "--rows", "4", "--cols", "5", "--d0", "0.3", "--d1", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_EQ(j["scored"], 5);
  EXPECT_EQ(j["board_scenes"], 3);
  EXPECT_EQ(j["clutter_scenes"], 2);
  EXPECT_EQ(j["clutter_accepts"], 0);
  EXPECT_EQ(j["wrong_lattices"], 0);
  EXPECT_GE(j["correct"].get<int>(), 2);
}

TEST(Cli, SlantCsvMatchesLibrary) {
  const CliRun r = run({"slant", "--trials", "3", "--seed", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int rows = 0;
  std::getline(lines, line);
  EXPECT_EQ(line, "slant_deg,mean_consistency,stddev");
  while (std::getline(lines, line)) ++rows;
  EXPECT_EQ(rows, 9);

  SlantConfig cfg;
  cfg.trials = 3;
  cfg.seed = 2;
  const SynthScene scene = slant_base_scene(cfg.seed);
  const GradientField full = gradient(board_mask(scene.amplitude, &*scene.depth, DetectorConfig{}));
  EXPECT_EQ(r.out, slant_csv(slant_experiment(make_slant_base(full, cfg), cfg)));

  EXPECT_EQ(run({"slant", "--slants", "0,30,60", "--trials", "2"}).out.substr(0, 34),
            "slant_deg,mean_consistency,stddev\n");
  EXPECT_EQ(run({"slant", "--slants", "0:10:95"}).code, 1);
  EXPECT_EQ(run({"slant", "--method", "kmeans"}).code, 1);
}
