#pragma once

// Command-line front end: detect, batch, eval, synth and slant.

#include "tofgrid/imageio.hpp"
#include "tofgrid/pipeline.hpp"
#include "tofgrid/report.hpp"
#include "tofgrid/synth.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace tofgrid {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* first = text.data();
  const char* last = first + text.size();
  const auto [p, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || p != last) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return v;
}

/// Shortest text that reads back as the same double.
inline std::string format_number(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace detail

/// Detector settings plus the lattice shape and depth scaling, which the CLI
/// resolves together.
struct Settings {
  DetectorConfig detector;
  std::optional<int> rows;
  std::optional<int> cols;
  std::optional<double> depth_scale;  // metres per unit of a 16-bit PGM depth map
  bool d0_set = false;
  bool d1_set = false;
};

struct SettingKey {
  std::string name;  // config-file spelling; flags use '-' for '_'
  std::string help;
  std::function<void(Settings&, const std::string&)> set;
  std::function<std::string(const Settings&)> get;
};

inline const std::vector<SettingKey>& setting_keys() {
  using detail::format_number;
  using detail::parse_number;
  static const std::vector<SettingKey> keys = [] {
    std::vector<SettingKey> k;
    auto real = [&](std::string name, std::string help, double DetectorConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](Settings& s, const std::string& v) {
                     s.detector.*field = parse_number<double>(name, v);
                   },
                   [field](const Settings& s) { return format_number(s.detector.*field); }});
    };
    auto integer = [&](std::string name, std::string help, int DetectorConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](Settings& s, const std::string& v) { s.detector.*field = parse_number<int>(name, v); },
                   [field](const Settings& s) { return std::to_string(s.detector.*field); }});
    };
    k.push_back({"rows", "internal vertices per column (lines of the smaller pencil)",
                 [](Settings& s, const std::string& v) { s.rows = parse_number<int>("rows", v); },
                 [](const Settings& s) { return s.rows ? std::to_string(*s.rows) : std::string(); }});
    k.push_back({"cols", "internal vertices per row",
                 [](Settings& s, const std::string& v) { s.cols = parse_number<int>("cols", v); },
                 [](const Settings& s) { return s.cols ? std::to_string(*s.cols) : std::string(); }});
    k.push_back({"d0", "near depth limit, metres",
                 [](Settings& s, const std::string& v) {
                   s.detector.d0 = parse_number<double>("d0", v);
                   s.d0_set = true;
                 },
                 [](const Settings& s) { return format_number(s.detector.d0); }});
    k.push_back({"d1", "far depth limit, metres",
                 [](Settings& s, const std::string& v) {
                   s.detector.d1 = parse_number<double>("d1", v);
                   s.d1_set = true;
                 },
                 [](const Settings& s) { return format_number(s.detector.d1); }});
    k.push_back({"depth_scale", "metres per unit when the depth map is a 16-bit PGM",
                 [](Settings& s, const std::string& v) { s.depth_scale = parse_number<double>("depth_scale", v); },
                 [](const Settings& s) { return s.depth_scale ? format_number(*s.depth_scale) : std::string(); }});
    integer("erosion", "mask erosion radius, pixels", &DetectorConfig::erosion);
    k.push_back({"method", "gradient clustering: pca or ransac",
                 [](Settings& s, const std::string& v) {
                   if (v == "pca") s.detector.method = ClusterMethod::pca;
                   else if (v == "ransac") s.detector.method = ClusterMethod::ransac;
                   else throw ConfigError("method must be pca or ransac, got '" + v + "'");
                 },
                 [](const Settings& s) { return std::string(to_string(s.detector.method)); }});
    real("pi_fraction", "gradient threshold as a fraction of the magnitude percentile", &DetectorConfig::pi_fraction);
    real("pi_percentile", "magnitude percentile for the gradient threshold", &DetectorConfig::pi_percentile);
    integer("ransac_iterations", "RANSAC hypotheses", &DetectorConfig::ransac_iterations);
    k.push_back({"seed", "RANSAC seed",
                 [](Settings& s, const std::string& v) { s.detector.seed = parse_number<std::uint64_t>("seed", v); },
                 [](const Settings& s) { return std::to_string(s.detector.seed); }});
    real("hough_scale", "Hough array size relative to the image", &DetectorConfig::hough_scale);
    real("run_fraction", "sweep run threshold as a fraction of the peak", &DetectorConfig::run_fraction);
    real("f", "interval-ratio tolerance", &DetectorConfig::f);
    real("g", "transition-balance tolerance", &DetectorConfig::g);
    integer("subpixel_half_width", "largest refinement window half-width", &DetectorConfig::subpixel_half_width);
    integer("subpixel_iterations", "refinement iteration limit", &DetectorConfig::subpixel_iterations);
    real("subpixel_tolerance", "refinement step tolerance, pixels", &DetectorConfig::subpixel_tolerance);
    return k;
  }();
  return keys;
}

inline void apply_setting(Settings& s, const std::string& key, const std::string& value) {
  for (const auto& k : setting_keys()) {
    if (k.name == key) {
      k.set(s, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

/// `key = value` lines; '#' starts a comment.
inline std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(std::string_view(body).substr(0, eq));
    std::string value = detail::trim(std::string_view(body).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    out.emplace_back(std::move(key), std::move(value));
  }
  return out;
}

using SettingValues = std::vector<std::pair<std::string, std::string>>;

/// Defaults, then the config file, then command-line flags.
inline Settings resolve_settings(const SettingValues& file, const SettingValues& flags) {
  Settings s;
  for (const auto& [k, v] : file) apply_setting(s, k, v);
  for (const auto& [k, v] : flags) apply_setting(s, k, v);
  return s;
}

inline Json settings_json(const Settings& s) {
  Json j = Json::object();
  for (const auto& k : setting_keys()) {
    const std::string v = k.get(s);
    if (!v.empty()) j[k.name] = v;
  }
  return j;
}

inline GridSpec settings_spec(const Settings& s) {
  if (!s.rows || !s.cols) throw ConfigError("--rows and --cols are required");
  return GridSpec::make(*s.rows, *s.cols);
}

// ---------------------------------------------------------------------------
// Input
// ---------------------------------------------------------------------------

inline std::string lower_extension(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return e;
}

/// PFM in metres, or a PGM scaled by depth_scale.
inline DepthImage load_depth(const std::string& path, const Settings& s) {
  const Bytes bytes = read_file(path);
  if (lower_extension(path) == ".pgm") {
    if (!s.depth_scale) throw ConfigError("a PGM depth map needs --depth-scale");
    return depth_from_pgm(read_pgm(bytes), *s.depth_scale);
  }
  return read_pfm(bytes);
}

inline DetectionResult detect_files(const std::string& amplitude, const std::optional<std::string>& depth,
                                    const Settings& s, const DetectOptions& opts = {}) {
  const GridSpec spec = settings_spec(s);
  const AmplitudeImage a = read_pgm(read_file(amplitude));
  std::optional<DepthImage> d;
  if (depth) {
    if (!s.d0_set || !s.d1_set) throw ConfigError("depth gating needs d0 and d1 (flags or config)");
    d = load_depth(*depth, s);
    if (!a.samples.same_size(d->samples)) throw ConfigError("amplitude and depth sizes differ");
  }
  return detect(a, d, spec, s.detector, opts);
}

/// `<stem>.pgm` files of a directory in name order, each with its optional
/// `<stem>.pfm` partner.
struct InputPair {
  std::string stem;
  fs::path amplitude;
  std::optional<fs::path> depth;
};

inline std::vector<InputPair> list_pairs(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<InputPair> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || lower_extension(e.path()) != ".pgm") continue;
    InputPair p{e.path().stem().string(), e.path(), std::nullopt};
    fs::path pfm = e.path();
    pfm.replace_extension(".pfm");
    if (fs::exists(pfm)) p.depth = pfm;
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(), [](const InputPair& a, const InputPair& b) { return a.stem < b.stem; });
  return out;
}

/// Runs fn(k) for k in [0, n) on up to `jobs` threads.
inline void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  const auto threads = static_cast<std::size_t>(std::clamp(jobs, 1, 256));
  if (threads == 1 || n < 2) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < n; k = next++) fn(k);
    });
  }
  for (auto& t : pool) t.join();
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitRejected = 2;

struct BatchEntry {
  std::string file;
  std::optional<DetectionResult> result;
  std::optional<Sidecar> truth;
  std::string error;
};

/// Detection over every pair in `dir`; sidecars are loaded when `with_truth`.
inline std::vector<BatchEntry> run_batch(const std::vector<InputPair>& pairs, const Settings& s, int jobs,
                                         bool with_truth) {
  std::vector<BatchEntry> entries(pairs.size());
  const GridSpec spec = settings_spec(s);
  parallel_for(pairs.size(), jobs, [&](std::size_t k) {
    const auto& p = pairs[k];
    BatchEntry& e = entries[k];
    e.file = p.amplitude.filename().string();
    try {
      std::optional<std::string> depth;
      if (p.depth) depth = p.depth->string();
      e.result = detect_files(p.amplitude.string(), depth, s);
      if (with_truth) {
        fs::path side = p.amplitude;
        side.replace_extension(".json");
        if (fs::exists(side)) {
          const Bytes b = read_file(side.string());
          e.truth = parse_sidecar(std::string(b.begin(), b.end()), spec);
        }
      }
    } catch (const std::exception& ex) {
      e.result.reset();
      e.error = ex.what();
    }
  });
  return entries;
}

/// Manifest with per-file results and aggregates recomputed from them.
inline Json batch_manifest(const std::string& command, const Settings& s, const std::vector<BatchEntry>& entries) {
  Json files = Json::array(), results = Json::array(), errors = Json::array();
  int detections = 0;
  double sum = 0.0;
  int with_error = 0;
  for (const auto& e : entries) {
    files.push_back(e.file);
    if (!e.result) {
      errors.push_back(Json{{"file", e.file}, {"message", e.error}});
      continue;
    }
    const DetectionRecord r = to_record(*e.result);
    Json item{{"file", e.file}, {"detected", r.detected}, {"reject_reason", r.reject_reason ? Json(*r.reject_reason) : Json(nullptr)},
              {"geometric_error", optional_number(r.geometric_error)}};
    if (r.detected) {
      ++detections;
      if (r.geometric_error) {
        sum += *r.geometric_error;
        ++with_error;
      }
    }
    results.push_back(std::move(item));
  }
  Json m;
  m["command"] = command;
  m["config"] = settings_json(s);
  m["files"] = std::move(files);
  m["results"] = std::move(results);
  m["errors"] = std::move(errors);
  m["detections"] = detections;
  m["mean_geometric_error"] = with_error > 0 ? Json(round4(sum / with_error)) : Json(nullptr);
  return m;
}

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  write_file(path, std::string_view(text));
}

inline void dump_hough(const HoughPair& h, const fs::path& dir) {
  fs::create_directories(dir);
  write_file((dir / "hough_lambda.pgm").string(), write_pgm(hough_to_image(h.lambda)));
  write_file((dir / "hough_mu.pgm").string(), write_pgm(hough_to_image(h.mu)));
}

/// "a:step:b" or a comma list, in degrees.
inline std::vector<double> parse_slants(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    const auto c1 = text.find(':');
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string::npos) throw ConfigError("slants must be start:step:stop");
    const double a = parse_number<double>("slants", text.substr(0, c1));
    const double step = parse_number<double>("slants", text.substr(c1 + 1, c2 - c1 - 1));
    const double b = parse_number<double>("slants", text.substr(c2 + 1));
    if (!(step > 0.0) || b < a) throw ConfigError("slants need a positive step and start <= stop");
    for (int k = 0; a + k * step <= b + 1e-9; ++k) out.push_back(a + k * step);
  } else {
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const auto comma = text.find(',', pos);
      out.push_back(parse_number<double>("slants", trim(text.substr(pos, comma - pos))));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
  }
  for (double s : out) {
    if (!(s >= 0.0 && s < 90.0)) throw ConfigError("slants must lie in [0, 90)");
  }
  return out;
}

/// Flags shared by commands that run the detector; values are collected as
/// strings so they can be layered over a config file.
struct DetectorFlags {
  std::string config;
  std::map<std::string, std::string> values;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config, "key = value configuration file");
    for (const auto& k : setting_keys()) {
      std::string flag = "--" + k.name;
      std::replace(flag.begin(), flag.end(), '_', '-');
      cmd.add_option_function<std::string>(flag, [this, name = k.name](const std::string& v) { values[name] = v; },
                                           k.help);
    }
  }

  Settings resolve() const {
    SettingValues file;
    if (!config.empty()) {
      const Bytes b = read_file(config);
      file = parse_config_text(std::string_view(reinterpret_cast<const char*>(b.data()), b.size()));
    }
    // Flags keep the order of the key table, so d0/d1 set together validate
    // the same regardless of command-line order.
    SettingValues flags;
    for (const auto& k : setting_keys()) {
      if (auto it = values.find(k.name); it != values.end()) flags.emplace_back(k.name, it->second);
    }
    Settings s = resolve_settings(file, flags);
    s.detector.validate();
    return s;
  }
};

}  // namespace detail

/// Entry point; returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Chequerboard vertex detection for amplitude/range images", "tofgrid"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  // detect
  auto* det = app.add_subcommand("detect", "Detect the vertex lattice in one image");
  std::string det_amp, det_depth, det_json, det_dump;
  detail::DetectorFlags det_flags;
  det->add_option("amplitude", det_amp, "Amplitude image (binary PGM)")->required();
  det->add_option("--depth", det_depth, "Range image (PFM in metres, or PGM with --depth-scale)");
  det->add_option("--json", det_json, "Write the detection JSON here instead of stdout");
  det->add_option("--dump-hough", det_dump, "Write both Hough arrays as PGM into this directory");
  det_flags.attach(*det);

  // batch / eval
  auto* bat = app.add_subcommand("batch", "Detect over every <stem>.pgm (+ <stem>.pfm) in a directory");
  std::string bat_dir, bat_manifest, bat_jsonl;
  int bat_jobs = 1;
  detail::DetectorFlags bat_flags;
  bat->add_option("dir", bat_dir, "Input directory")->required();
  bat->add_option("--manifest", bat_manifest, "Write the run manifest here (default: stderr)");
  bat->add_option("--jsonl", bat_jsonl, "Write detection JSON lines here (default: stdout)");
  bat->add_option("--jobs", bat_jobs, "Worker threads")->check(CLI::PositiveNumber);
  bat_flags.attach(*bat);

  auto* evl = app.add_subcommand("eval", "Score detections in a synthetic directory against its sidecars");
  std::string ev_dir, ev_out;
  int ev_jobs = 1;
  double ev_tol = 0.5;
  detail::DetectorFlags ev_flags;
  evl->add_option("dir", ev_dir, "Directory written by `synth`")->required();
  evl->add_option("--out", ev_out, "Write the report here (default: stdout)");
  evl->add_option("--jobs", ev_jobs, "Worker threads")->check(CLI::PositiveNumber);
  evl->add_option("--tolerance", ev_tol, "Largest vertex error, pixels, for a correct lattice");
  ev_flags.attach(*evl);

  // synth
  auto* syn = app.add_subcommand("synth", "Render synthetic scenes with ground truth");
  int syn_count = 1, syn_rows = 4, syn_cols = 5, syn_width = 176, syn_height = 144;
  double syn_slant = 60.0, syn_noise = 2.0;
  std::uint64_t syn_seed = 0;
  std::string syn_out;
  bool syn_clutter = false, syn_no_depth = false;
  syn->add_option("--count", syn_count, "Number of scenes")->check(CLI::PositiveNumber);
  syn->add_option("--rows", syn_rows, "Internal vertex rows");
  syn->add_option("--cols", syn_cols, "Internal vertex columns");
  syn->add_option("--width", syn_width, "Image width");
  syn->add_option("--height", syn_height, "Image height");
  syn->add_option("--slant-max", syn_slant, "Largest board slant, degrees")->check(CLI::Range(0.0, 89.0));
  syn->add_option("--noise", syn_noise, "Gaussian noise sigma, grey levels")->check(CLI::NonNegativeNumber);
  syn->add_option("--seed", syn_seed, "Seed");
  syn->add_option("--out", syn_out, "Output directory")->required();
  syn->add_flag("--clutter", syn_clutter, "Render board-free clutter scenes");
  syn->add_flag("--no-depth", syn_no_depth, "Skip the PFM range images");

  // slant
  auto* sl = app.add_subcommand("slant", "Label consistency of transported gradients against slant");
  SlantConfig sl_cfg;
  std::string sl_slants = "0:10:80", sl_out, sl_base, sl_method = "pca";
  sl->add_option("--trials", sl_cfg.trials, "Trials per slant")->check(CLI::PositiveNumber);
  sl->add_option("--slants", sl_slants, "start:step:stop or a comma list, degrees");
  sl->add_option("--seed", sl_cfg.seed, "Seed");
  sl->add_option("--samples", sl_cfg.samples, "Gradients sampled from the base image")->check(CLI::PositiveNumber);
  sl->add_option("--method", sl_method, "pca or ransac")->check(CLI::IsMember({"pca", "ransac"}));
  sl->add_option("--jobs", sl_cfg.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sl->add_option("--base", sl_base, "Fronto-parallel amplitude PGM (default: rendered board)");
  sl->add_option("--out", sl_out, "CSV output (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (det->parsed()) {
      const Settings s = det_flags.resolve();
      DetectOptions opts;
      opts.keep_hough = !det_dump.empty();
      std::optional<std::string> depth;
      if (!det_depth.empty()) depth = det_depth;
      const DetectionResult r = detect_files(det_amp, depth, s, opts);
      if (!det_dump.empty() && r.hough) detail::dump_hough(*r.hough, det_dump);
      const std::string text = write_detection_json(r) + "\n";
      if (det_json.empty()) out << text;
      else detail::write_text(det_json, text);
      if (!r.accepted && !r.diag.message.empty()) err << "rejected (" << to_string(r.stage) << "): " << r.diag.message << "\n";
      return r.accepted ? kExitOk : kExitRejected;
    }

    if (bat->parsed() || evl->parsed()) {
      const bool is_eval = evl->parsed();
      const Settings s = (is_eval ? ev_flags : bat_flags).resolve();
      settings_spec(s);
      const auto pairs = list_pairs(is_eval ? ev_dir : bat_dir);
      if (pairs.empty()) {
        err << "no <stem>.pgm inputs in " << (is_eval ? ev_dir : bat_dir) << "\n";
        return kExitError;
      }
      const auto entries = run_batch(pairs, s, is_eval ? ev_jobs : bat_jobs, is_eval);
      const std::size_t processed =
          static_cast<std::size_t>(std::count_if(entries.begin(), entries.end(), [](const BatchEntry& e) { return e.result.has_value(); }));

      if (!is_eval) {
        std::string lines;
        for (const auto& e : entries) {
          if (e.result) lines += write_detection_json(*e.result) + "\n";
        }
        if (bat_jsonl.empty()) out << lines;
        else detail::write_text(bat_jsonl, lines);
        const std::string manifest = batch_manifest("batch", s, entries).dump(2) + "\n";
        if (bat_manifest.empty()) err << manifest;
        else detail::write_text(bat_manifest, manifest);
        return processed > 0 ? kExitOk : kExitError;
      }

      Json report = batch_manifest("eval", s, entries);
      int scored = 0, correct = 0, wrong = 0, board_scenes = 0, clutter_scenes = 0, clutter_accepts = 0;
      double worst = 0.0;
      for (const auto& e : entries) {
        if (!e.result || !e.truth) continue;
        ++scored;
        const bool has_board = !e.truth->vertices.empty();
        if (has_board) ++board_scenes;
        else ++clutter_scenes;
        if (!e.result->accepted) continue;
        if (!has_board) {
          ++clutter_accepts;
          continue;
        }
        const double d = max_vertex_distance_unordered(e.result->vertices, e.truth->vertices);
        worst = std::max(worst, d);
        if (d <= ev_tol) ++correct;
        else ++wrong;
      }
      report["scored"] = scored;
      report["board_scenes"] = board_scenes;
      report["correct"] = correct;
      report["wrong_lattices"] = wrong;
      report["clutter_scenes"] = clutter_scenes;
      report["clutter_accepts"] = clutter_accepts;
      report["detection_rate"] = board_scenes > 0 ? Json(round4(double(correct) / board_scenes)) : Json(nullptr);
      report["worst_vertex_error"] = round4(worst);
      const std::string text = report.dump(2) + "\n";
      if (ev_out.empty()) out << text;
      else detail::write_text(ev_out, text);
      return processed > 0 ? kExitOk : kExitError;
    }

    if (syn->parsed()) {
      const GridSpec spec = GridSpec::make(syn_rows, syn_cols);
      SceneSampler cfg;
      cfg.spec = spec;
      cfg.width = syn_width;
      cfg.height = syn_height;
      cfg.camera = Intrinsics::centred(syn_width, syn_height);
      cfg.slant_max = syn_slant * std::numbers::pi / 180.0;
      cfg.noise = syn_noise;
      cfg.render.with_depth = !syn_no_depth;
      fs::create_directories(syn_out);
      for (int k = 0; k < syn_count; ++k) {
        const std::uint64_t seed = derive_seed(syn_seed, static_cast<std::uint64_t>(k));
        const SynthScene scene = syn_clutter ? render_clutter(spec, syn_width, syn_height, syn_noise, seed, cfg.render)
                                             : sample_scene(cfg, seed);
        char stem[32];
        std::snprintf(stem, sizeof stem, "scene_%04d", k);
        const fs::path base = fs::path(syn_out) / stem;
        write_file(base.string() + ".pgm", write_pgm(scene.amplitude.samples));
        if (scene.depth) write_file(base.string() + ".pfm", write_pfm(scene.depth->samples));
        detail::write_text(base.string() + ".json", sidecar_json(scene).dump() + "\n");
      }
      return kExitOk;
    }

    if (sl->parsed()) {
      sl_cfg.slants_deg = detail::parse_slants(sl_slants);
      sl_cfg.policy.method = sl_method == "ransac" ? ClusterMethod::ransac : ClusterMethod::pca;
      GradientField full;
      if (sl_base.empty()) {
        const SynthScene scene = slant_base_scene(sl_cfg.seed);
        full = gradient(board_mask(scene.amplitude, scene.depth ? &*scene.depth : nullptr, DetectorConfig{}));
      } else {
        const AmplitudeImage a = read_pgm(read_file(sl_base));
        sl_cfg.camera = Intrinsics::centred(a.width(), a.height());
        full = gradient(erode_mask(segment_none(a), DetectorConfig{}.erosion));
      }
      const auto curve = slant_experiment(make_slant_base(full, sl_cfg), sl_cfg);
      const std::string csv = slant_csv(curve);
      if (sl_out.empty()) out << csv;
      else detail::write_text(sl_out, csv);
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace tofgrid
