#pragma once

// JSON records for detections and synthetic ground truth.

#include "tofgrid/core.hpp"
#include "tofgrid/pipeline.hpp"
#include "tofgrid/synth.hpp"

#include <json.hpp>

#include <cmath>
#include <optional>
#include <string>

namespace tofgrid {

using Json = nlohmann::ordered_json;

/// Well-formed JSON that does not match the expected record.
class RecordError : public Error {
 public:
  using Error::Error;
};

/// Rounds to 4 decimal places; -0 prints as 0.
inline double round4(double v) {
  const double r = std::round(v * 1e4) / 1e4;
  return r == 0.0 ? 0.0 : r;
}

/// Public reject reason. Failures before a lattice exists are all reported
/// as "no_pencil".
inline std::optional<std::string> reject_reason(RejectStage s) {
  switch (s) {
    case RejectStage::none: return std::nullopt;
    case RejectStage::corrupted: return "corrupted";
    case RejectStage::displaced: return "displaced";
    default: return "no_pencil";
  }
}

/// Flat view of a detection, as written to and read from JSON.
struct DetectionRecord {
  bool detected = false;
  int rows = 0;
  int cols = 0;
  std::string method = "pca";
  VertexGrid vertices;
  std::optional<double> geometric_error;
  std::optional<double> photometric_error;
  std::optional<std::string> reject_reason;
};

inline DetectionRecord to_record(const DetectionResult& r) {
  DetectionRecord rec;
  rec.detected = r.accepted;
  rec.rows = r.spec.rows;
  rec.cols = r.spec.cols;
  rec.method = to_string(r.method);
  if (r.accepted) rec.vertices = r.vertices;
  rec.geometric_error = r.geometric_error;
  rec.photometric_error = r.photometric_error;
  rec.reject_reason = tofgrid::reject_reason(r.stage);
  return rec;
}

/// [{"i", "j", "x", "y"}] with one-based i over rows and j over columns.
inline Json vertices_json(const VertexGrid& g) {
  Json out = Json::array();
  for (int i = 0; i < g.rows(); ++i) {
    for (int j = 0; j < g.cols(); ++j) {
      out.push_back(Json{{"i", i + 1}, {"j", j + 1}, {"x", round4(g.at(i, j).x())}, {"y", round4(g.at(i, j).y())}});
    }
  }
  return out;
}

inline Json optional_number(const std::optional<double>& v) {
  return v && std::isfinite(*v) ? Json(round4(*v)) : Json(nullptr);
}

inline Json detection_json(const DetectionRecord& r) {
  Json j;
  j["detected"] = r.detected;
  j["rows"] = r.rows;
  j["cols"] = r.cols;
  j["method"] = r.method;
  j["vertices"] = vertices_json(r.vertices);
  j["geometric_error"] = optional_number(r.geometric_error);
  j["photometric_error"] = optional_number(r.photometric_error);
  j["reject_reason"] = r.reject_reason ? Json(*r.reject_reason) : Json(nullptr);
  return j;
}

/// Compact single-line JSON.
inline std::string write_detection_json(const DetectionResult& r) { return detection_json(to_record(r)).dump(); }

namespace detail {

inline VertexGrid parse_vertices(const Json& arr, int rows, int cols) {
  if (!arr.is_array()) throw RecordError("\"vertices\" must be an array");
  if (arr.empty()) return {};
  if (rows < 1 || cols < 1 || arr.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw RecordError("vertex count does not match rows x cols");
  }
  VertexGrid g(rows, cols);
  std::vector<bool> seen(g.size(), false);
  for (const auto& v : arr) {
    const int i = v.at("i").get<int>(), j = v.at("j").get<int>();
    if (i < 1 || i > rows || j < 1 || j > cols) throw RecordError("vertex index out of range");
    const auto k = static_cast<std::size_t>((i - 1) * cols + (j - 1));
    if (seen[k]) throw RecordError("duplicate vertex index");
    seen[k] = true;
    g.at(i - 1, j - 1) = Point2(v.at("x").get<double>(), v.at("y").get<double>());
  }
  return g;
}

inline std::optional<double> parse_optional(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline DetectionRecord parse_detection_json(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    DetectionRecord r;
    r.detected = j.at("detected").get<bool>();
    r.rows = j.at("rows").get<int>();
    r.cols = j.at("cols").get<int>();
    r.method = j.at("method").get<std::string>();
    r.vertices = detail::parse_vertices(j.at("vertices"), r.rows, r.cols);
    r.geometric_error = detail::parse_optional(j.at("geometric_error"));
    r.photometric_error = detail::parse_optional(j.at("photometric_error"));
    if (!j.at("reject_reason").is_null()) r.reject_reason = j.at("reject_reason").get<std::string>();
    return r;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("detection JSON: ") + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw RecordError(std::string("detection JSON: ") + e.what());
  }
}

/// {"H": [9 row-major entries], "vertices": [...]}; boardless scenes carry
/// an empty vertex list.
inline Json sidecar_json(const SynthScene& s) {
  Json h = Json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) h.push_back(s.H.m(r, c));
  }
  Json j;
  j["H"] = std::move(h);
  j["vertices"] = vertices_json(s.truth);
  return j;
}

struct Sidecar {
  Homography H;
  VertexGrid vertices;
};

inline Sidecar parse_sidecar(const std::string& text, const GridSpec& spec) {
  try {
    const Json j = Json::parse(text);
    const auto& h = j.at("H");
    if (!h.is_array() || h.size() != 9) throw RecordError("sidecar \"H\" must hold 9 numbers");
    Eigen::Matrix3d m;
    for (int k = 0; k < 9; ++k) m(k / 3, k % 3) = h[static_cast<std::size_t>(k)].get<double>();
    return {Homography(m), detail::parse_vertices(j.at("vertices"), spec.rows, spec.cols)};
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("sidecar JSON: ") + e.what(), e.byte);
  } catch (const nlohmann::json::exception& e) {
    throw RecordError(std::string("sidecar JSON: ") + e.what());
  }
}

}  // namespace tofgrid
