#pragma once

// Binary PGM (P5) and greyscale PFM (Pf) codecs, and the in-memory image
// types consumed by the detector.

#include "tofgrid/core.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

namespace tofgrid {

/// Luminance-like amplitude map, non-negative samples.
struct AmplitudeImage {
  Image<double> samples;
  int width() const noexcept { return samples.width(); }
  int height() const noexcept { return samples.height(); }
};

/// Range map in metres along the line of sight; kNull marks invalid pixels.
struct DepthImage {
  Image<double> samples;
  int width() const noexcept { return samples.width(); }
  int height() const noexcept { return samples.height(); }
};

/// Amplitude with background pixels replaced by kNull.
struct MaskedImage {
  Image<double> samples;
  int width() const noexcept { return samples.width(); }
  int height() const noexcept { return samples.height(); }
};

using Bytes = std::vector<std::uint8_t>;

namespace detail {

class HeaderCursor {
 public:
  explicit HeaderCursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t offset() const noexcept { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::string token() {
    skip_space_and_comments();
    const std::size_t start = pos_;
    while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_])) ++pos_;
    if (start == pos_) throw FormatError("unexpected end of header", start);
    return std::string(reinterpret_cast<const char*>(bytes_.data()) + start, pos_ - start);
  }

  long integer(const char* what) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    const std::string tok = token();
    char* end = nullptr;
    const long v = std::strtol(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size()) {
      throw FormatError(std::string("malformed ") + what, start);
    }
    return v;
  }

  /// Consumes the single whitespace byte that separates header and payload.
  void end_header() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      throw FormatError("missing whitespace after header", pos_);
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

inline float load_float(const std::uint8_t* p, bool little_endian) {
  std::uint32_t bits = 0;
  if (little_endian) {
    bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
  } else {
    bits = std::uint32_t(p[3]) | (std::uint32_t(p[2]) << 8) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[0]) << 24);
  }
  return std::bit_cast<float>(bits);
}

inline void append(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

}  // namespace detail

/// Decodes a binary PGM. 16-bit samples are big-endian.
inline AmplitudeImage read_pgm(std::span<const std::uint8_t> bytes) {
  detail::HeaderCursor cur(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw FormatError("not a binary PGM (expected magic P5)", 0);
  }
  cur.token();
  const std::size_t wpos = cur.offset();
  const long width = cur.integer("width");
  const long height = cur.integer("height");
  if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20)) {
    throw FormatError("invalid PGM dimensions", wpos);
  }
  const std::size_t mpos = cur.offset();
  const long maxval = cur.integer("maxval");
  if (maxval < 1 || maxval > 65535) throw FormatError("PGM maxval outside 1..65535", mpos);
  cur.end_header();

  const std::size_t bps = maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t start = cur.offset();
  if (bytes.size() - start < n * bps) {
    throw FormatError("truncated PGM payload", bytes.size());
  }
  AmplitudeImage img{Image<double>(static_cast<int>(width), static_cast<int>(height))};
  auto px = img.samples.pixels();
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint8_t* p = bytes.data() + start + k * bps;
    px[k] = bps == 2 ? double((unsigned(p[0]) << 8) | unsigned(p[1])) : double(p[0]);
  }
  return img;
}

/// Encodes samples (rounded, clamped to [0, maxval]) as binary PGM.
inline Bytes write_pgm(const Image<double>& img, int maxval = 255) {
  if (maxval < 1 || maxval > 65535) throw ConfigError("PGM maxval outside 1..65535");
  Bytes out;
  detail::append(out, "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                          "\n" + std::to_string(maxval) + "\n");
  const bool wide = maxval > 255;
  out.reserve(out.size() + img.size() * (wide ? 2 : 1));
  for (double v : img.pixels()) {
    const double c = std::isfinite(v) ? std::clamp(std::round(v), 0.0, double(maxval)) : 0.0;
    const auto q = static_cast<unsigned>(c);
    if (wide) out.push_back(static_cast<std::uint8_t>(q >> 8));
    out.push_back(static_cast<std::uint8_t>(q & 0xff));
  }
  return out;
}

/// Decodes a greyscale PFM. Rows are stored bottom-to-top in the file and
/// returned top-to-bottom; non-finite samples become kNull.
inline DepthImage read_pfm(std::span<const std::uint8_t> bytes) {
  detail::HeaderCursor cur(bytes);
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != 'f' && bytes[1] != 'F')) {
    throw FormatError("not a PFM (expected magic Pf)", 0);
  }
  if (bytes[1] == 'F') throw FormatError("colour PFM (PF) is not supported", 1);
  cur.token();
  const std::size_t wpos = cur.offset();
  const long width = cur.integer("width");
  const long height = cur.integer("height");
  if (width <= 0 || height <= 0 || width > (1 << 20) || height > (1 << 20)) {
    throw FormatError("invalid PFM dimensions", wpos);
  }
  const std::size_t spos = cur.offset();
  const std::string scale_tok = cur.token();
  char* end = nullptr;
  const double scale = std::strtod(scale_tok.c_str(), &end);
  if (end != scale_tok.c_str() + scale_tok.size() || scale == 0.0 || !std::isfinite(scale)) {
    throw FormatError("malformed PFM scale", spos);
  }
  cur.end_header();
  const bool little = scale < 0.0;

  const std::size_t n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  const std::size_t start = cur.offset();
  if (bytes.size() - start < n * 4) throw FormatError("truncated PFM payload", bytes.size());

  DepthImage img{Image<double>(static_cast<int>(width), static_cast<int>(height))};
  for (int row = 0; row < height; ++row) {
    const int y = static_cast<int>(height) - 1 - row;
    for (int x = 0; x < width; ++x) {
      const std::size_t k = static_cast<std::size_t>(row) * static_cast<std::size_t>(width) +
                            static_cast<std::size_t>(x);
      const float v = detail::load_float(bytes.data() + start + 4 * k, little);
      img.samples(x, y) = std::isfinite(v) ? double(v) : kNull;
    }
  }
  return img;
}

/// Encodes as little-endian greyscale PFM; kNull is written as NaN.
inline Bytes write_pfm(const Image<double>& img) {
  Bytes out;
  detail::append(out, "Pf\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) +
                          "\n-1.0\n");
  out.reserve(out.size() + 4 * img.size());
  for (int y = img.height() - 1; y >= 0; --y) {
    for (int x = 0; x < img.width(); ++x) {
      const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(img(x, y)));
      for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  }
  return out;
}

inline Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed for " + path);
}

inline void write_file(const std::string& path, std::string_view text) {
  write_file(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()),
                                                 text.size()));
}

/// Maps 16-bit PGM range samples to metres; zero stays invalid.
inline DepthImage depth_from_pgm(const AmplitudeImage& raw, double metres_per_unit) {
  if (!(metres_per_unit > 0.0)) throw ConfigError("depth scale must be positive");
  DepthImage d{Image<double>(raw.width(), raw.height())};
  auto src = raw.samples.pixels();
  auto dst = d.samples.pixels();
  for (std::size_t k = 0; k < src.size(); ++k) {
    dst[k] = src[k] > 0.0 ? src[k] * metres_per_unit : kNull;
  }
  return d;
}

}  // namespace tofgrid
