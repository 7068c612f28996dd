#pragma once

// PGM (P5, 8/16-bit) and "SPIIMG v1 <C> <R>" raw little-endian f64 grids.

#include <bit>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "grid.hpp"

namespace mcspi {

namespace detail {

inline void skip_pnm_space(std::istream& is) {
  while (true) {
    const int ch = is.peek();
    if (ch == '#') {
      std::string comment;
      std::getline(is, comment);
    } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      is.get();
    } else {
      return;
    }
  }
}

}  // namespace detail

/// Reads a binary PGM and maps samples linearly to [0, 1] by maxval.
inline ImageD read_pgm(std::istream& is) {
  std::string magic;
  is >> magic;
  if (magic != "P5") throw ConfigError("PGM: only binary P5 is supported");
  std::size_t w = 0, h = 0, maxval = 0;
  detail::skip_pnm_space(is);
  is >> w;
  detail::skip_pnm_space(is);
  is >> h;
  detail::skip_pnm_space(is);
  is >> maxval;
  if (!is || w == 0 || h == 0 || maxval == 0 || maxval > 65535) throw ConfigError("PGM: bad header");
  is.get();
  ImageD img(w, h);
  const bool wide = maxval > 255;
  for (std::size_t i = 0; i < img.size(); ++i) {
    unsigned v = 0;
    if (wide) {
      const int hi = is.get(), lo = is.get();
      if (lo == EOF) throw ConfigError("PGM: truncated data");
      v = static_cast<unsigned>(hi) << 8 | static_cast<unsigned>(lo);
    } else {
      const int b = is.get();
      if (b == EOF) throw ConfigError("PGM: truncated data");
      v = static_cast<unsigned>(b);
    }
    img[i] = std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
  }
  return img;
}

/// Writes values clamped to [0, 1] as P5 with the given maxval (255 or 65535).
inline void write_pgm(std::ostream& os, const ImageD& img, unsigned maxval = 65535) {
  os << "P5\n" << img.cols() << ' ' << img.rows() << '\n' << maxval << '\n';
  for (double v : img) {
    const auto q = static_cast<unsigned>(std::lround(std::clamp(v, 0.0, 1.0) * maxval));
    if (maxval > 255) os.put(static_cast<char>(q >> 8));
    os.put(static_cast<char>(q & 0xFF));
  }
}

inline void write_spiimg(std::ostream& os, const ImageD& img) {
  os << "SPIIMG v1 " << img.cols() << ' ' << img.rows() << '\n';
  for (double v : img) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(bits >> (8 * i));
    os.write(b, 8);
  }
}

inline ImageD read_spiimg(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("SPIIMG: missing header");
  std::istringstream hs(header);
  std::string magic, version;
  std::size_t c = 0, r = 0;
  if (!(hs >> magic >> version >> c >> r) || magic != "SPIIMG" || version != "v1") {
    throw ConfigError("SPIIMG: bad header '" + header + "'");
  }
  ImageD img(c, r);
  for (auto& v : img) {
    unsigned char b[8];
    if (!is.read(reinterpret_cast<char*>(b), 8)) throw ConfigError("SPIIMG: truncated data");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = std::bit_cast<double>(bits);
  }
  return img;
}

inline void save_spiimg(const std::string& path, const ImageD& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_spiimg(os, img);
}

inline void save_pgm(const std::string& path, const ImageD& img, unsigned maxval = 65535) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  write_pgm(os, img, maxval);
}

/// SPIIMG or PGM, detected from the first bytes.
inline ImageD load_grid(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open image '" + path + "'");
  char head[6] = {};
  is.read(head, 6);
  is.clear();
  is.seekg(0);
  if (std::string_view(head, 6) == "SPIIMG") return read_spiimg(is);
  if (head[0] == 'P' && head[1] == '5') return read_pgm(is);
  throw ConfigError("'" + path + "' is neither SPIIMG nor binary PGM");
}

}  // namespace mcspi
