#pragma once

// "SPIPAT v1 <N> <count> <ordering>\n" followed by `count` bit-packed N x N
// bipolar patterns. Bits are row-major, MSB first, each row padded to a byte
// boundary; a set bit means +1.

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "patterns.hpp"

namespace mcspi {

struct PatternCache {
  std::size_t side = 0;
  std::string ordering;
  std::vector<BipolarPattern> patterns;
};

namespace detail {

// Recovers the natural index from row 0 / column 0 when the pattern is an
// exact basis element.
inline std::uint32_t infer_basis_index(const Grid<std::int8_t>& v) {
  const std::size_t side = v.cols();
  if (!is_power_of_two(side) || v.rows() != side) return kNoOrdinal;
  std::uint64_t ix = 0, iy = 0;
  for (std::size_t b = 1, bit = 0; b < side; b <<= 1, ++bit) {
    if (v(b, 0) * v(0, 0) < 0) ix |= std::uint64_t{1} << bit;
    if (v(0, b) * v(0, 0) < 0) iy |= std::uint64_t{1} << bit;
  }
  const std::uint64_t index = iy * side + ix;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (v[j] != sylvester_entry(index, j)) return kNoOrdinal;
  }
  return static_cast<std::uint32_t>(index);
}

}  // namespace detail

inline void write_pattern_cache(std::ostream& os, std::size_t side, std::span<const BipolarPattern> patterns,
                                const std::string& ordering) {
  os << "SPIPAT v1 " << side << ' ' << patterns.size() << ' ' << ordering << '\n';
  const std::size_t row_bytes = (side + 7) / 8;
  std::vector<char> row(row_bytes);
  for (const auto& p : patterns) {
    if (p.values.cols() != side || p.values.rows() != side) {
      throw DomainError("write_pattern_cache: pattern size mismatch");
    }
    for (std::size_t r = 0; r < side; ++r) {
      std::fill(row.begin(), row.end(), 0);
      for (std::size_t c = 0; c < side; ++c) {
        if (p.values(c, r) > 0) row[c / 8] = static_cast<char>(row[c / 8] | (0x80 >> (c % 8)));
      }
      os.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  }
  if (!os) throw ConfigError("write_pattern_cache: write failed");
}

/// Writes the first `count` patterns of the given ordering without holding
/// the whole basis in memory.
inline void write_pattern_cache(const std::string& path, std::size_t side, const std::string& ordering,
                                std::size_t count = 0) {
  if (ordering != "natural" && ordering != "cake-cut") throw DomainError("unknown ordering '" + ordering + "'");
  const std::vector<std::uint32_t> order = ordering == "natural" ? natural_order(side) : cake_cut_order(side);
  if (count == 0 || count > order.size()) count = order.size();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  os << "SPIPAT v1 " << side << ' ' << count << ' ' << ordering << '\n';
  const std::size_t row_bytes = (side + 7) / 8;
  std::vector<char> row(row_bytes);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t idx = order[k];
    for (std::size_t r = 0; r < side; ++r) {
      std::fill(row.begin(), row.end(), 0);
      for (std::size_t c = 0; c < side; ++c) {
        if (sylvester_entry(idx, r * side + c) > 0) row[c / 8] = static_cast<char>(row[c / 8] | (0x80 >> (c % 8)));
      }
      os.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
  }
  if (!os) throw ConfigError("write_pattern_cache: write failed");
}

inline PatternCache read_pattern_cache(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("pattern cache: missing header");
  std::istringstream hs(header);
  std::string magic, version;
  PatternCache cache;
  std::size_t count = 0;
  if (!(hs >> magic >> version >> cache.side >> count >> cache.ordering) || magic != "SPIPAT" || version != "v1") {
    throw ConfigError("pattern cache: bad header '" + header + "'");
  }
  const std::size_t side = cache.side;
  const std::size_t row_bytes = (side + 7) / 8;
  std::vector<unsigned char> row(row_bytes);
  cache.patterns.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    BipolarPattern p;
    p.values = Grid<std::int8_t>(side, side);
    for (std::size_t r = 0; r < side; ++r) {
      if (!is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row_bytes))) {
        throw ConfigError("pattern cache: truncated data");
      }
      for (std::size_t c = 0; c < side; ++c) {
        p.values(c, r) = (row[c / 8] & (0x80 >> (c % 8))) ? 1 : -1;
      }
    }
    p.basis_index = detail::infer_basis_index(p.values);
    p.block_count = count_blocks(p.values);
    cache.patterns.push_back(std::move(p));
  }
  return cache;
}

inline PatternCache read_pattern_cache(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open pattern cache '" + path + "'");
  return read_pattern_cache(is);
}

}  // namespace mcspi
