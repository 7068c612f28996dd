#pragma once

// Modulation patterns: natural-order Hadamard basis, Cake-cut ordering,
// complementary binary splits, geometric-moment masks with Floyd-Steinberg
// binarization, and the time-division-multiplexed sequence plan.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace mcspi {

enum class PatternKind : std::uint8_t { HadamardPos = 0, HadamardNeg = 1, MomentS2 = 2, MomentS3 = 3 };

inline std::string_view to_string(PatternKind k) {
  switch (k) {
    case PatternKind::HadamardPos: return "H+";
    case PatternKind::HadamardNeg: return "H-";
    case PatternKind::MomentS2: return "S2";
    case PatternKind::MomentS3: return "S3";
  }
  return "?";
}

inline PatternKind pattern_kind_from_string(std::string_view s) {
  if (s == "H+") return PatternKind::HadamardPos;
  if (s == "H-") return PatternKind::HadamardNeg;
  if (s == "S2") return PatternKind::MomentS2;
  if (s == "S3") return PatternKind::MomentS3;
  throw ProtocolError("unknown pattern kind '" + std::string(s) + "'");
}

inline bool is_hadamard(PatternKind k) {
  return k == PatternKind::HadamardPos || k == PatternKind::HadamardNeg;
}

/// {+1, -1} pattern with its natural Sylvester index and 4-connected block count.
struct BipolarPattern {
  Grid<std::int8_t> values;
  std::uint32_t basis_index = 0;
  std::size_t block_count = 1;

  std::size_t side() const noexcept { return values.cols(); }
};

/// {0, 1} mask as shown on the modulator.
struct BinaryPattern {
  Grid<std::uint8_t> values;
  PatternKind kind = PatternKind::HadamardPos;
};

struct MomentMatrices {
  ImageD s1, s2, s3;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void require_power_of_two(std::size_t n, const char* what) {
  if (!is_power_of_two(n)) {
    throw DomainError(std::string(what) + ": side length " + std::to_string(n) +
                      " is not a power of two");
  }
}

/// Entry (row, col) of the order-2^k Sylvester matrix.
inline std::int8_t sylvester_entry(std::uint64_t row, std::uint64_t col) noexcept {
  return (std::popcount(row & col) & 1U) ? std::int8_t{-1} : std::int8_t{1};
}

// Keeps single allocations under 1 GiB of int8 entries.
inline constexpr unsigned kMaxSylvesterOrder = 15;

/// Sylvester-construction Hadamard matrix of side 2^k, built by repeated
/// Kronecker doubling [[H, H], [H, -H]].
inline Grid<std::int8_t> sylvester_hadamard(unsigned k) {
  if (k > kMaxSylvesterOrder) {
    throw CapacityError("sylvester_hadamard: order 2^" + std::to_string(k) + " exceeds capacity");
  }
  const std::size_t side = std::size_t{1} << k;
  Grid<std::int8_t> h(side, side, 1);
  for (std::size_t half = 1; half < side; half <<= 1) {
    for (std::size_t r = 0; r < half; ++r) {
      for (std::size_t c = 0; c < half; ++c) {
        const auto v = h(c, r);
        h(c + half, r) = v;
        h(c, r + half) = v;
        h(c + half, r + half) = static_cast<std::int8_t>(-v);
      }
    }
  }
  return h;
}

/// Number of 4-connected constant-sign regions.
inline std::size_t count_blocks(const Grid<std::int8_t>& p) {
  const std::size_t cols = p.cols(), rows = p.rows();
  if (p.empty()) return 0;
  std::vector<std::uint8_t> seen(p.size(), 0);
  std::vector<std::size_t> stack;
  std::size_t blocks = 0;
  for (std::size_t start = 0; start < p.size(); ++start) {
    if (seen[start]) continue;
    ++blocks;
    const auto sign = p[start];
    seen[start] = 1;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t c = i % cols, r = i / cols;
      auto visit = [&](std::size_t j) {
        if (!seen[j] && p[j] == sign) {
          seen[j] = 1;
          stack.push_back(j);
        }
      };
      if (c > 0) visit(i - 1);
      if (c + 1 < cols) visit(i + 1);
      if (r > 0) visit(i - cols);
      if (r + 1 < rows) visit(i + cols);
    }
  }
  return blocks;
}

inline std::size_t count_blocks(const BipolarPattern& p) { return count_blocks(p.values); }

/// Pattern `index` of the N x N basis: row `index` of the order-N^2
/// Sylvester matrix reshaped row-major.
inline BipolarPattern basis_pattern(std::size_t side, std::uint32_t index) {
  require_power_of_two(side, "basis_pattern");
  if (static_cast<std::uint64_t>(index) >= static_cast<std::uint64_t>(side) * side) {
    throw DomainError("basis_pattern: index out of range");
  }
  BipolarPattern p;
  p.values = Grid<std::int8_t>(side, side);
  for (std::size_t j = 0; j < side * side; ++j) p.values[j] = sylvester_entry(index, j);
  p.basis_index = index;
  p.block_count = count_blocks(p.values);
  return p;
}

/// Full natural-order basis of N^2 patterns.
inline std::vector<BipolarPattern> basis_patterns_2d(std::size_t side) {
  require_power_of_two(side, "basis_patterns_2d");
  const std::uint64_t count = static_cast<std::uint64_t>(side) * side;
  if (count * count > (std::uint64_t{1} << 30)) {
    throw CapacityError("basis_patterns_2d: " + std::to_string(count) +
                        " materialized patterns exceed capacity; use cake_cut_order + basis_pattern");
  }
  std::vector<BipolarPattern> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) out.push_back(basis_pattern(side, i));
  return out;
}

/// Stable sort by (block_count, basis_index).
inline std::vector<BipolarPattern> cake_cut_sort(std::vector<BipolarPattern> patterns) {
  if (!patterns.empty()) {
    const auto cols = patterns.front().values.cols(), rows = patterns.front().values.rows();
    for (const auto& p : patterns) {
      if (p.values.cols() != cols || p.values.rows() != rows) {
        throw DomainError("cake_cut_sort: patterns have mixed sizes");
      }
    }
  }
  std::stable_sort(patterns.begin(), patterns.end(), [](const auto& a, const auto& b) {
    return a.block_count != b.block_count ? a.block_count < b.block_count
                                          : a.basis_index < b.basis_index;
  });
  return patterns;
}

/// Sign runs along a 1D natural-order Walsh row of length `len`.
inline std::size_t walsh_runs(std::uint64_t index, std::size_t len) {
  std::size_t runs = 1;
  for (std::size_t j = 1; j < len; ++j) {
    if (sylvester_entry(index, j) != sylvester_entry(index, j - 1)) ++runs;
  }
  return runs;
}

/// Block count of basis pattern `index` without materializing it. The
/// pattern is the outer product of a row factor (high index bits) and a
/// column factor (low bits); adjacent constant rectangles always differ in
/// sign, so the count is runs(row factor) * runs(col factor).
inline std::size_t basis_block_count(std::size_t side, std::uint32_t index) {
  return walsh_runs(index / side, side) * walsh_runs(index % side, side);
}

/// Natural basis indices of the N x N basis in Cake-cut order.
inline std::vector<std::uint32_t> cake_cut_order(std::size_t side) {
  require_power_of_two(side, "cake_cut_order");
  std::vector<std::size_t> runs(side);
  for (std::size_t k = 0; k < side; ++k) runs[k] = walsh_runs(k, side);
  const std::size_t count = side * side;
  std::vector<std::uint32_t> order(count);
  std::iota(order.begin(), order.end(), 0U);
  std::vector<std::size_t> key(count);
  for (std::size_t i = 0; i < count; ++i) key[i] = runs[i / side] * runs[i % side];
  std::stable_sort(order.begin(), order.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return key[a] < key[b]; });
  return order;
}

inline std::vector<std::uint32_t> natural_order(std::size_t side) {
  require_power_of_two(side, "natural_order");
  std::vector<std::uint32_t> order(side * side);
  std::iota(order.begin(), order.end(), 0U);
  return order;
}

/// pos = (1 + p) / 2, neg = (1 - p) / 2.
inline std::pair<BinaryPattern, BinaryPattern> split_complementary(const BipolarPattern& p) {
  BinaryPattern pos{Grid<std::uint8_t>(p.values.cols(), p.values.rows()), PatternKind::HadamardPos};
  BinaryPattern neg{Grid<std::uint8_t>(p.values.cols(), p.values.rows()), PatternKind::HadamardNeg};
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    const bool plus = p.values[i] > 0;
    pos.values[i] = plus ? 1 : 0;
    neg.values[i] = plus ? 0 : 1;
  }
  return {std::move(pos), std::move(neg)};
}

/// Gray moment masks: s1 constant N, s2(x) = x (1-indexed column),
/// s3 = R at the top row down to 1 at the bottom row. For non-square fields
/// the s1 constant is the column count.
inline MomentMatrices moment_matrices(std::size_t cols, std::size_t rows) {
  if (cols == 0 || rows == 0) throw DomainError("moment_matrices: empty field");
  MomentMatrices m{ImageD(cols, rows, static_cast<double>(cols)), ImageD(cols, rows), ImageD(cols, rows)};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m.s2(c, r) = static_cast<double>(c + 1);
      m.s3(c, r) = static_cast<double>(rows - r);
    }
  }
  return m;
}

/// Classic row-major Floyd-Steinberg error diffusion at threshold 0.5.
/// Error leaving the grid is dropped.
inline Grid<std::uint8_t> dither_floyd_steinberg(const ImageD& gray) {
  for (double v : gray) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("dither_floyd_steinberg: input outside [0,1]");
  }
  const std::size_t cols = gray.cols(), rows = gray.rows();
  ImageD work = gray;
  Grid<std::uint8_t> out(cols, rows, 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double old = work(c, r);
      const std::uint8_t bit = old >= 0.5 ? 1 : 0;
      out(c, r) = bit;
      const double err = old - bit;
      if (c + 1 < cols) work(c + 1, r) += err * 7.0 / 16.0;
      if (r + 1 < rows) {
        if (c > 0) work(c - 1, r + 1) += err * 3.0 / 16.0;
        work(c, r + 1) += err * 5.0 / 16.0;
        if (c + 1 < cols) work(c + 1, r + 1) += err * 1.0 / 16.0;
      }
    }
  }
  return out;
}

/// Binarized S2' and S3' (each gray mask divided by its axis length first,
/// so local density encodes value / N). S1' is never emitted: it is the
/// all-ones mask, recovered from a complementary Hadamard pair.
inline std::pair<BinaryPattern, BinaryPattern> moment_binary_patterns(std::size_t cols, std::size_t rows) {
  auto m = moment_matrices(cols, rows);
  for (auto& v : m.s2) v /= static_cast<double>(cols);
  for (auto& v : m.s3) v /= static_cast<double>(rows);
  return {BinaryPattern{dither_floyd_steinberg(m.s2), PatternKind::MomentS2},
          BinaryPattern{dither_floyd_steinberg(m.s3), PatternKind::MomentS3}};
}

// ---------------------------------------------------------------------------
// Sequence plan

inline constexpr std::uint32_t kNoOrdinal = std::numeric_limits<std::uint32_t>::max();

struct SequenceEntry {
  PatternKind kind = PatternKind::HadamardPos;
  std::uint32_t basis_index = kNoOrdinal;  // natural Sylvester index, kNoOrdinal for moments
  std::uint64_t pair = 0;                  // global complementary-pair counter (Hadamard only)

  friend bool operator==(const SequenceEntry&, const SequenceEntry&) = default;
};

struct SequencePlan {
  std::size_t side = 0;     // field side N
  std::size_t n = 2;        // Hadamard slots per set
  std::size_t num_pairs = 0;
  std::size_t num_sets = 0;
  std::string ordering = "cake-cut";
  std::vector<SequenceEntry> entries;

  std::size_t set_length() const noexcept { return n + 2; }
  std::size_t pairs_per_set() const noexcept { return n / 2; }
  std::span<const SequenceEntry> set(std::size_t s) const {
    return std::span<const SequenceEntry>(entries).subspan(s * set_length(), set_length());
  }
};

inline void require_valid_n(std::size_t n, const char* what) {
  if (n < 2 || n % 2 != 0) {
    throw DomainError(std::string(what) + ": n must be even and >= 2 (got " + std::to_string(n) + ")");
  }
}

/// Sets of n/2 complementary pairs (H+, H-) followed by S2, S3. Basis
/// ordinals are taken from `order` cyclically; the final set is filled by
/// continuing the cycle so every set has n + 2 entries.
inline SequencePlan build_sequence(std::size_t n, std::size_t num_pairs, std::span<const std::uint32_t> order,
                                   std::size_t side = 0, std::string ordering = "cake-cut") {
  require_valid_n(n, "build_sequence");
  if (order.empty()) throw DomainError("build_sequence: empty basis");
  if (num_pairs == 0) throw DomainError("build_sequence: num_pairs must be positive");
  SequencePlan plan;
  plan.side = side;
  plan.n = n;
  plan.num_pairs = num_pairs;
  plan.ordering = std::move(ordering);
  const std::size_t per_set = n / 2;
  plan.num_sets = (num_pairs + per_set - 1) / per_set;
  plan.entries.reserve(plan.num_sets * (n + 2));
  std::uint64_t pair = 0;
  for (std::size_t s = 0; s < plan.num_sets; ++s) {
    for (std::size_t k = 0; k < per_set; ++k, ++pair) {
      const auto idx = order[pair % order.size()];
      plan.entries.push_back({PatternKind::HadamardPos, idx, pair});
      plan.entries.push_back({PatternKind::HadamardNeg, idx, pair});
    }
    plan.entries.push_back({PatternKind::MomentS2, kNoOrdinal, 0});
    plan.entries.push_back({PatternKind::MomentS3, kNoOrdinal, 0});
  }
  return plan;
}

inline SequencePlan build_sequence(std::size_t n, std::size_t num_pairs, std::span<const BipolarPattern> basis) {
  std::vector<std::uint32_t> order;
  order.reserve(basis.size());
  for (const auto& p : basis) order.push_back(p.basis_index);
  return build_sequence(n, num_pairs, order, basis.empty() ? 0 : basis.front().side());
}

/// Plan over an N x N field using the named ordering ("cake-cut" or "natural").
inline SequencePlan make_plan(std::size_t side, std::size_t n, std::size_t num_pairs,
                              const std::string& ordering = "cake-cut") {
  std::vector<std::uint32_t> order;
  if (ordering == "cake-cut") {
    order = cake_cut_order(side);
  } else if (ordering == "natural") {
    order = natural_order(side);
  } else {
    throw DomainError("unknown ordering '" + ordering + "'");
  }
  return build_sequence(n, num_pairs, order, side, ordering);
}

// ---------------------------------------------------------------------------
// Rates

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational& a, const Rational& b) noexcept {
    return a.num * b.den == b.num * a.den;
  }
};

inline Rational make_rational(std::int64_t num, std::int64_t den) {
  if (den == 0) throw DomainError("rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const auto g = std::gcd(num < 0 ? -num : num, den);
  return g > 1 ? Rational{num / g, den / g} : Rational{num, den};
}

inline Rational operator+(const Rational& a, const Rational& b) {
  return make_rational(a.num * b.den + b.num * a.den, a.den * b.den);
}
inline Rational operator*(const Rational& a, const Rational& b) {
  return make_rational(a.num * b.num, a.den * b.den);
}

/// Position fixes per second: omega / (n + 2).
inline Rational positioning_frequency(std::int64_t omega, std::size_t n) {
  require_valid_n(n, "positioning_frequency");
  if (omega <= 0) throw DomainError("positioning_frequency: omega must be positive");
  return make_rational(omega, static_cast<std::int64_t>(n + 2));
}

/// Share of projections carrying image information: n / (n + 2).
inline Rational imaging_efficiency(std::size_t n) {
  require_valid_n(n, "imaging_efficiency");
  return make_rational(static_cast<std::int64_t>(n), static_cast<std::int64_t>(n + 2));
}

}  // namespace mcspi
