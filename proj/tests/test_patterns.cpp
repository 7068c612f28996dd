#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <vector>

#include "mcspi/pattern_cache.hpp"
#include "mcspi/patterns.hpp"

using namespace mcspi;

namespace {

// Recursive Kronecker construction, independent of the library's doubling loop.
std::vector<std::vector<int>> kron_hadamard(unsigned k) {
  if (k == 0) return {{1}};
  const auto h = kron_hadamard(k - 1);
  const std::size_t m = h.size();
  std::vector<std::vector<int>> out(2 * m, std::vector<int>(2 * m));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      out[i][j] = h[i][j];
      out[i][j + m] = h[i][j];
      out[i + m][j] = h[i][j];
      out[i + m][j + m] = -h[i][j];
    }
  }
  return out;
}

long dot(const Grid<std::int8_t>& a, const Grid<std::int8_t>& b) {
  long s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST(Sylvester, BaseCases) {
  const auto h0 = sylvester_hadamard(0);
  ASSERT_EQ(h0.size(), 1u);
  EXPECT_EQ(h0[0], 1);
  const auto h1 = sylvester_hadamard(1);
  EXPECT_EQ(h1(0, 0), 1);
  EXPECT_EQ(h1(1, 0), 1);
  EXPECT_EQ(h1(0, 1), 1);
  EXPECT_EQ(h1(1, 1), -1);
}

TEST(Sylvester, RowsOrthogonalAtOrderEight) {
  const auto h = sylvester_hadamard(3);
  int pairs = 0;
  for (std::size_t a = 0; a < 8; ++a) {
    for (std::size_t b = a + 1; b < 8; ++b, ++pairs) {
      int s = 0;
      for (std::size_t c = 0; c < 8; ++c) s += h(c, a) * h(c, b);
      EXPECT_EQ(s, 0) << a << "," << b;
    }
  }
  EXPECT_EQ(pairs, 28);
}

TEST(Sylvester, MatchesKroneckerRecursion) {
  for (unsigned k = 0; k <= 6; ++k) {
    const auto h = sylvester_hadamard(k);
    const auto ref = kron_hadamard(k);
    for (std::size_t r = 0; r < ref.size(); ++r) {
      for (std::size_t c = 0; c < ref.size(); ++c) ASSERT_EQ(h(c, r), ref[r][c]);
    }
  }
}

TEST(Sylvester, CapacityError) { EXPECT_THROW(sylvester_hadamard(40), CapacityError); }

TEST(Basis, SmallestBasis) {
  const auto b = basis_patterns_2d(2);
  ASSERT_EQ(b.size(), 4u);
  for (auto v : b[0].values) EXPECT_EQ(v, 1);
  EXPECT_EQ(b[0].basis_index, 0u);
}

TEST(Basis, NonPowerOfTwoRejected) {
  EXPECT_THROW(basis_patterns_2d(3), DomainError);
  EXPECT_THROW(basis_patterns_2d(0), DomainError);
  EXPECT_THROW(cake_cut_order(6), DomainError);
}

TEST(Basis, ExhaustiveOrthogonalityUpToEight) {
  for (std::size_t side : {1u, 2u, 4u, 8u}) {
    const auto b = basis_patterns_2d(side);
    ASSERT_EQ(b.size(), side * side);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
      for (auto v : b[i].values) ASSERT_TRUE(v == 1 || v == -1);
      EXPECT_EQ(dot(b[i].values, b[i].values), static_cast<long>(side * side));
      for (std::size_t j = i + 1; j < b.size(); ++j, ++pairs) ASSERT_EQ(dot(b[i].values, b[j].values), 0);
    }
    if (side == 4) EXPECT_EQ(pairs, 120u);
  }
}

TEST(Basis, MatchesReshapedSylvesterRows) {
  const auto big = kron_hadamard(4);
  const auto b = basis_patterns_2d(4);
  for (std::size_t i = 0; i < 16; ++i) {
    for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(b[i].values[j], big[i][j]);
  }
}

TEST(Basis, ExpansionRecoversImage) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto b = basis_patterns_2d(4);
  std::vector<double> img(16);
  for (auto& v : img) v = u(rng);
  std::vector<double> rec(16, 0.0);
  for (const auto& p : b) {
    double coef = 0.0;
    for (std::size_t j = 0; j < 16; ++j) coef += img[j] * p.values[j];
    for (std::size_t j = 0; j < 16; ++j) rec[j] += coef * p.values[j];
  }
  for (std::size_t j = 0; j < 16; ++j) EXPECT_NEAR(rec[j] / 16.0, img[j], 1e-12);
}

TEST(Blocks, Examples) {
  EXPECT_EQ(count_blocks(Grid<std::int8_t>(8, 8, 1)), 1u);
  Grid<std::int8_t> checker(8, 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) checker(c, r) = ((r + c) % 2) ? -1 : 1;
  EXPECT_EQ(count_blocks(checker), 64u);
  Grid<std::int8_t> halves(8, 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) halves(c, r) = c < 4 ? 1 : -1;
  EXPECT_EQ(count_blocks(halves), 2u);
  // diagonal neighbours do not join under 4-connectivity
  Grid<std::int8_t> diag(2, 2, std::vector<std::int8_t>{1, -1, -1, 1});
  EXPECT_EQ(count_blocks(diag), 4u);
}

TEST(Blocks, ConstantIffOneBlock) {
  for (const auto& p : basis_patterns_2d(8)) {
    const bool constant = std::all_of(p.values.begin(), p.values.end(), [&](auto v) { return v == p.values[0]; });
    EXPECT_EQ(p.block_count == 1, constant);
    EXPECT_GE(p.block_count, 1u);
  }
}

TEST(Blocks, SeparableCountMatchesFloodFill) {
  for (std::size_t side : {2u, 4u, 8u, 16u}) {
    for (std::uint32_t i = 0; i < side * side; ++i) {
      ASSERT_EQ(basis_block_count(side, i), count_blocks(basis_pattern(side, i).values)) << side << " " << i;
    }
  }
}

TEST(CakeCut, SmallestBasisStartsConstant) {
  const auto sorted = cake_cut_sort(basis_patterns_2d(2));
  EXPECT_EQ(sorted.front().basis_index, 0u);
  EXPECT_EQ(sorted.front().block_count, 1u);
}

TEST(CakeCut, PermutationAndMonotone) {
  const auto basis = basis_patterns_2d(4);
  const auto sorted = cake_cut_sort(basis);
  ASSERT_EQ(sorted.size(), basis.size());
  std::multiset<std::uint32_t> a, b;
  for (const auto& p : basis) a.insert(p.basis_index);
  for (const auto& p : sorted) b.insert(p.basis_index);
  EXPECT_EQ(a, b);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    EXPECT_LE(sorted[i - 1].block_count, sorted[i].block_count);
    if (sorted[i - 1].block_count == sorted[i].block_count) {
      EXPECT_LT(sorted[i - 1].basis_index, sorted[i].basis_index);
    }
  }
}

TEST(CakeCut, StableAndShuffleInvariant) {
  auto basis = basis_patterns_2d(8);
  const auto once = cake_cut_sort(basis);
  const auto twice = cake_cut_sort(once);
  std::mt19937 rng(3);
  std::shuffle(basis.begin(), basis.end(), rng);
  const auto shuffled = cake_cut_sort(basis);
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_EQ(once[i].basis_index, twice[i].basis_index);
    EXPECT_EQ(once[i].basis_index, shuffled[i].basis_index);
  }
}

TEST(CakeCut, IndexOrderMatchesMaterializedSort) {
  for (std::size_t side : {2u, 4u, 8u, 16u}) {
    const auto sorted = cake_cut_sort(basis_patterns_2d(side));
    const auto order = cake_cut_order(side);
    ASSERT_EQ(order.size(), sorted.size());
    for (std::size_t i = 0; i < order.size(); ++i) ASSERT_EQ(order[i], sorted[i].basis_index);
  }
}

TEST(CakeCut, MixedSizesRejected) {
  std::vector<BipolarPattern> mixed{basis_pattern(2, 0), basis_pattern(4, 0)};
  EXPECT_THROW(cake_cut_sort(mixed), DomainError);
}

TEST(Complementary, Identities) {
  const auto [pos0, neg0] = split_complementary(basis_pattern(4, 0));
  for (auto v : pos0.values) EXPECT_EQ(v, 1);
  for (auto v : neg0.values) EXPECT_EQ(v, 0);
  EXPECT_EQ(pos0.kind, PatternKind::HadamardPos);
  EXPECT_EQ(neg0.kind, PatternKind::HadamardNeg);

  const auto p5 = basis_pattern(4, 5);
  const auto [pos5, neg5] = split_complementary(p5);
  for (std::size_t j = 0; j < 16; ++j) EXPECT_EQ(static_cast<int>(pos5.values[j]) - neg5.values[j], p5.values[j]);

  for (const auto& p : basis_patterns_2d(8)) {
    const auto [pos, neg] = split_complementary(p);
    for (std::size_t j = 0; j < p.values.size(); ++j) {
      ASSERT_EQ(pos.values[j] + neg.values[j], 1);
      ASSERT_EQ(static_cast<int>(pos.values[j]) - neg.values[j], p.values[j]);
    }
  }
}

TEST(Moments, FourByFour) {
  const auto m = moment_matrices(4, 4);
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      EXPECT_EQ(m.s1(c, r), 4.0);
      EXPECT_EQ(m.s2(c, r), static_cast<double>(c + 1));
    }
  }
  for (std::size_t c = 0; c < 4; ++c) {
    EXPECT_EQ(m.s3(c, 0), 4.0);
    EXPECT_EQ(m.s3(c, 3), 1.0);
  }
  EXPECT_THROW(moment_matrices(0, 4), DomainError);
}

TEST(Dither, ConstantInputs) {
  for (double v : {0.0, 1.0}) {
    const auto out = dither_floyd_steinberg(ImageD(16, 16, v));
    for (auto b : out) EXPECT_EQ(b, static_cast<std::uint8_t>(v));
  }
  const auto half = dither_floyd_steinberg(ImageD(256, 256, 0.5));
  EXPECT_NEAR(grid_sum(half) / half.size(), 0.5, 0.01);
}

TEST(Dither, RejectsOutOfRange) {
  EXPECT_THROW(dither_floyd_steinberg(ImageD(4, 4, 1.5)), DomainError);
  EXPECT_THROW(dither_floyd_steinberg(ImageD(4, 4, -0.1)), DomainError);
}

TEST(Dither, HandWorkedThreeByOne) {
  // 0.4 -> 0, err 0.4 moves 0.175 right: 0.775 -> 1, err -0.225 * 7/16 right: 0.3 - 0.0984 -> 0
  const auto out = dither_floyd_steinberg(ImageD(3, 1, std::vector<double>{0.4, 0.6, 0.3}));
  EXPECT_EQ(out[0], 0);
  EXPECT_EQ(out[1], 1);
  EXPECT_EQ(out[2], 0);
}

TEST(Dither, MassBoundOnRandomGrids) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> dim(1, 96);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t c = dim(rng), r = dim(rng);
    ImageD g(c, r);
    for (auto& v : g) v = u(rng);
    const auto out = dither_floyd_steinberg(g);
    for (auto b : out) ASSERT_TRUE(b == 0 || b == 1);
    const double diff = std::abs(grid_sum(out) - grid_sum(g)) / static_cast<double>(g.size());
    EXPECT_LE(diff, 2.0 / static_cast<double>(std::min(c, r))) << c << "x" << r;
  }
}

TEST(MomentPatterns, LocalDensity) {
  const auto [s2, s3] = moment_binary_patterns(256, 256);
  EXPECT_EQ(s2.kind, PatternKind::MomentS2);
  EXPECT_EQ(s3.kind, PatternKind::MomentS3);
  // Error diffusion only holds density over a neighbourhood, so compare 16-column bands.
  for (std::size_t band = 0; band < 256; band += 16) {
    double ones = 0.0, target = 0.0;
    for (std::size_t c = band; c < band + 16; ++c) {
      for (std::size_t r = 0; r < 256; ++r) ones += s2.values(c, r);
      target += 256.0 * static_cast<double>(c + 1) / 256.0;
    }
    EXPECT_NEAR(ones / (16.0 * 256.0), target / (16.0 * 256.0), 2.0 / 256.0) << band;
  }
  double top = 0.0;
  for (std::size_t c = 0; c < 256; ++c) top += s3.values(c, 0);
  EXPECT_NEAR(top / 256.0, 1.0, 2.0 / 256.0);
}

TEST(MomentPatterns, TinyFieldMonotone) {
  const auto [s2, s3] = moment_binary_patterns(2, 2);
  const int left = s2.values(0, 0) + s2.values(0, 1), right = s2.values(1, 0) + s2.values(1, 1);
  EXPECT_LE(left, right);
}

TEST(Sequence, TwoPairs) {
  const std::vector<std::uint32_t> order{7, 3, 9};
  const auto plan = build_sequence(2, 2, order, 4);
  ASSERT_EQ(plan.entries.size(), 8u);
  const std::vector<PatternKind> kinds{PatternKind::HadamardPos, PatternKind::HadamardNeg, PatternKind::MomentS2,
                                       PatternKind::MomentS3,    PatternKind::HadamardPos, PatternKind::HadamardNeg,
                                       PatternKind::MomentS2,    PatternKind::MomentS3};
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(plan.entries[i].kind, kinds[i]);
  EXPECT_EQ(plan.entries[0].basis_index, 7u);
  EXPECT_EQ(plan.entries[1].basis_index, 7u);
  EXPECT_EQ(plan.entries[4].basis_index, 3u);
  EXPECT_EQ(plan.entries[2].basis_index, kNoOrdinal);
  EXPECT_EQ(plan.num_sets, 2u);
}

TEST(Sequence, FullBasisAtSixtyFour) {
  const auto plan = make_plan(64, 2, 4096);
  EXPECT_EQ(plan.entries.size(), 16384u);
  EXPECT_EQ(plan.num_sets, 4096u);
}

TEST(Sequence, WiderSets) {
  const auto plan = make_plan(4, 6, 3);
  EXPECT_EQ(plan.num_sets, 1u);
  EXPECT_EQ(plan.entries.size(), 8u);
  EXPECT_EQ(plan.entries[6].kind, PatternKind::MomentS2);
  EXPECT_EQ(plan.entries[7].kind, PatternKind::MomentS3);
}

TEST(Sequence, BadN) {
  const std::vector<std::uint32_t> order{0};
  EXPECT_THROW(build_sequence(3, 4, order), DomainError);
  EXPECT_THROW(build_sequence(0, 4, order), DomainError);
  EXPECT_THROW(build_sequence(2, 4, std::span<const std::uint32_t>{}), DomainError);
  EXPECT_THROW(make_plan(4, 2, 4, "walsh"), DomainError);
}

TEST(Sequence, ShapeAndCyclicEnumeration) {
  for (std::size_t n : {2u, 4u, 6u, 10u}) {
    const std::size_t pairs = 37;
    const auto order = cake_cut_order(4);
    const auto plan = build_sequence(n, pairs, order, 4);
    ASSERT_EQ(plan.entries.size() % (n + 2), 0u);
    ASSERT_EQ(plan.num_sets, (2 * pairs + n - 1) / n);
    std::size_t k = 0;
    for (std::size_t s = 0; s < plan.num_sets; ++s) {
      const auto set = plan.set(s);
      ASSERT_EQ(set.size(), n + 2);
      EXPECT_EQ(set[n].kind, PatternKind::MomentS2);
      EXPECT_EQ(set[n + 1].kind, PatternKind::MomentS3);
      for (std::size_t j = 0; j < n; j += 2, ++k) {
        EXPECT_EQ(set[j].kind, PatternKind::HadamardPos);
        EXPECT_EQ(set[j + 1].kind, PatternKind::HadamardNeg);
        EXPECT_EQ(set[j].basis_index, order[k % order.size()]);
        EXPECT_EQ(set[j + 1].basis_index, order[k % order.size()]);
      }
    }
  }
}

TEST(Rates, Examples) {
  EXPECT_EQ(positioning_frequency(22200, 2), (Rational{5550, 1}));
  EXPECT_EQ(imaging_efficiency(2), (Rational{1, 2}));
  EXPECT_EQ(imaging_efficiency(6), (Rational{3, 4}));
  EXPECT_THROW(positioning_frequency(22200, 0), DomainError);
  EXPECT_THROW(imaging_efficiency(3), DomainError);
  EXPECT_THROW(positioning_frequency(0, 2), DomainError);
}

TEST(Rates, Identities) {
  for (std::int64_t omega : {1LL, 7LL, 22200LL, 1000003LL}) {
    for (std::size_t n = 2; n <= 40; n += 2) {
      const auto f = positioning_frequency(omega, n);
      EXPECT_EQ((f * Rational{static_cast<std::int64_t>(n + 2), 1}), (Rational{omega, 1}));
      EXPECT_EQ(imaging_efficiency(n) + make_rational(2, static_cast<std::int64_t>(n + 2)), (Rational{1, 1}));
    }
  }
}

TEST(PatternCache, RoundTrip) {
  const auto sorted = cake_cut_sort(basis_patterns_2d(8));
  std::stringstream ss;
  write_pattern_cache(ss, 8, sorted, "cake-cut");
  const auto cache = read_pattern_cache(ss);
  EXPECT_EQ(cache.side, 8u);
  EXPECT_EQ(cache.ordering, "cake-cut");
  ASSERT_EQ(cache.patterns.size(), sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    EXPECT_EQ(cache.patterns[i].values, sorted[i].values);
    EXPECT_EQ(cache.patterns[i].basis_index, sorted[i].basis_index);
    EXPECT_EQ(cache.patterns[i].block_count, sorted[i].block_count);
  }
}

TEST(PatternCache, HeaderAndPacking) {
  std::stringstream ss;
  const std::vector<BipolarPattern> one{basis_pattern(4, 1)};
  write_pattern_cache(ss, 4, one, "natural");
  const std::string data = ss.str();
  const std::string header = "SPIPAT v1 4 1 natural\n";
  ASSERT_EQ(data.substr(0, header.size()), header);
  ASSERT_EQ(data.size(), header.size() + 4);
  // index 1 alternates +,-,+,- along each row: 1010 padded -> 0xA0
  for (std::size_t r = 0; r < 4; ++r) EXPECT_EQ(static_cast<unsigned char>(data[header.size() + r]), 0xA0);
}

TEST(PatternCache, BadHeader) {
  std::stringstream ss("SPIPAT v2 4 1 natural\n");
  EXPECT_THROW(read_pattern_cache(ss), ConfigError);
  std::stringstream trunc("SPIPAT v1 4 2 natural\n\xA0\xA0");
  EXPECT_THROW(read_pattern_cache(trunc), ConfigError);
}
