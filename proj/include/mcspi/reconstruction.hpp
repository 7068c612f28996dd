#pragma once

// Motion-compensated correlation reconstruction. Each Hadamard pattern is
// counter-shifted by the displacement of the set it was projected in, so the
// object is stationary relative to the basis while the differential bucket
// products accumulate.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "patterns.hpp"
#include "scene.hpp"
#include "tracking.hpp"

namespace mcspi {

enum class ReconMode { Compensated, Uncompensated };

/// Translate by (-round(rx), -round(ry)) with y positive toward the top
/// row: out(col, row) = h(col + rx, row - ry). Vacated cells are zero.
inline Grid<std::int8_t> shift_pattern(const Grid<std::int8_t>& h, const Displacement& r) {
  Grid<std::int8_t> out(h.cols(), h.rows(), 0);
  const long long dx = round_half_away(r.rx), dy = round_half_away(r.ry);
  const auto cols = static_cast<long long>(h.cols()), rows = static_cast<long long>(h.rows());
  for (long long row = 0; row < rows; ++row) {
    const long long src_row = row - dy;
    if (src_row < 0 || src_row >= rows) continue;
    for (long long col = 0; col < cols; ++col) {
      const long long src_col = col + dx;
      if (src_col < 0 || src_col >= cols) continue;
      out(static_cast<std::size_t>(col), static_cast<std::size_t>(row)) =
          h(static_cast<std::size_t>(src_col), static_cast<std::size_t>(src_row));
    }
  }
  return out;
}

inline Grid<std::int8_t> shift_pattern(const BipolarPattern& h, const Displacement& r) {
  return shift_pattern(h.values, r);
}

struct Snapshot {
  std::uint64_t tau = 0;  // modulation/sampling events consumed
  ImageD image;
};

/// Raw correlation sum plus pattern count. Partial accumulators over
/// disjoint record subsets merge by addition.
class ReconAccumulator {
public:
  ReconAccumulator() = default;
  ReconAccumulator(std::size_t cols, std::size_t rows, ReconMode mode = ReconMode::Compensated)
      : sum_(cols, rows, 0.0), mode_(mode) {}

  /// sum += (b_plus - b_minus) * shift_pattern(h, r); eta += 1.
  void accumulate(double b_plus, double b_minus, const Grid<std::int8_t>& h, const Displacement& r) {
    require_same_shape(sum_, h, "accumulate");
    const double diff = b_plus - b_minus;
    ++eta_;
    if (diff == 0.0) return;
    long long dx = 0, dy = 0;
    if (mode_ == ReconMode::Compensated) {
      dx = round_half_away(r.rx);
      dy = round_half_away(r.ry);
    }
    const auto cols = static_cast<long long>(sum_.cols()), rows = static_cast<long long>(sum_.rows());
    const long long col_lo = std::max(0LL, -dx), col_hi = std::min(cols, cols - dx);
    const long long row_lo = std::max(0LL, dy), row_hi = std::min(rows, rows + dy);
    for (long long row = row_lo; row < row_hi; ++row) {
      double* dst = sum_.data() + row * cols;
      const std::int8_t* src = h.data() + (row - dy) * cols;
      for (long long col = col_lo; col < col_hi; ++col) dst[col] += diff * src[col + dx];
    }
  }

  void accumulate(double b_plus, double b_minus, const BipolarPattern& h, const Displacement& r) {
    accumulate(b_plus, b_minus, h.values, r);
  }

  void merge(const ReconAccumulator& other) {
    require_same_shape(sum_, other.sum_, "merge");
    if (mode_ != other.mode_) throw DomainError("merge: accumulator modes differ");
    for (std::size_t i = 0; i < sum_.size(); ++i) sum_[i] += other.sum_[i];
    eta_ += other.eta_;
  }

  /// sum / eta.
  ImageD finalize() const {
    if (eta_ == 0) throw EmptyAccumulatorError("finalize: no patterns accumulated");
    ImageD out = sum_;
    const double inv = static_cast<double>(eta_);
    for (auto& v : out) v /= inv;
    return out;
  }

  void capture(std::uint64_t tau) { snapshots_.push_back({tau, finalize()}); }

  const ImageD& sum_image() const noexcept { return sum_; }
  std::uint64_t eta() const noexcept { return eta_; }
  ReconMode mode() const noexcept { return mode_; }
  const std::vector<Snapshot>& snapshots() const noexcept { return snapshots_; }

private:
  ImageD sum_;
  std::uint64_t eta_ = 0;
  ReconMode mode_ = ReconMode::Compensated;
  std::vector<Snapshot> snapshots_;
};

/// Affine map of [min, max] to [0, 1]; a constant image maps to zeros.
inline ImageD display_normalize(const ImageD& img) {
  ImageD out = img;
  if (img.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.begin(), img.end());
  const double a = *lo, span = *hi - *lo;
  for (auto& v : out) v = span > 0.0 ? (v - a) / span : 0.0;
  return out;
}

struct ReconResult {
  ImageD image;
  std::vector<Snapshot> snapshots;
  std::uint64_t eta = 0;
};

/// Fixes that carry known displacements (e.g. ground truth), one per set.
inline std::vector<TrackFix> fixes_from_displacements(std::span<const Displacement> displacements) {
  std::vector<TrackFix> out(displacements.size());
  for (std::size_t s = 0; s < displacements.size(); ++s) {
    out[s].set = s;
    out[s].displacement = displacements[s];
    out[s].valid = true;
  }
  return out;
}

/// Full reconstruction over an aligned stream / plan / fix list. Every pair
/// of a set uses that set's fix; gaps reuse the last valid displacement
/// ((0, 0) before the first). Snapshots are taken at the end of the first set
/// whose cumulative sample count reaches each checkpoint.
inline ReconResult mcspi_run(std::span<const BucketRecord> stream, const SequencePlan& plan,
                             std::span<const TrackFix> fixes, ReconMode mode,
                             std::vector<std::uint64_t> snapshot_taus = {}) {
  validate_stream(stream, plan);
  if (fixes.size() != plan.num_sets) {
    throw ProtocolError("mcspi_run: " + std::to_string(fixes.size()) + " fixes for " +
                        std::to_string(plan.num_sets) + " sets");
  }
  std::sort(snapshot_taus.begin(), snapshot_taus.end());
  ReconAccumulator acc(plan.side, plan.side, mode);
  Grid<std::int8_t> h(plan.side, plan.side);
  Displacement current{};
  const std::size_t set_len = plan.set_length();
  std::size_t next_snapshot = 0;
  for (std::size_t s = 0; s < plan.num_sets; ++s) {
    if (fixes[s].set != s) throw ProtocolError("mcspi_run: fix " + std::to_string(s) + " is out of order");
    if (fixes[s].valid) current = fixes[s].displacement;
    const auto records = stream.subspan(s * set_len, set_len);
    for (std::size_t k = 0; k + 1 < set_len; ++k) {
      if (records[k].kind != PatternKind::HadamardPos) continue;
      fill_basis_values(plan.side, records[k].basis_ordinal, h);
      acc.accumulate(records[k].value, records[k + 1].value, h, current);
    }
    const std::uint64_t tau = (s + 1) * set_len;
    bool captured = false;
    while (next_snapshot < snapshot_taus.size() && snapshot_taus[next_snapshot] <= tau) {
      if (!captured) acc.capture(tau);
      captured = true;
      ++next_snapshot;
    }
  }
  return {acc.finalize(), acc.snapshots(), acc.eta()};
}

}  // namespace mcspi
