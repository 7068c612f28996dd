#pragma once

// Three-intensity centroid tracking from the geometric-moment detections of
// each set.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "acquisition.hpp"
#include "errors.hpp"
#include "patterns.hpp"
#include "scene.hpp"

namespace mcspi {

struct ReferencePoint {
  double x0 = 0.0;
  double y0 = 0.0;

  /// ((C + 1) / 2, (R + 1) / 2): the field center in 1-indexed coordinates.
  static ReferencePoint field_center(std::size_t cols, std::size_t rows) {
    return {(static_cast<double>(cols) + 1.0) / 2.0, (static_cast<double>(rows) + 1.0) / 2.0};
  }
};

struct TrackFix {
  std::uint64_t set = 0;
  double xc_norm = 0.0;
  double yc_norm = 0.0;
  double x_pix = 0.0;
  double y_pix = 0.0;  // counted upward from the bottom row
  Displacement displacement;
  double i1_equiv = 0.0;
  bool valid = false;
  bool out_of_field = false;

  friend bool operator==(const TrackFix&, const TrackFix&) = default;
};

struct CentroidEstimate {
  double xc_norm = 0.0, yc_norm = 0.0;
  double x_pix = 0.0, y_pix = 0.0;
  bool out_of_field = false;
};

enum class I1Source { LastPair, MeanOfPairs };
enum class ReferenceMode { FieldCenter, FirstFix };

struct TrackOptions {
  I1Source i1_source = I1Source::LastPair;
  ReferenceMode reference_mode = ReferenceMode::FieldCenter;
  std::optional<ReferencePoint> reference;  // overrides reference_mode when set
  std::size_t smoothing_window = 1;         // trailing moving average; 1 = off
};

/// Detection equivalent to the S1 illumination: B+ + B-.
inline double i1_equivalent(double b_plus, double b_minus) { return b_plus + b_minus; }

inline double epsilon_signal(std::size_t cols, std::size_t rows) {
  return 1e-9 * static_cast<double>(cols) * static_cast<double>(rows);
}

/// x_c = I2 / I1, y_c = I3 / I1, scaled by C and R to pixels.
inline CentroidEstimate centroid_from_intensities(double i2, double i3, double i1, std::size_t cols, std::size_t rows) {
  if (!(i1 > epsilon_signal(cols, rows))) {
    throw NoObjectError("zero-order detection " + std::to_string(i1) + " below signal floor");
  }
  CentroidEstimate e;
  e.xc_norm = i2 / i1;
  e.yc_norm = i3 / i1;
  e.x_pix = static_cast<double>(cols) * e.xc_norm;
  e.y_pix = static_cast<double>(rows) * e.yc_norm;
  e.out_of_field = !(e.xc_norm > 0.0 && e.xc_norm <= 1.0 && e.yc_norm > 0.0 && e.yc_norm <= 1.0);
  return e;
}

/// One fix from the records of one set. I1 comes from the last
/// complementary pair (closest in time to the moment projections) unless
/// configured to average all pairs.
inline TrackFix fix_from_set(std::span<const BucketRecord> set_records, const ReferencePoint& reference,
                             std::size_t cols, std::size_t rows, I1Source i1_source = I1Source::LastPair) {
  std::optional<double> i2, i3;
  double i1_last = 0.0, i1_total = 0.0;
  std::size_t pairs = 0;
  std::optional<BucketRecord> pending;
  for (const auto& r : set_records) {
    switch (r.kind) {
      case PatternKind::HadamardPos:
        if (pending) throw ProtocolError("set: H+ without matching H-");
        pending = r;
        break;
      case PatternKind::HadamardNeg:
        if (!pending || pending->basis_ordinal != r.basis_ordinal) throw ProtocolError("set: H- without matching H+");
        i1_last = i1_equivalent(pending->value, r.value);
        i1_total += i1_last;
        ++pairs;
        pending.reset();
        break;
      case PatternKind::MomentS2:
        if (i2) throw ProtocolError("set: duplicate S2 record");
        i2 = r.value;
        break;
      case PatternKind::MomentS3:
        if (i3) throw ProtocolError("set: duplicate S3 record");
        i3 = r.value;
        break;
    }
  }
  if (pending || pairs == 0 || !i2 || !i3) {
    throw ProtocolError("set needs at least one complementary pair and both moment records");
  }
  TrackFix fix;
  fix.set = set_records.front().set;
  fix.i1_equiv = i1_source == I1Source::LastPair ? i1_last : i1_total / static_cast<double>(pairs);
  const auto c = centroid_from_intensities(*i2, *i3, fix.i1_equiv, cols, rows);
  fix.xc_norm = c.xc_norm;
  fix.yc_norm = c.yc_norm;
  fix.x_pix = c.x_pix;
  fix.y_pix = c.y_pix;
  fix.out_of_field = c.out_of_field;
  fix.displacement = {c.x_pix - reference.x0, c.y_pix - reference.y0};
  fix.valid = true;
  return fix;
}

struct TrackSummary {
  std::optional<double> mean_abs_error_px;
  std::size_t fixes = 0;
  std::size_t gaps = 0;
};

struct TrackResult {
  std::vector<TrackFix> fixes;  // one per set; invalid entries are gaps
  TrackSummary summary;
  ReferencePoint reference;
};

/// Mean Euclidean distance between valid fixes and the true centroids of
/// unclipped frames.
inline std::optional<double> mean_position_error(std::span<const TrackFix> fixes, std::span<const SetTruth> truth) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& f : fixes) {
    if (!f.valid || f.set >= truth.size()) continue;
    const auto& t = truth[f.set];
    if (!t.inside) continue;
    total += std::hypot(f.x_pix - t.centroid_x, f.y_pix - t.centroid_y);
    ++count;
  }
  if (count == 0) return std::nullopt;
  return total / static_cast<double>(count);
}

inline TrackResult track_run(std::span<const BucketRecord> stream, const SequencePlan& plan,
                             const TrackOptions& options = {}, std::span<const SetTruth> truth = {}) {
  validate_stream(stream, plan);
  const std::size_t cols = plan.side, rows = plan.side;
  TrackResult result;
  result.reference = options.reference.value_or(ReferencePoint::field_center(cols, rows));
  const std::size_t set_len = plan.set_length();
  result.fixes.reserve(plan.num_sets);
  for (std::size_t s = 0; s < plan.num_sets; ++s) {
    const auto records = stream.subspan(s * set_len, set_len);
    try {
      result.fixes.push_back(fix_from_set(records, result.reference, cols, rows, options.i1_source));
    } catch (const NoObjectError&) {
      TrackFix gap;
      gap.set = s;
      result.fixes.push_back(gap);
    }
  }
  if (!options.reference && options.reference_mode == ReferenceMode::FirstFix) {
    for (const auto& f : result.fixes) {
      if (f.valid) {
        result.reference = {f.x_pix, f.y_pix};
        break;
      }
    }
    for (auto& f : result.fixes) {
      if (f.valid) f.displacement = {f.x_pix - result.reference.x0, f.y_pix - result.reference.y0};
    }
  }
  if (options.smoothing_window > 1) {
    std::vector<Displacement> raw;
    for (auto& f : result.fixes) {
      if (!f.valid) continue;
      raw.push_back(f.displacement);
      const std::size_t w = std::min(options.smoothing_window, raw.size());
      Displacement avg;
      for (std::size_t k = raw.size() - w; k < raw.size(); ++k) {
        avg.rx += raw[k].rx;
        avg.ry += raw[k].ry;
      }
      f.displacement = {avg.rx / static_cast<double>(w), avg.ry / static_cast<double>(w)};
    }
  }
  for (const auto& f : result.fixes) (f.valid ? result.summary.fixes : result.summary.gaps) += 1;
  if (!truth.empty()) result.summary.mean_abs_error_px = mean_position_error(result.fixes, truth);
  return result;
}

// ---------------------------------------------------------------------------
// Track CSV: set,x_pix,y_pix,rx,ry,valid

inline void write_track_csv(std::ostream& os, std::span<const TrackFix> fixes) {
  os << "set,x_pix,y_pix,rx,ry,valid\n";
  char buf[64];
  auto num = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  for (const auto& f : fixes) {
    os << f.set << ',' << num(f.x_pix) << ',' << num(f.y_pix) << ',' << num(f.displacement.rx) << ','
       << num(f.displacement.ry) << ',' << (f.valid ? 1 : 0) << '\n';
  }
}

inline std::vector<TrackFix> read_track_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("set,x_pix,y_pix,rx,ry,valid", 0) != 0) {
    throw ConfigError("track CSV: missing header");
  }
  std::vector<TrackFix> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[6];
    for (auto& field : f) {
      if (!std::getline(ls, field, ',')) throw ConfigError("track CSV: malformed line '" + line + "'");
    }
    TrackFix fix;
    try {
      fix.set = std::stoull(f[0]);
      fix.x_pix = std::stod(f[1]);
      fix.y_pix = std::stod(f[2]);
      fix.displacement = {std::stod(f[3]), std::stod(f[4])};
      fix.valid = std::stoi(f[5]) != 0;
    } catch (const std::logic_error&) {
      throw ConfigError("track CSV: malformed line '" + line + "'");
    }
    out.push_back(fix);
  }
  return out;
}

}  // namespace mcspi
