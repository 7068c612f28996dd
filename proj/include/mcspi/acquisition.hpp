#pragma once

// Simulated bucket-detector acquisition and bucket stream persistence.

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"
#include "patterns.hpp"
#include "scene.hpp"

namespace mcspi {

struct BucketRecord {
  std::uint64_t slot = 0;
  std::uint64_t set = 0;
  PatternKind kind = PatternKind::HadamardPos;
  std::uint32_t basis_ordinal = kNoOrdinal;
  double value = 0.0;

  friend bool operator==(const BucketRecord&, const BucketRecord&) = default;
};

enum class NoiseKind { None, AdditiveGaussian };

struct NoiseModel {
  NoiseKind kind = NoiseKind::None;
  double sigma = 0.0;
  std::uint64_t seed = 7;
};

/// Ground truth the simulator knows for each set (or each slot in
/// per-pattern motion mode, keyed by the set's S2 slot).
struct SetTruth {
  std::uint64_t set = 0;
  Displacement displacement;  // unrounded trajectory value
  double centroid_x = 0.0;    // 1-indexed column coordinate
  double centroid_y = 0.0;    // 1-indexed, counted from the bottom row
  bool inside = true;         // object not clipped
};

struct AcquisitionOptions {
  bool per_pattern_motion = false;  // stress mode: object moves every slot
};

struct AcquisitionResult {
  std::vector<BucketRecord> records;
  std::vector<SetTruth> truth;
};

/// Exact elementwise-product sum of a frame and a binary mask.
inline double measure(const ImageD& frame, const Grid<std::uint8_t>& mask) {
  require_same_shape(frame, mask, "measure");
  double s = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) s += frame[i] * static_cast<double>(mask[i]);
  return s;
}

inline double measure(const ImageD& frame, const BinaryPattern& pattern) { return measure(frame, pattern.values); }

/// (measure(frame, pos), measure(frame, neg)) for the complementary split of
/// a bipolar pattern, without materializing the binary masks. Summation
/// order matches measure() and skipped terms are +0.0, so results are
/// bit-identical.
inline std::pair<double, double> measure_complementary(const ImageD& frame, const Grid<std::int8_t>& bipolar) {
  require_same_shape(frame, bipolar, "measure_complementary");
  double pos = 0.0, neg = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (bipolar[i] > 0) {
      pos += frame[i];
    } else {
      neg += frame[i];
    }
  }
  return {pos, neg};
}

/// Fills `out` (side x side) with natural basis pattern `index`.
inline void fill_basis_values(std::size_t side, std::uint32_t index, Grid<std::int8_t>& out) {
  if (out.cols() != side || out.rows() != side) out = Grid<std::int8_t>(side, side);
  for (std::size_t j = 0; j < side * side; ++j) out[j] = sylvester_entry(index, j);
}

/// Centroid of a frame in the moment coordinate convention: x is the
/// 1-indexed column, y is the 1-indexed row counted from the bottom.
inline std::pair<double, double> frame_centroid(const ImageD& frame) {
  double m00 = 0.0, m10 = 0.0, m01 = 0.0;
  const auto rows = frame.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const double y = static_cast<double>(rows - r);
    for (std::size_t c = 0; c < frame.cols(); ++c) {
      const double v = frame(c, r);
      m00 += v;
      m10 += v * static_cast<double>(c + 1);
      m01 += v * y;
    }
  }
  if (m00 <= 0.0) return {0.0, 0.0};
  return {m10 / m00, m01 / m00};
}

/// Project every plan entry onto the moving scene and record one bucket
/// value per pattern. Motion is applied between sets (quasi-static within a
/// set) unless per-pattern motion is requested.
inline AcquisitionResult run_acquisition(SceneState& scene, const Trajectory& trajectory, const SequencePlan& plan,
                                         const NoiseModel& noise = {}, const AcquisitionOptions& options = {}) {
  if (plan.side != scene.cols() || plan.side != scene.rows()) {
    throw DomainError("run_acquisition: plan side " + std::to_string(plan.side) + " does not match field " +
                      std::to_string(scene.cols()) + "x" + std::to_string(scene.rows()));
  }
  if (noise.kind == NoiseKind::AdditiveGaussian && !(noise.sigma >= 0.0)) {
    throw DomainError("noise sigma must be >= 0");
  }
  const std::size_t set_len = plan.set_length();
  const auto [s2, s3] = moment_binary_patterns(scene.cols(), scene.rows());
  const auto steps =
      displacement_series(trajectory, options.per_pattern_motion ? plan.entries.size() : plan.num_sets);

  std::mt19937_64 noise_rng(noise.seed);
  std::normal_distribution<double> gauss(0.0, noise.sigma > 0.0 ? noise.sigma : 1.0);
  const bool add_noise = noise.kind == NoiseKind::AdditiveGaussian && noise.sigma > 0.0;

  AcquisitionResult out;
  out.records.reserve(plan.entries.size());
  out.truth.reserve(plan.num_sets);
  Grid<std::int8_t> bipolar(plan.side, plan.side);
  ImageD frame;
  std::pair<double, double> pair_values{0.0, 0.0};

  for (std::size_t s = 0; s < plan.num_sets; ++s) {
    const auto entries = plan.set(s);
    if (!options.per_pattern_motion) {
      scene.set_displacement(steps[s]);
      frame = render_frame(scene);
    }
    for (std::size_t k = 0; k < set_len; ++k) {
      const std::uint64_t slot = s * set_len + k;
      scene.advance_slot(slot);
      if (options.per_pattern_motion) {
        scene.set_displacement(steps[slot]);
        frame = render_frame(scene);
      }
      const auto& e = entries[k];
      double value = 0.0;
      switch (e.kind) {
        case PatternKind::HadamardPos:
          fill_basis_values(plan.side, e.basis_index, bipolar);
          pair_values = measure_complementary(frame, bipolar);
          value = pair_values.first;
          break;
        case PatternKind::HadamardNeg:
          if (options.per_pattern_motion) {
            fill_basis_values(plan.side, e.basis_index, bipolar);
            pair_values = measure_complementary(frame, bipolar);
          }
          value = pair_values.second;
          break;
        case PatternKind::MomentS2:
          value = measure(frame, s2);
          break;
        case PatternKind::MomentS3:
          value = measure(frame, s3);
          break;
      }
      if (add_noise) value += gauss(noise_rng);
      out.records.push_back({slot, s, e.kind, e.basis_index, value});
      if (e.kind == PatternKind::MomentS2) {
        const auto [cx, cy] = frame_centroid(frame);
        out.truth.push_back({s, scene.displacement(), cx, cy, scene.fully_inside(scene.displacement())});
      }
    }
  }
  return out;
}

/// Throws ProtocolError unless the stream matches the plan record for record.
inline void validate_stream(std::span<const BucketRecord> records, const SequencePlan& plan) {
  if (records.size() != plan.entries.size()) {
    throw ProtocolError("stream has " + std::to_string(records.size()) + " records, plan expects " +
                        std::to_string(plan.entries.size()));
  }
  const std::size_t set_len = plan.set_length();
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto& e = plan.entries[i];
    if (r.slot != i || r.set != i / set_len || r.kind != e.kind || r.basis_ordinal != e.basis_index) {
      throw ProtocolError("stream record " + std::to_string(i) + " does not match plan entry");
    }
  }
}

// ---------------------------------------------------------------------------
// Persistence: CSV and "SPIBKT v1" little-endian binary records.

inline void write_stream_csv(std::ostream& os, std::span<const BucketRecord> records) {
  os << "slot,set,kind,basis_ordinal,value\n";
  char buf[64];
  for (const auto& r : records) {
    os << r.slot << ',' << r.set << ',' << to_string(r.kind) << ',';
    if (r.basis_ordinal != kNoOrdinal) os << r.basis_ordinal;
    const auto res = std::to_chars(buf, buf + sizeof buf, r.value);
    os << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
  }
}

inline std::vector<BucketRecord> read_stream_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("slot,set,kind,basis_ordinal,value", 0) != 0) {
    throw ConfigError("bucket CSV: missing header");
  }
  std::vector<BucketRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string f[5];
    for (int k = 0; k < 5; ++k) {
      if (!std::getline(ls, f[k], k < 4 ? ',' : '\n')) {
        if (k == 4) break;
        throw ConfigError("bucket CSV: malformed line '" + line + "'");
      }
    }
    BucketRecord r;
    try {
      r.slot = std::stoull(f[0]);
      r.set = std::stoull(f[1]);
      r.kind = pattern_kind_from_string(f[2]);
      r.basis_ordinal = f[3].empty() ? kNoOrdinal : static_cast<std::uint32_t>(std::stoul(f[3]));
      r.value = std::stod(f[4]);
    } catch (const std::exception&) {
      throw ConfigError("bucket CSV: malformed line '" + line + "'");
    }
    out.push_back(r);
  }
  return out;
}

namespace detail {

template <typename T>
void put_le(std::ostream& os, T v) {
  unsigned char b[sizeof(T)];
  std::uint64_t bits = 0;
  if constexpr (std::is_floating_point_v<T>) {
    bits = std::bit_cast<std::uint64_t>(v);
  } else {
    bits = static_cast<std::uint64_t>(v);
  }
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <typename T>
bool get_le(std::istream& is, T& v) {
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) return false;
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  if constexpr (std::is_floating_point_v<T>) {
    v = std::bit_cast<T>(bits);
  } else {
    v = static_cast<T>(bits);
  }
  return true;
}

}  // namespace detail

inline constexpr std::string_view kBucketMagic = "SPIBKT v1\n";

inline void write_stream_binary(std::ostream& os, std::span<const BucketRecord> records) {
  os.write(kBucketMagic.data(), static_cast<std::streamsize>(kBucketMagic.size()));
  for (const auto& r : records) {
    detail::put_le<std::uint64_t>(os, r.slot);
    detail::put_le<std::uint64_t>(os, r.set);
    detail::put_le<std::uint8_t>(os, static_cast<std::uint8_t>(r.kind));
    detail::put_le<std::uint32_t>(os, r.basis_ordinal);
    detail::put_le<double>(os, r.value);
  }
}

inline std::vector<BucketRecord> read_stream_binary(std::istream& is) {
  std::string magic(kBucketMagic.size(), '\0');
  if (!is.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kBucketMagic) {
    throw ConfigError("bucket stream: bad magic");
  }
  std::vector<BucketRecord> out;
  while (true) {
    BucketRecord r;
    if (!detail::get_le(is, r.slot)) break;
    std::uint8_t kind = 0;
    if (!detail::get_le(is, r.set) || !detail::get_le(is, kind) || !detail::get_le(is, r.basis_ordinal) ||
        !detail::get_le(is, r.value)) {
      throw ConfigError("bucket stream: truncated record");
    }
    if (kind > 3) throw ConfigError("bucket stream: bad pattern kind");
    r.kind = static_cast<PatternKind>(kind);
    out.push_back(r);
  }
  return out;
}

/// Reads either format, chosen by content.
inline std::vector<BucketRecord> read_stream_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("cannot open bucket stream '" + path + "'");
  char first[6] = {};
  is.read(first, 6);
  is.clear();
  is.seekg(0);
  if (std::string_view(first, 6) == "SPIBKT") return read_stream_binary(is);
  return read_stream_csv(is);
}

inline void write_stream_file(const std::string& path, std::span<const BucketRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot open '" + path + "' for writing");
  const bool csv = path.size() >= 4 && path.substr(path.size() - 4) == ".csv";
  if (csv) {
    write_stream_csv(os, records);
  } else {
    write_stream_binary(os, records);
  }
  if (!os) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace mcspi
