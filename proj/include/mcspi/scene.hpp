#pragma once

// Moving-object model: reflectance image, trajectories, and frame rendering.
//
// Coordinates: x grows to the right along columns; y grows toward the TOP
// row (the S3 moment convention). Rendering converts y to row offsets.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace mcspi {

struct Displacement {
  double rx = 0.0;
  double ry = 0.0;

  friend bool operator==(const Displacement&, const Displacement&) = default;
};

/// Reflectance in [0,1] with at least one positive pixel.
class ObjectImage {
public:
  ObjectImage() = default;
  explicit ObjectImage(ImageD reflectance) : reflectance_(std::move(reflectance)) {
    bool any_positive = false;
    for (double v : reflectance_) {
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("object reflectance outside [0,1]");
      any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) throw DomainError("object image is entirely zero");
  }

  const ImageD& reflectance() const noexcept { return reflectance_; }
  std::size_t width() const noexcept { return reflectance_.cols(); }
  std::size_t height() const noexcept { return reflectance_.rows(); }

private:
  ImageD reflectance_;
};

enum class TrajectoryModel { PresetPath, RandomWalk, Pendulum, Static };

inline std::string to_string(TrajectoryModel m) {
  switch (m) {
    case TrajectoryModel::PresetPath: return "preset-path";
    case TrajectoryModel::RandomWalk: return "random-walk";
    case TrajectoryModel::Pendulum: return "pendulum";
    case TrajectoryModel::Static: return "static";
  }
  return "?";
}

inline TrajectoryModel trajectory_model_from_string(const std::string& s) {
  if (s == "preset-path") return TrajectoryModel::PresetPath;
  if (s == "random-walk") return TrajectoryModel::RandomWalk;
  if (s == "pendulum") return TrajectoryModel::Pendulum;
  if (s == "static") return TrajectoryModel::Static;
  throw DomainError("unknown trajectory model '" + s + "'");
}

struct Waypoint {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Waypoint&, const Waypoint&) = default;
};

/// Inclusive displacement box, used to keep the object inside the field.
struct DisplacementBounds {
  double rx_min = 0.0, rx_max = 0.0, ry_min = 0.0, ry_max = 0.0;
  friend bool operator==(const DisplacementBounds&, const DisplacementBounds&) = default;
};

struct Trajectory {
  TrajectoryModel model = TrajectoryModel::Static;

  // PresetPath: polyline in displacement space. When `times` is non-empty it
  // holds the set index of each waypoint and positions are interpolated in
  // time; otherwise the polyline is walked at `step` pixels per set.
  std::vector<Waypoint> waypoints;
  std::vector<double> times;
  double step = 1.0;
  bool loop = true;  // close the polyline and keep cycling

  // RandomWalk
  double max_step = 60.0;
  std::optional<DisplacementBounds> bounds;

  // Pendulum: (A sin(phi), B (1 - cos(phi))), phi = phi0 cos(2 pi s / T)
  double amplitude_x = 30.0;
  double amplitude_y = 10.0;
  double phi0 = 0.5;
  double period = 400.0;

  std::uint64_t seed = 1;
};

namespace detail {

/// 53-bit uniform in [0,1) from one 64-bit draw; identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline Displacement clamp_to(Displacement d, const std::optional<DisplacementBounds>& b) {
  if (b) {
    d.rx = std::clamp(d.rx, b->rx_min, b->rx_max);
    d.ry = std::clamp(d.ry, b->ry_min, b->ry_max);
  }
  return d;
}

inline Displacement path_position(const Trajectory& t, std::size_t set_index) {
  const auto& w = t.waypoints;
  if (w.empty()) return {};
  if (w.size() == 1) return {w[0].x, w[0].y};
  if (!t.times.empty()) {
    if (t.times.size() != w.size()) throw DomainError("path: times and waypoints differ in length");
    const double s = static_cast<double>(set_index);
    if (s <= t.times.front()) return {w.front().x, w.front().y};
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (s <= t.times[i]) {
        const double span = t.times[i] - t.times[i - 1];
        const double f = span > 0.0 ? (s - t.times[i - 1]) / span : 1.0;
        return {w[i - 1].x + f * (w[i].x - w[i - 1].x), w[i - 1].y + f * (w[i].y - w[i - 1].y)};
      }
    }
    return {w.back().x, w.back().y};
  }
  std::vector<Waypoint> pts = w;
  if (t.loop && !(pts.front() == pts.back())) pts.push_back(pts.front());
  std::vector<double> seg(pts.size() - 1);
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    seg[i] = std::hypot(pts[i + 1].x - pts[i].x, pts[i + 1].y - pts[i].y);
    total += seg[i];
  }
  if (total <= 0.0) return {pts[0].x, pts[0].y};
  double s = t.step * static_cast<double>(set_index);
  if (t.loop) {
    s = std::fmod(s, total);
  } else if (s >= total) {
    return {pts.back().x, pts.back().y};
  }
  for (std::size_t i = 0; i < seg.size(); ++i) {
    if (s <= seg[i] || i + 1 == seg.size()) {
      const double f = seg[i] > 0.0 ? std::min(s / seg[i], 1.0) : 0.0;
      return {pts[i].x + f * (pts[i + 1].x - pts[i].x), pts[i].y + f * (pts[i + 1].y - pts[i].y)};
    }
    s -= seg[i];
  }
  return {pts.back().x, pts.back().y};
}

inline Displacement pendulum_position(const Trajectory& t, std::size_t set_index) {
  if (t.period <= 0.0) throw DomainError("pendulum: period must be positive");
  const double phi = t.phi0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(set_index) / t.period);
  return {t.amplitude_x * std::sin(phi), t.amplitude_y * (1.0 - std::cos(phi))};
}

}  // namespace detail

/// Displacements for sets 0 .. count-1. Random walks are cumulative, so the
/// whole prefix is generated in one pass.
inline std::vector<Displacement> displacement_series(const Trajectory& t, std::size_t count) {
  std::vector<Displacement> out;
  out.reserve(count);
  switch (t.model) {
    case TrajectoryModel::Static:
      out.assign(count, Displacement{});
      break;
    case TrajectoryModel::PresetPath:
      for (std::size_t s = 0; s < count; ++s) out.push_back(detail::path_position(t, s));
      break;
    case TrajectoryModel::Pendulum:
      for (std::size_t s = 0; s < count; ++s) out.push_back(detail::pendulum_position(t, s));
      break;
    case TrajectoryModel::RandomWalk: {
      if (t.max_step < 0.0) throw DomainError("random walk: max_step must be >= 0");
      std::mt19937_64 rng(t.seed);
      Displacement d = detail::clamp_to({}, t.bounds);
      for (std::size_t s = 0; s < count; ++s) {
        if (s > 0) {
          const double len = detail::unit_uniform(rng) * t.max_step;
          const double dir = detail::unit_uniform(rng) * 2.0 * std::numbers::pi;
          d = detail::clamp_to({d.rx + len * std::cos(dir), d.ry + len * std::sin(dir)}, t.bounds);
        }
        out.push_back(d);
      }
      break;
    }
    default:
      throw DomainError("unknown trajectory model");
  }
  return out;
}

inline Displacement displacement_at(const Trajectory& t, std::size_t set_index) {
  switch (t.model) {
    case TrajectoryModel::Static: return {};
    case TrajectoryModel::PresetPath: return detail::path_position(t, set_index);
    case TrajectoryModel::Pendulum: return detail::pendulum_position(t, set_index);
    case TrajectoryModel::RandomWalk: return displacement_series(t, set_index + 1).back();
  }
  throw DomainError("unknown trajectory model");
}

/// Field + object + current displacement. The object is anchored so that its
/// intensity centroid sits on the field center (within half a pixel) at
/// displacement (0, 0).
class SceneState {
public:
  SceneState(std::size_t cols, std::size_t rows, ObjectImage object)
      : cols_(cols), rows_(rows), object_(std::move(object)) {
    if (object_.width() > cols_ || object_.height() > rows_) {
      throw DomainError("object (" + std::to_string(object_.width()) + "x" + std::to_string(object_.height()) +
                        ") larger than field (" + std::to_string(cols_) + "x" + std::to_string(rows_) + ")");
    }
    const auto& p = object_.reflectance();
    double m00 = 0.0, mc = 0.0, mr = 0.0;
    bbox_ = {p.cols(), 0, p.rows(), 0};
    for (std::size_t r = 0; r < p.rows(); ++r) {
      for (std::size_t c = 0; c < p.cols(); ++c) {
        const double v = p(c, r);
        m00 += v;
        mc += v * static_cast<double>(c);
        mr += v * static_cast<double>(r);
        if (v > 0.0) {
          bbox_[0] = std::min(bbox_[0], c);
          bbox_[1] = std::max(bbox_[1], c);
          bbox_[2] = std::min(bbox_[2], r);
          bbox_[3] = std::max(bbox_[3], r);
        }
      }
    }
    col_offset_ = round_half_away((static_cast<double>(cols_) - 1.0) / 2.0 - mc / m00);
    row_offset_ = round_half_away((static_cast<double>(rows_) - 1.0) / 2.0 - mr / m00);
  }

  std::size_t cols() const noexcept { return cols_; }
  std::size_t rows() const noexcept { return rows_; }
  const ObjectImage& object() const noexcept { return object_; }
  const Displacement& displacement() const noexcept { return displacement_; }
  std::uint64_t slot() const noexcept { return slot_; }

  void set_displacement(Displacement d) {
    if (!std::isfinite(d.rx) || !std::isfinite(d.ry)) throw DomainError("non-finite displacement");
    displacement_ = d;
  }
  void advance_slot(std::uint64_t to) {
    if (to < slot_) throw ProtocolError("scene slot index must not decrease");
    slot_ = to;
  }

  /// Displacement box that keeps every non-zero object pixel in the field.
  DisplacementBounds in_field_bounds() const {
    const auto c0 = static_cast<double>(col_offset_), r0 = static_cast<double>(row_offset_);
    return {-(c0 + static_cast<double>(bbox_[0])), static_cast<double>(cols_) - 1.0 - (c0 + static_cast<double>(bbox_[1])),
            (r0 + static_cast<double>(bbox_[3])) - (static_cast<double>(rows_) - 1.0), r0 + static_cast<double>(bbox_[2])};
  }

  /// True when the rounded displacement keeps the object fully in the field.
  bool fully_inside(const Displacement& d) const {
    const auto b = in_field_bounds();
    const auto rx = static_cast<double>(round_half_away(d.rx)), ry = static_cast<double>(round_half_away(d.ry));
    return rx >= b.rx_min && rx <= b.rx_max && ry >= b.ry_min && ry <= b.ry_max;
  }

  long long col_offset() const noexcept { return col_offset_; }
  long long row_offset() const noexcept { return row_offset_; }

private:
  std::size_t cols_, rows_;
  ObjectImage object_;
  Displacement displacement_{};
  std::uint64_t slot_ = 0;
  long long col_offset_ = 0, row_offset_ = 0;
  std::array<std::size_t, 4> bbox_{};  // col_min, col_max, row_min, row_max
};

/// Object placed at its anchor translated by the rounded displacement; pixels
/// falling outside the field are clipped, background is zero.
inline ImageD render_frame(const SceneState& scene, const Displacement& d) {
  ImageD frame(scene.cols(), scene.rows(), 0.0);
  const auto& p = scene.object().reflectance();
  const long long dc = scene.col_offset() + round_half_away(d.rx);
  const long long dr = scene.row_offset() - round_half_away(d.ry);
  const auto cols = static_cast<long long>(scene.cols()), rows = static_cast<long long>(scene.rows());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const long long fr = static_cast<long long>(r) + dr;
    if (fr < 0 || fr >= rows) continue;
    for (std::size_t c = 0; c < p.cols(); ++c) {
      const long long fc = static_cast<long long>(c) + dc;
      if (fc < 0 || fc >= cols) continue;
      frame(static_cast<std::size_t>(fc), static_cast<std::size_t>(fr)) = p(c, r);
    }
  }
  return frame;
}

inline ImageD render_frame(const SceneState& scene) { return render_frame(scene, scene.displacement()); }

// ---------------------------------------------------------------------------
// Built-in test objects

/// Solid square of the given side, value 1.
inline ObjectImage square_object(std::size_t side, double value = 1.0) {
  return ObjectImage(ImageD(side, side, value));
}

/// Aircraft-like silhouette with graded shading: fuselage, swept wings,
/// tailplane, and a darker canopy.
inline ObjectImage plane_object(std::size_t size) {
  if (size < 8) throw DomainError("plane_object: size must be >= 8");
  ImageD img(size, size, 0.0);
  const double s = static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double x = (static_cast<double>(c) + 0.5) / s - 0.5;  // [-0.5, 0.5]
      const double y = (static_cast<double>(r) + 0.5) / s - 0.5;  // top negative
      double v = 0.0;
      // fuselage: slim vertical ellipse
      if ((x * x) / (0.07 * 0.07) + (y * y) / (0.46 * 0.46) <= 1.0) v = 0.85 - 0.4 * std::abs(y);
      // main wings: swept trapezoid
      const double wing_y = -0.02 + 0.35 * std::abs(x);
      if (std::abs(x) <= 0.47 && y >= wing_y - 0.06 && y <= wing_y + 0.06) v = std::max(v, 0.7 - 0.5 * std::abs(x));
      // tailplane
      const double tail_y = 0.34 + 0.2 * std::abs(x);
      if (std::abs(x) <= 0.17 && y >= tail_y - 0.04 && y <= tail_y + 0.04) v = std::max(v, 0.6);
      // canopy
      if ((x * x) / (0.035 * 0.035) + ((y + 0.25) * (y + 0.25)) / (0.07 * 0.07) <= 1.0) v = 0.25;
      img(c, r) = std::clamp(v, 0.0, 1.0);
    }
  }
  return ObjectImage(std::move(img));
}

/// Resolution-chart-like target: groups of vertical and horizontal bars of
/// decreasing width inside a thin frame.
inline ObjectImage resolution_object(std::size_t size) {
  if (size < 16) throw DomainError("resolution_object: size must be >= 16");
  ImageD img(size, size, 0.0);
  for (std::size_t i = 0; i < size; ++i) {
    img(i, 0) = img(i, size - 1) = img(0, i) = img(size - 1, i) = 1.0;
  }
  const std::size_t half = size / 2;
  std::size_t c = 2;
  for (std::size_t w = std::max<std::size_t>(size / 16, 1); w >= 1 && c + 5 * w < half; w = w > 1 ? w - 1 : 0) {
    for (std::size_t b = 0; b < 3; ++b, c += 2 * w) {
      for (std::size_t cc = c; cc < c + w; ++cc) {
        for (std::size_t r = 2; r < half - 1; ++r) img(cc, r) = 1.0;
      }
    }
    c += w;
    if (w == 1) break;
  }
  std::size_t r = half + 1;
  for (std::size_t w = std::max<std::size_t>(size / 16, 1); w >= 1 && r + 5 * w < size - 2; w = w > 1 ? w - 1 : 0) {
    for (std::size_t b = 0; b < 3; ++b, r += 2 * w) {
      for (std::size_t rr = r; rr < r + w; ++rr) {
        for (std::size_t cc = 2; cc < half - 1; ++cc) img(cc, rr) = 1.0;
      }
    }
    r += w;
    if (w == 1) break;
  }
  // right half: graded disc
  const double cx = 0.75 * static_cast<double>(size), cy = 0.5 * static_cast<double>(size);
  const double rad = 0.2 * static_cast<double>(size);
  for (std::size_t rr = 1; rr + 1 < size; ++rr) {
    for (std::size_t cc = half; cc + 1 < size; ++cc) {
      const double d = std::hypot(static_cast<double>(cc) + 0.5 - cx, static_cast<double>(rr) + 0.5 - cy);
      if (d <= rad) img(cc, rr) = 0.4 + 0.6 * (1.0 - d / rad);
    }
  }
  return ObjectImage(std::move(img));
}

inline ObjectImage builtin_object(const std::string& name, std::size_t size) {
  if (name == "square") return square_object(size);
  if (name == "plane") return plane_object(size);
  if (name == "resolution") return resolution_object(size);
  throw DomainError("unknown built-in object '" + name + "'");
}

}  // namespace mcspi
