#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "errors.hpp"
#include "grid.hpp"

namespace mcspi {

/// Mean squared difference over all pixels.
inline double mse(const ImageD& a, const ImageD& b) {
  require_same_shape(a, b, "mse");
  if (a.empty()) throw DomainError("mse: empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

/// 10 log10(peak^2 / mse); +inf when mse is zero.
inline double psnr_from_mse(double mse_value, double peakval = 1.0) {
  if (!(peakval > 0.0)) throw DomainError("psnr: peakval must be positive");
  if (mse_value == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peakval * peakval / mse_value);
}

inline double psnr(const ImageD& a, const ImageD& b, double peakval = 1.0) {
  return psnr_from_mse(mse(a, b), peakval);
}

inline double pearson_correlation(const ImageD& a, const ImageD& b) {
  require_same_shape(a, b, "pearson_correlation");
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Least-squares positive scale s minimising |s * truth - recon|, and the
/// resulting max |recon / s - truth| relative to max |truth|.
struct ScaleFit {
  double scale = 0.0;
  double max_relative_deviation = std::numeric_limits<double>::infinity();
};

inline ScaleFit fit_scale(const ImageD& recon, const ImageD& truth) {
  require_same_shape(recon, truth, "fit_scale");
  double num = 0.0, den = 0.0, peak = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    num += recon[i] * truth[i];
    den += truth[i] * truth[i];
    peak = std::max(peak, std::abs(truth[i]));
  }
  ScaleFit fit;
  if (den == 0.0 || peak == 0.0) return fit;
  fit.scale = num / den;
  if (!(fit.scale > 0.0)) return fit;
  double worst = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) worst = std::max(worst, std::abs(recon[i] / fit.scale - truth[i]));
  fit.max_relative_deviation = worst / peak;
  return fit;
}

struct SeriesPoint {
  std::uint64_t tau = 0;
  double mse = 0.0;
  double psnr = 0.0;
};

struct MetricsReport {
  double mse = 0.0;
  double psnr = 0.0;
  std::optional<double> mean_abs_position_error;
  std::vector<SeriesPoint> series;
};

}  // namespace mcspi
