#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"

namespace mcspi {

/// Dense 2D grid stored row-major. Row 0 is the TOP row of the field;
/// column 0 is the leftmost column.
template <typename T>
class Grid {
public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t cols, std::size_t rows, T fill = T{})
      : cols_(cols), rows_(rows), data_(cols * rows, fill) {}
  Grid(std::size_t cols, std::size_t rows, std::vector<T> data)
      : cols_(cols), rows_(rows), data_(std::move(data)) {
    if (data_.size() != cols_ * rows_) {
      throw DomainError("grid data size does not match dimensions");
    }
  }

  std::size_t cols() const noexcept { return cols_; }
  std::size_t rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t col, std::size_t row) { return data_[row * cols_ + col]; }
  const T& operator()(std::size_t col, std::size_t row) const { return data_[row * cols_ + col]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  bool same_shape(const Grid& other) const noexcept {
    return cols_ == other.cols_ && rows_ == other.rows_;
  }
  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return cols_ == other.cols() && rows_ == other.rows();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

private:
  std::size_t cols_ = 0;
  std::size_t rows_ = 0;
  std::vector<T> data_;
};

using ImageD = Grid<double>;

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.cols() != b.cols() || a.rows() != b.rows()) {
    throw DomainError(std::string(what) + ": dimension mismatch (" + std::to_string(a.cols()) + "x" +
                      std::to_string(a.rows()) + " vs " + std::to_string(b.cols()) + "x" +
                      std::to_string(b.rows()) + ")");
  }
}

template <typename T>
double grid_sum(const Grid<T>& g) {
  double s = 0.0;
  for (const auto& v : g) s += static_cast<double>(v);
  return s;
}

template <typename T>
ImageD to_double(const Grid<T>& g) {
  ImageD out(g.cols(), g.rows());
  std::transform(g.begin(), g.end(), out.begin(), [](const T& v) { return static_cast<double>(v); });
  return out;
}

/// Round half away from zero.
inline long long round_half_away(double v) {
  return static_cast<long long>(v < 0.0 ? -std::floor(-v + 0.5) : std::floor(v + 0.5));
}

}  // namespace mcspi
