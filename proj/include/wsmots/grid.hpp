#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wsmots/error.hpp"

namespace wsmots {

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;

  Grid(int height, int width, T fill = T{}) : height_(height), width_(width) {
    check_dims(height, width);
    data_.assign(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill);
  }

  Grid(int height, int width, std::vector<T> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_dims(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
      throw ShapeError("grid data length " + std::to_string(data_.size()) + " != " +
                       std::to_string(height) + "x" + std::to_string(width));
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  const std::vector<T>& vector() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_dims(int height, int width) {
    if (height < 0 || width < 0) {
      throw InvalidArgument("negative grid dimensions");
    }
  }

  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

template <typename A, typename B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
  }
}

}  // namespace wsmots
