#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "wsmots/grid.hpp"

namespace wsmots {

/// Side of the per-ROI mask grid.
inline constexpr int kRoiGridSize = 28;
/// Side of the RGB patch the CRF loss operates on.
inline constexpr int kCrfGridSize = 128;

/// Row-major grid of {0,1} values.
class BinaryMask : public Grid<std::uint8_t> {
 public:
  BinaryMask() = default;
  BinaryMask(int height, int width, std::uint8_t fill = 0);
  BinaryMask(int height, int width, std::vector<std::uint8_t> data);

  std::size_t area() const noexcept;
};

/// Row-major grid of probabilities in [0,1].
class ProbMask : public Grid<double> {
 public:
  ProbMask() = default;
  ProbMask(int height, int width, double fill = 0.0);
  ProbMask(int height, int width, std::vector<double> data);
  explicit ProbMask(Grid<double> grid);
};

/// Half-open pixel box [x0,x1) x [y0,y1).
struct BBox {
  double x0 = 0, y0 = 0, x1 = 1, y1 = 1;

  BBox() = default;
  BBox(double x0_, double y0_, double x1_, double y1_);

  double width() const noexcept { return x1 - x0; }
  double height() const noexcept { return y1 - y0; }
  double area() const noexcept { return width() * height(); }
  bool contains(double x, double y) const noexcept {
    return x >= x0 && x < x1 && y >= y0 && y < y1;
  }

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point2 {
  double x;
  double y;
};

/// |a ∩ b| / |a ∪ b|; 0 for an empty union.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

double bbox_iou(const BBox& a, const BBox& b);

/// Tight box around the set pixels, or nothing for an empty mask.
std::optional<BBox> mask_bbox(const BinaryMask& m);

/// Frame position of the centre of cell (row, col) when `box` is divided
/// into a rows x cols grid.
Point2 roi_cell_center(const BBox& box, int rows, int cols, int row, int col) noexcept;

/// Corner-aligned bilinear resampling.
Grid<double> resize_bilinear(const Grid<double>& in, int out_h, int out_w);
ProbMask resize_bilinear(const ProbMask& in, int out_h, int out_w);

/// Transpose of resize_bilinear: maps a gradient on the output grid back
/// onto an in_h x in_w grid.
Grid<double> resize_bilinear_adjoint(const Grid<double>& grad_out, int in_h, int in_w);

/// Nearest-neighbour sampling of `box` onto an out_h x out_w grid. Cells
/// whose sample falls outside the frame read as 0.
BinaryMask crop_and_rasterize(const BinaryMask& frame_mask, const BBox& box,
                              int out_h = kRoiGridSize, int out_w = kRoiGridSize);

}  // namespace wsmots
