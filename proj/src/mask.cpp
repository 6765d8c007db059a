#include "wsmots/mask.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace wsmots {

namespace {

void check_binary(const Grid<std::uint8_t>& g) {
  for (auto v : g.values()) {
    if (v > 1) throw InvalidArgument("binary mask value " + std::to_string(v) + " not in {0,1}");
  }
}

void check_prob(const Grid<double>& g) {
  for (double v : g.values()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("probability " + std::to_string(v) + " outside [0,1]");
    }
  }
}

// Source index pair and blend weight for one output coordinate.
struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in_n, int out_n) {
  std::vector<Tap> taps(static_cast<std::size_t>(out_n));
  for (int i = 0; i < out_n; ++i) {
    double src = out_n > 1 ? static_cast<double>(i) * (in_n - 1) / (out_n - 1)
                           : 0.5 * (in_n - 1);
    int lo = static_cast<int>(std::floor(src));
    lo = std::clamp(lo, 0, in_n - 1);
    int hi = std::min(lo + 1, in_n - 1);
    taps[static_cast<std::size_t>(i)] = {lo, hi, src - lo};
  }
  return taps;
}

}  // namespace

BinaryMask::BinaryMask(int height, int width, std::uint8_t fill)
    : Grid<std::uint8_t>(height, width, fill) {
  check_binary(*this);
}

BinaryMask::BinaryMask(int height, int width, std::vector<std::uint8_t> data)
    : Grid<std::uint8_t>(height, width, std::move(data)) {
  check_binary(*this);
}

std::size_t BinaryMask::area() const noexcept {
  return static_cast<std::size_t>(std::count(values().begin(), values().end(), std::uint8_t{1}));
}

ProbMask::ProbMask(int height, int width, double fill) : Grid<double>(height, width, fill) {
  check_prob(*this);
}

ProbMask::ProbMask(int height, int width, std::vector<double> data)
    : Grid<double>(height, width, std::move(data)) {
  check_prob(*this);
}

ProbMask::ProbMask(Grid<double> grid) : Grid<double>(std::move(grid)) { check_prob(*this); }

BBox::BBox(double x0_, double y0_, double x1_, double y1_) : x0(x0_), y0(y0_), x1(x1_), y1(y1_) {
  if (!(x1 > x0) || !(y1 > y0)) {
    throw InvalidArgument("degenerate box [" + std::to_string(x0) + "," + std::to_string(y0) +
                          "," + std::to_string(x1) + "," + std::to_string(y1) + "]");
  }
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "mask_iou");
  std::size_t inter = 0;
  std::size_t uni = 0;
  const auto av = a.values();
  const auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    inter += static_cast<std::size_t>(av[i] & bv[i]);
    uni += static_cast<std::size_t>(av[i] | bv[i]);
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double bbox_iou(const BBox& a, const BBox& b) {
  double iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  double ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

std::optional<BBox> mask_bbox(const BinaryMask& m) {
  int r0 = m.height(), r1 = -1, c0 = m.width(), c1 = -1;
  for (int r = 0; r < m.height(); ++r) {
    for (int c = 0; c < m.width(); ++c) {
      if (m(r, c)) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
    }
  }
  if (r1 < 0) return std::nullopt;
  return BBox(c0, r0, c1 + 1, r1 + 1);
}

Point2 roi_cell_center(const BBox& box, int rows, int cols, int row, int col) noexcept {
  return {box.x0 + (col + 0.5) * box.width() / cols, box.y0 + (row + 0.5) * box.height() / rows};
}

Grid<double> resize_bilinear(const Grid<double>& in, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("resize target must be positive");
  if (in.empty()) throw InvalidArgument("resize of an empty grid");
  if (out_h == in.height() && out_w == in.width()) return in;
  const auto ty = bilinear_taps(in.height(), out_h);
  const auto tx = bilinear_taps(in.width(), out_w);
  Grid<double> out(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    const Tap& y = ty[static_cast<std::size_t>(i)];
    for (int j = 0; j < out_w; ++j) {
      const Tap& x = tx[static_cast<std::size_t>(j)];
      double top = in(y.lo, x.lo) + x.frac * (in(y.lo, x.hi) - in(y.lo, x.lo));
      double bot = in(y.hi, x.lo) + x.frac * (in(y.hi, x.hi) - in(y.hi, x.lo));
      out(i, j) = top + y.frac * (bot - top);
    }
  }
  return out;
}

ProbMask resize_bilinear(const ProbMask& in, int out_h, int out_w) {
  Grid<double> g = resize_bilinear(static_cast<const Grid<double>&>(in), out_h, out_w);
  // Convex combinations can drift past the bounds by an ulp.
  for (double& v : g.values()) v = std::clamp(v, 0.0, 1.0);
  return ProbMask(std::move(g));
}

Grid<double> resize_bilinear_adjoint(const Grid<double>& grad_out, int in_h, int in_w) {
  if (in_h <= 0 || in_w <= 0) throw InvalidArgument("resize source must be positive");
  if (grad_out.height() == in_h && grad_out.width() == in_w) return grad_out;
  const auto ty = bilinear_taps(in_h, grad_out.height());
  const auto tx = bilinear_taps(in_w, grad_out.width());
  Grid<double> g(in_h, in_w, 0.0);
  for (int i = 0; i < grad_out.height(); ++i) {
    const Tap& y = ty[static_cast<std::size_t>(i)];
    for (int j = 0; j < grad_out.width(); ++j) {
      const Tap& x = tx[static_cast<std::size_t>(j)];
      const double v = grad_out(i, j);
      g(y.lo, x.lo) += v * (1 - y.frac) * (1 - x.frac);
      g(y.lo, x.hi) += v * (1 - y.frac) * x.frac;
      g(y.hi, x.lo) += v * y.frac * (1 - x.frac);
      g(y.hi, x.hi) += v * y.frac * x.frac;
    }
  }
  return g;
}

BinaryMask crop_and_rasterize(const BinaryMask& frame_mask, const BBox& box, int out_h,
                              int out_w) {
  if (out_h <= 0 || out_w <= 0) throw InvalidArgument("ROI grid must be positive");
  if (box.x1 <= 0 || box.y1 <= 0 || box.x0 >= frame_mask.width() ||
      box.y0 >= frame_mask.height()) {
    throw InvalidArgument("box lies outside the frame");
  }
  BinaryMask out(out_h, out_w);
  for (int i = 0; i < out_h; ++i) {
    for (int j = 0; j < out_w; ++j) {
      const Point2 p = roi_cell_center(box, out_h, out_w, i, j);
      const int r = static_cast<int>(std::floor(p.y));
      const int c = static_cast<int>(std::floor(p.x));
      if (r >= 0 && r < frame_mask.height() && c >= 0 && c < frame_mask.width()) {
        out(i, j) = frame_mask(r, c);
      }
    }
  }
  return out;
}

}  // namespace wsmots
