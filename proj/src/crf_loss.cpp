#include "wsmots/crf_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "wsmots/reduce.hpp"

namespace wsmots {

namespace {

constexpr int kFeatureDim = 5;

void check_rgb(std::span<const double> rgb) {
  for (double v : rgb) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw InvalidArgument("RGB value " + std::to_string(v) + " outside [0,1]");
    }
  }
}

void check_length(std::size_t got, std::size_t want) {
  if (got != want) {
    throw ShapeError("affinity input has " + std::to_string(got) + " entries, expected " +
                     std::to_string(want));
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  std::vector<double> terms(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) terms[i] = a[i] * b[i];
  return pairwise_sum(terms);
}

}  // namespace

RgbImage::RgbImage(int height, int width, double fill)
    : height_(height), width_(width) {
  if (height < 0 || width < 0) throw InvalidArgument("negative image dimensions");
  rgb_.assign(pixels() * 3, fill);
  check_rgb(rgb_);
}

RgbImage::RgbImage(int height, int width, std::vector<double> rgb)
    : height_(height), width_(width), rgb_(std::move(rgb)) {
  if (height < 0 || width < 0) throw InvalidArgument("negative image dimensions");
  if (rgb_.size() != pixels() * 3) {
    throw ShapeError("RGB buffer has " + std::to_string(rgb_.size()) + " values, expected " +
                     std::to_string(pixels() * 3));
  }
  check_rgb(rgb_);
}

RgbImage resize_bilinear(const RgbImage& in, int out_h, int out_w) {
  std::vector<double> out(static_cast<std::size_t>(out_h) * static_cast<std::size_t>(out_w) * 3);
  for (int ch = 0; ch < 3; ++ch) {
    Grid<double> plane(in.height(), in.width());
    for (int r = 0; r < in.height(); ++r) {
      for (int c = 0; c < in.width(); ++c) plane(r, c) = in.at(r, c, ch);
    }
    const Grid<double> resized = resize_bilinear(plane, out_h, out_w);
    for (std::size_t i = 0; i < resized.size(); ++i) {
      out[i * 3 + static_cast<std::size_t>(ch)] = std::clamp(resized[i], 0.0, 1.0);
    }
  }
  return RgbImage(out_h, out_w, std::move(out));
}

void AffinityParams::validate() const {
  if (!(sigma_xy > 0.0) || !(sigma_rgb > 0.0)) {
    throw InvalidArgument("affinity bandwidths must be positive");
  }
  if (lattice_passes < 2 || lattice_passes % 2 != 0) {
    throw InvalidArgument("lattice passes must be even and >= 2, got " +
                          std::to_string(lattice_passes));
  }
}

std::vector<double> rgbxy_features(const RgbImage& image, const AffinityParams& params) {
  params.validate();
  std::vector<double> f(image.pixels() * kFeatureDim);
  std::size_t p = 0;
  for (int r = 0; r < image.height(); ++r) {
    for (int c = 0; c < image.width(); ++c, ++p) {
      double* out = f.data() + p * kFeatureDim;
      out[0] = c / params.sigma_xy;
      out[1] = r / params.sigma_xy;
      for (int ch = 0; ch < 3; ++ch) out[2 + ch] = image.at(r, c, ch) / params.sigma_rgb;
    }
  }
  return f;
}

DenseAffinity::DenseAffinity(const RgbImage& image, const AffinityParams& params, Execution exec)
    : n_(image.pixels()),
      zero_diagonal_(params.zero_diagonal),
      exec_(exec),
      features_(rgbxy_features(image, params)) {}

std::vector<double> DenseAffinity::apply(std::span<const double> v) const {
  check_length(v.size(), n_);
  std::vector<double> out(n_, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(n_);
  const double* f = features_.data();
#pragma omp parallel for schedule(static) if (exec_ == Execution::Parallel)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const double* fp = f + p * kFeatureDim;
    double acc = 0.0;
    for (std::ptrdiff_t q = 0; q < n; ++q) {
      if (q == p && zero_diagonal_) continue;
      const double* fq = f + q * kFeatureDim;
      double d2 = 0.0;
      for (int k = 0; k < kFeatureDim; ++k) {
        const double t = fp[k] - fq[k];
        d2 += t * t;
      }
      acc += std::exp(-0.5 * d2) * v[static_cast<std::size_t>(q)];
    }
    out[static_cast<std::size_t>(p)] = acc;
  }
  return out;
}

LatticeAffinity::LatticeAffinity(const RgbImage& image, const AffinityParams& params,
                                 Execution exec)
    : LatticeAffinity(rgbxy_features(image, params), params.zero_diagonal, params.lattice_passes,
                      exec) {}

LatticeAffinity::LatticeAffinity(const std::vector<double>& features, bool zero_diagonal,
                                 int passes, Execution exec)
    : zero_diagonal_(zero_diagonal),
      lattice_(features, kFeatureDim, passes, exec),
      gain_(lattice_.gain()) {
  // Calibrate the gain against exact off-diagonal sums at evenly spaced pixels.
  const std::size_t n = lattice_.points();
  const std::size_t samples = std::min(n, kCalibrationSamples);
  if (samples == 0) return;
  const std::vector<double> ones(n, 1.0);
  const std::vector<double> response = lattice_.filter(ones);
  const auto& self = lattice_.self_response();
  std::vector<double> exact(samples, 0.0);
  std::vector<double> approx(samples, 0.0);
  const auto ns = static_cast<std::ptrdiff_t>(samples);
#pragma omp parallel for schedule(static) if (exec == Execution::Parallel)
  for (std::ptrdiff_t s = 0; s < ns; ++s) {
    const std::size_t p = static_cast<std::size_t>(s) * n / samples;
    const double* fp = features.data() + p * kFeatureDim;
    double acc = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      if (q == p) continue;
      const double* fq = features.data() + q * kFeatureDim;
      double d2 = 0.0;
      for (int k = 0; k < kFeatureDim; ++k) {
        const double t = fp[k] - fq[k];
        d2 += t * t;
      }
      acc += std::exp(-0.5 * d2);
    }
    exact[static_cast<std::size_t>(s)] = acc;
    approx[static_cast<std::size_t>(s)] = response[p] - self[p];
  }
  const double e = pairwise_sum(std::span<const double>(exact));
  const double a = pairwise_sum(std::span<const double>(approx));
  if (e > 1e-12 * static_cast<double>(samples) && a > 0.0) gain_ = a / e;
}

std::vector<double> LatticeAffinity::apply(std::span<const double> v) const {
  check_length(v.size(), lattice_.points());
  std::vector<double> out = lattice_.filter(v);
  const auto& self = lattice_.self_response();
  const double inv_gain = 1.0 / gain_;
  const double diag = zero_diagonal_ ? 0.0 : 1.0;
  for (std::size_t p = 0; p < out.size(); ++p) {
    out[p] = (out[p] - self[p] * v[p]) * inv_gain + diag * v[p];
  }
  return out;
}

std::unique_ptr<AffinityOperator> make_affinity(const RgbImage& image, const AffinityParams& params,
                                                AffinityPath path, Execution exec) {
  if (path == AffinityPath::Dense) return std::make_unique<DenseAffinity>(image, params, exec);
  return std::make_unique<LatticeAffinity>(image, params, exec);
}

std::vector<double> affinity_apply_dense(std::span<const double> v, const RgbImage& image,
                                         const AffinityParams& params, Execution exec) {
  check_length(v.size(), image.pixels());
  return DenseAffinity(image, params, exec).apply(v);
}

std::vector<double> affinity_apply_fast(std::span<const double> v, const RgbImage& image,
                                        const AffinityParams& params, Execution exec) {
  check_length(v.size(), image.pixels());
  return LatticeAffinity(image, params, exec).apply(v);
}

void CrfInput::validate() const {
  if (masks.empty()) throw ShapeError("CRF input needs at least one class map");
  for (const auto& m : masks) {
    if (m.height() != image.height() || m.width() != image.width()) {
      throw ShapeError("class map " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
                       " does not match image " + std::to_string(image.height()) + "x" +
                       std::to_string(image.width()));
    }
  }
}

CrfResult crf_loss(std::span<const ProbMask> masks, const AffinityOperator& affinity) {
  const std::size_t n = affinity.size();
  const std::vector<double> ones(n, 1.0);
  const std::vector<double> w_ones = affinity.apply(ones);
  CrfResult out;
  std::vector<double> per_class;
  for (const auto& s : masks) {
    check_length(s.size(), n);
    const std::vector<double> ws = affinity.apply(s.values());
    std::vector<double> w_comp(n);
    Grid<double> grad(s.height(), s.width());
    for (std::size_t i = 0; i < n; ++i) {
      w_comp[i] = w_ones[i] - ws[i];
      grad[i] = w_ones[i] - 2.0 * ws[i];
    }
    per_class.push_back(dot(s.values(), w_comp));
    out.grads.push_back(std::move(grad));
  }
  out.loss = pairwise_sum(per_class);
  return out;
}

CrfResult crf_loss(const CrfInput& input, const AffinityParams& params, AffinityPath path,
                   Execution exec) {
  input.validate();
  const auto op = make_affinity(input.image, params, path, exec);
  return crf_loss(input.masks, *op);
}

double batch_crf_loss(std::span<const CrfInput> items, const AffinityParams& params,
                      AffinityPath path) {
  std::vector<double> losses;
  losses.reserve(items.size());
  for (const auto& item : items) losses.push_back(crf_loss(item, params, path).loss);
  return pairwise_mean(losses);
}

RoiCrfResult crf_loss_roi(const ProbMask& foreground, const RgbImage& patch,
                          const AffinityParams& params, AffinityPath path, Execution exec) {
  const ProbMask fg = resize_bilinear(foreground, patch.height(), patch.width());
  std::vector<double> bg_values(fg.size());
  for (std::size_t i = 0; i < fg.size(); ++i) bg_values[i] = 1.0 - fg[i];
  const ProbMask bg(fg.height(), fg.width(), std::move(bg_values));
  const std::vector<ProbMask> masks{fg, bg};
  const auto op = make_affinity(patch, params, path, exec);
  CrfResult full = crf_loss(masks, *op);
  // d/d fg of (L(fg) + L(1 - fg)).
  Grid<double> g(fg.height(), fg.width());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = full.grads[0][i] - full.grads[1][i];
  return {full.loss, resize_bilinear_adjoint(g, foreground.height(), foreground.width())};
}

}  // namespace wsmots
