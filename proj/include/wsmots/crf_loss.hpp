#pragma once

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "wsmots/execution.hpp"
#include "wsmots/mask.hpp"
#include "wsmots/permutohedral.hpp"

namespace wsmots {

/// Interleaved RGB image with channels in [0,1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int height, int width, double fill = 0.0);
  /// `rgb` holds height*width*3 values, pixel-major.
  RgbImage(int height, int width, std::vector<double> rgb);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t pixels() const noexcept {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  double& at(int row, int col, int channel) {
    return rgb_[(static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) * 3 +
                static_cast<std::size_t>(channel)];
  }
  double at(int row, int col, int channel) const {
    return rgb_[(static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(col)) * 3 +
                static_cast<std::size_t>(channel)];
  }
  std::span<const double> values() const noexcept { return rgb_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> rgb_;
};

/// Per-channel bilinear resampling, corner aligned.
RgbImage resize_bilinear(const RgbImage& in, int out_h, int out_w);

/// Bandwidths of the RGBXY Gaussian kernel
///   w(p,q) = exp(-|xy_p - xy_q|^2 / (2 sigma_xy^2) - |rgb_p - rgb_q|^2 / (2 sigma_rgb^2)).
struct AffinityParams {
  double sigma_xy = 10.0;
  double sigma_rgb = 0.1;
  bool zero_diagonal = true;
  /// Blur passes of the fast path; even, >= 2. More passes are closer to a
  /// Gaussian and slower.
  int lattice_passes = 2;

  void validate() const;
};

/// Per-pixel (x, y, r, g, b) features divided by their bandwidths.
std::vector<double> rgbxy_features(const RgbImage& image, const AffinityParams& params);

/// Linear map v -> W v over the pixels of one image.
class AffinityOperator {
 public:
  virtual ~AffinityOperator() = default;
  virtual std::size_t size() const noexcept = 0;
  virtual std::vector<double> apply(std::span<const double> v) const = 0;
};

/// Exact O(N^2) evaluation.
class DenseAffinity final : public AffinityOperator {
 public:
  DenseAffinity(const RgbImage& image, const AffinityParams& params,
                Execution exec = Execution::Parallel);
  std::size_t size() const noexcept override { return n_; }
  std::vector<double> apply(std::span<const double> v) const override;

 private:
  std::size_t n_;
  bool zero_diagonal_;
  Execution exec_;
  std::vector<double> features_;
};

/// Permutohedral-lattice approximation. The diagonal is exact: the lattice's
/// own self response is removed and replaced by 0 (zero_diagonal) or 1.
/// The lattice gain is calibrated against exact row sums at
/// kCalibrationSamples evenly spaced pixels, so the operator depends on the
/// image only and stays linear and symmetric in v.
class LatticeAffinity final : public AffinityOperator {
 public:
  static constexpr std::size_t kCalibrationSamples = 64;

  LatticeAffinity(const RgbImage& image, const AffinityParams& params,
                  Execution exec = Execution::Parallel);
  std::size_t size() const noexcept override { return lattice_.points(); }
  std::vector<double> apply(std::span<const double> v) const override;
  const PermutohedralLattice& lattice() const noexcept { return lattice_; }
  double gain() const noexcept { return gain_; }

 private:
  LatticeAffinity(const std::vector<double>& features, bool zero_diagonal, int passes,
                  Execution exec);

  bool zero_diagonal_;
  PermutohedralLattice lattice_;
  double gain_;
};

enum class AffinityPath { Dense, Fast };

std::unique_ptr<AffinityOperator> make_affinity(const RgbImage& image, const AffinityParams& params,
                                                AffinityPath path,
                                                Execution exec = Execution::Parallel);

/// One-shot helpers.
std::vector<double> affinity_apply_dense(std::span<const double> v, const RgbImage& image,
                                         const AffinityParams& params,
                                         Execution exec = Execution::Parallel);
std::vector<double> affinity_apply_fast(std::span<const double> v, const RgbImage& image,
                                        const AffinityParams& params,
                                        Execution exec = Execution::Parallel);

/// Image patch plus one score map per class, all of the same size.
struct CrfInput {
  RgbImage image;
  std::vector<ProbMask> masks;

  void validate() const;
};

struct CrfResult {
  double loss = 0.0;
  std::vector<Grid<double>> grads;  ///< d loss / d S^k, one per class
};

/// sum_k <S^k, W (1 - S^k)> and its gradient W 1 - 2 W S^k.
CrfResult crf_loss(std::span<const ProbMask> masks, const AffinityOperator& affinity);
CrfResult crf_loss(const CrfInput& input, const AffinityParams& params,
                   AffinityPath path = AffinityPath::Fast, Execution exec = Execution::Parallel);

/// Mean of crf_loss over proposals; 0 for an empty batch.
double batch_crf_loss(std::span<const CrfInput> items, const AffinityParams& params,
                      AffinityPath path = AffinityPath::Fast);

struct RoiCrfResult {
  double loss = 0.0;
  Grid<double> grad;  ///< w.r.t. the ROI-grid foreground probabilities
};

/// CRF loss of a ROI-grid foreground prediction: upsampled onto the patch,
/// paired with its background complement, gradient pulled back through
/// the resize.
RoiCrfResult crf_loss_roi(const ProbMask& foreground, const RgbImage& patch,
                          const AffinityParams& params, AffinityPath path = AffinityPath::Fast,
                          Execution exec = Execution::Parallel);

}  // namespace wsmots
