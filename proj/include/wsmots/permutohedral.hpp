#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "wsmots/execution.hpp"

namespace wsmots {

/// Gaussian filtering on a refined permutohedral lattice (splat, blur, slice).
///
/// Features are expected pre-scaled so that the target kernel is
/// exp(-|f_p - f_q|^2 / 2). They are magnified by sqrt(0.75 m + 0.25) before
/// embedding, where m is the number of blur passes: each pass of the
/// [1/2 1 1/2] blur along the d+1 lattice directions contributes variance
/// 3/4 per axis and splat plus slice contribute 1/4, so the composite
/// kernel keeps unit variance while approaching a Gaussian as m grows.
///
/// The number of passes must be even. The blur steps commute, so B = C^T C
/// where C is the first half of them.
/// C runs on the closure of the splatted vertices under its steps and C^T by
/// the transposed steps, making the blur an exact lattice convolution.
/// `filter` computes S^T B S v, which is symmetric. Divide by `gain()` to
/// approximate the Gaussian sum.
class PermutohedralLattice {
 public:
  static constexpr int kDefaultPasses = 2;

  PermutohedralLattice(std::span<const double> features, int dim, int passes = kDefaultPasses,
                       Execution exec = Execution::Parallel);

  int dim() const noexcept { return dim_; }
  int passes() const noexcept { return passes_; }
  std::size_t points() const noexcept { return points_; }
  /// Vertices touched by the splat.
  std::size_t occupied_vertices() const noexcept { return occupied_; }
  /// All vertices, including those the blur passes through.
  std::size_t vertices() const noexcept { return vertices_; }

  std::vector<double> filter(std::span<const double> values) const;

  /// Diagonal of the filter operator: the response of each point to its own splat.
  const std::vector<double>& self_response() const noexcept { return self_; }

  /// Ratio between the filter response and the exact Gaussian sum for a
  /// uniformly dense point cloud.
  double gain() const noexcept { return gain_; }

  /// Blur kernel weight between two vertices of one simplex that differ in
  /// `j` lattice directions.
  static double simplex_kernel(int dim, int passes, int j);

 private:
  int dim_;
  int passes_;
  Execution exec_;
  std::size_t points_ = 0;
  std::size_t occupied_ = 0;
  std::size_t vertices_ = 0;
  double gain_ = 1.0;
  // (dim+1) enclosing-simplex vertices and barycentric weights per point.
  std::vector<std::int32_t> offsets_;
  std::vector<double> weights_;
  // Splat in gather form: contributions to each vertex in point order.
  std::vector<std::size_t> splat_start_;
  std::vector<std::uint32_t> splat_entry_;
  // Vertices are numbered by the closure step that creates them; prefix_[s]
  // counts those present after s steps (prefix_[0] = occupied).
  std::vector<std::size_t> prefix_;
  // Neighbours v + u_j and v - u_j per direction j, -1 when absent.
  std::vector<std::size_t> link_start_;
  std::vector<std::int32_t> plus_;
  std::vector<std::int32_t> minus_;
  std::vector<double> self_;

  void blur(std::vector<double>& values) const;
};

}  // namespace wsmots
