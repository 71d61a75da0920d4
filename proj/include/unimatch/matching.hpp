#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "unimatch/field.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

/// Flow correlation C[i*W + j, k*W + l] = <F1[i, j], F2[k, l]> / sqrt(D).
struct CorrelationVolume {
  std::size_t height = 0, width = 0;
  Tensor values;  // [HW x HW]
};

struct CameraSetup {
  std::array<double, 9> k1{}, k2{};   // row-major intrinsics
  std::array<double, 16> e1{}, e2{};  // row-major world-to-camera
  double d_min = 0.5, d_max = 10.0;
  int num_candidates = 64;

  /// Throws ConfigError unless 0 < d_min < d_max, N >= 2 and both extrinsics
  /// are rigid (R^T R = I within 1e-9, det R = 1).
  void validate() const;
  /// Intrinsics with focal lengths and principal points multiplied by `factor`.
  CameraSetup scaled(double factor) const;

  /// Rectified pair: identity rotations, camera 2 displaced by `baseline`
  /// along +x, square pixels with focal `focal`.
  static CameraSetup rectified(double focal, double cx, double cy, double baseline, double d_min,
                               double d_max, int num_candidates);
};

CorrelationVolume flow_correlation(const Tensor& f1, const Tensor& f2);
/// Softmax over all target positions, expected coordinate minus grid.
DenseField flow_from_correlation(const CorrelationVolume& c);
/// Flow of image 2 relative to image 1 obtained from the transposed volume.
DenseField backward_flow(const CorrelationVolume& c);

/// Matching distribution of a flow volume, [HW x HW]; exposed for checks.
Tensor flow_distribution(const CorrelationVolume& c);

/// Row-wise matching with candidates x' <= x; disparity = x - E[x'].
DenseField disparity_match(const Tensor& f1, const Tensor& f2);
/// Stereo matching distribution [HW x W] (masked entries are exactly 0).
Tensor disparity_distribution(const Tensor& f1, const Tensor& f2);

/// N depths whose inverses are evenly spaced, ascending from d_min to d_max.
std::vector<double> depth_candidates(double d_min, double d_max, int n);

struct WarpGrid {
  Tensor coords;                     // [H x W x 2]
  std::vector<std::uint8_t> valid;   // 0 where the point is behind camera 2
};

/// Projects every pixel of camera 1 at depth `depth` into camera 2. Invalid
/// entries carry coordinates outside the grid so sampling yields zeros.
WarpGrid plane_sweep_warp(const CameraSetup& cam, double depth, std::size_t height,
                          std::size_t width);

/// Plane-sweep matching; `cam` intrinsics must be at the feature resolution.
DenseField depth_match(const Tensor& f1, const Tensor& f2, const CameraSetup& cam);
/// Depth matching distribution [HW x N].
Tensor depth_distribution(const Tensor& f1, const Tensor& f2, const CameraSetup& cam);

/// Pixel grid [H x W x 2], (x, y) with origin at the top-left pixel centre.
Tensor coordinate_grid(std::size_t height, std::size_t width);

}  // namespace unimatch
