#include "unimatch/matching.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"

namespace unimatch {
namespace {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

Mat3 to_mat3(const std::array<double, 9>& a) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = a[r * 3 + c];
  return m;
}

Mat4 to_mat4(const std::array<double, 16>& a) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = a[r * 4 + c];
  return m;
}

void check_rigid(const std::array<double, 16>& e, const char* name) {
  const Mat4 m = to_mat4(e);
  const Mat3 r = m.topLeftCorner<3, 3>();
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  const double det = r.determinant();
  const bool bottom = m(3, 0) == 0 && m(3, 1) == 0 && m(3, 2) == 0 && m(3, 3) == 1;
  if (!(ortho <= 1e-9) || !(std::abs(det - 1) <= 1e-9) || !bottom) {
    throw ConfigError(std::string("camera extrinsic ") + name + " is not a rigid transform");
  }
}

void check_pair(const Tensor& f1, const Tensor& f2, const char* op) {
  if (f1.rank() != 3 || f1.shape() != f2.shape()) {
    throw ContractError(std::string(op) + ": feature extents differ " + shape_str(f1.shape()) +
                        " vs " + shape_str(f2.shape()));
  }
}

Real inv_sqrt_dim(const Tensor& f) { return Real(1) / std::sqrt(static_cast<Real>(f.dim(2))); }

}  // namespace

void CameraSetup::validate() const {
  if (!(d_min > 0) || !(d_min < d_max)) throw ConfigError("depth range needs 0 < d_min < d_max");
  if (num_candidates < 2) throw ConfigError("depth matching needs at least 2 candidates");
  check_rigid(e1, "E1");
  check_rigid(e2, "E2");
  for (const auto* k : {&k1, &k2}) {
    if (std::abs(to_mat3(*k).determinant()) < 1e-12) throw ConfigError("singular intrinsics");
  }
}

CameraSetup CameraSetup::scaled(double factor) const {
  CameraSetup c = *this;
  for (auto* k : {&c.k1, &c.k2}) {
    for (int i : {0, 1, 2, 3, 4, 5}) (*k)[i] *= factor;
  }
  return c;
}

CameraSetup CameraSetup::rectified(double focal, double cx, double cy, double baseline,
                                   double d_min, double d_max, int num_candidates) {
  CameraSetup c;
  c.k1 = {focal, 0, cx, 0, focal, cy, 0, 0, 1};
  c.k2 = c.k1;
  c.e1 = {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  c.e2 = c.e1;
  c.e2[3] = -baseline;
  c.d_min = d_min;
  c.d_max = d_max;
  c.num_candidates = num_candidates;
  return c;
}

Tensor coordinate_grid(std::size_t height, std::size_t width) {
  Tensor g(Shape{height, width, 2});
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      g.data_mut()[(y * width + x) * 2] = static_cast<Real>(x);
      g.data_mut()[(y * width + x) * 2 + 1] = static_cast<Real>(y);
    }
  return g;
}

CorrelationVolume flow_correlation(const Tensor& f1, const Tensor& f2) {
  check_pair(f1, f2, "flow_correlation");
  const std::size_t h = f1.dim(0), w = f1.dim(1), d = f1.dim(2);
  Tensor a = reshape(f1, Shape{h * w, d});
  Tensor b = reshape(f2, Shape{h * w, d});
  return {h, w, scale(pairwise_dot(a, b), inv_sqrt_dim(f1))};
}

Tensor flow_distribution(const CorrelationVolume& c) {
  const std::size_t n = c.height * c.width;
  if (c.values.rank() != 2 || c.values.dim(0) != n || c.values.dim(1) != n) {
    throw ContractError("flow correlation volume must be [HW x HW]");
  }
  return softmax_last(c.values, 1.0);
}

DenseField flow_from_correlation(const CorrelationVolume& c) {
  const std::size_t h = c.height, w = c.width;
  Tensor m = flow_distribution(c);
  Tensor grid = coordinate_grid(h, w).reshaped(Shape{h * w, 2});
  Tensor matched = matmul(m, grid);
  return {FieldKind::kFlow, reshape(sub(matched, grid), Shape{h, w, 2}), 1};
}

DenseField backward_flow(const CorrelationVolume& c) {
  return flow_from_correlation({c.height, c.width, transpose(c.values)});
}

Tensor disparity_distribution(const Tensor& f1, const Tensor& f2) {
  check_pair(f1, f2, "disparity_match");
  const std::size_t h = f1.dim(0), w = f1.dim(1), d = f1.dim(2);
  Tensor a = reshape(f1, Shape{h * w, d});
  Tensor b = reshape(f2, Shape{h * w, d});
  std::vector<Tensor> rows;
  rows.reserve(h);
  std::vector<std::int64_t> idx(w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) idx[x] = static_cast<std::int64_t>(y * w + x);
    rows.push_back(pairwise_dot(gather_rows(a, idx), gather_rows(b, idx)));
  }
  Tensor corr = concat_rows(rows);
  std::vector<std::uint8_t> keep(h * w * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t xp = 0; xp < w; ++xp) keep[(y * w + x) * w + xp] = xp <= x;
  return softmax_last(corr, inv_sqrt_dim(f1), keep);
}

DenseField disparity_match(const Tensor& f1, const Tensor& f2) {
  const std::size_t h = f1.dim(0), w = f1.dim(1);
  Tensor m = disparity_distribution(f1, f2);
  // disparity = sum_x' M[x'] (x - x'), each term non-negative under the mask.
  Tensor offsets(Shape{h * w, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t xp = 0; xp <= x; ++xp)
        offsets.data_mut()[(y * w + x) * w + xp] = static_cast<Real>(x - xp);
  return {FieldKind::kDisparity, reshape(rowwise_dot(m, offsets), Shape{h, w, 1}), 1};
}

std::vector<double> depth_candidates(double d_min, double d_max, int n) {
  if (n < 2) throw ConfigError("depth_candidates: need N >= 2");
  if (!(d_min > 0) || !(d_min < d_max)) throw ConfigError("depth_candidates: invalid range");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double inv_near = 1.0 / d_min, inv_far = 1.0 / d_max;
  for (int i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n - 1);
    out[i] = 1.0 / (inv_near + (inv_far - inv_near) * t);
  }
  out.front() = d_min;
  out.back() = d_max;
  return out;
}

WarpGrid plane_sweep_warp(const CameraSetup& cam, double depth, std::size_t height,
                          std::size_t width) {
  const Mat3 k1_inv = to_mat3(cam.k1).inverse();
  const Mat3 k2 = to_mat3(cam.k2);
  const Mat4 e1 = to_mat4(cam.e1), e2 = to_mat4(cam.e2);
  Mat4 e1_inv = Mat4::Identity();
  e1_inv.topLeftCorner<3, 3>() = e1.topLeftCorner<3, 3>().transpose();
  e1_inv.topRightCorner<3, 1>() = -e1.topLeftCorner<3, 3>().transpose() * e1.topRightCorner<3, 1>();
  const Mat4 rel = e2 * e1_inv;
  const Mat3 rot = rel.topLeftCorner<3, 3>();
  const Eigen::Vector3d trans = rel.topRightCorner<3, 1>();

  WarpGrid out{Tensor(Shape{height, width, 2}), std::vector<std::uint8_t>(height * width, 1)};
  Real* c = out.coords.data_mut();
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const Eigen::Vector3d p1 = depth * (k1_inv * Eigen::Vector3d(double(x), double(y), 1.0));
      const Eigen::Vector3d p2 = k2 * (rot * p1 + trans);
      const std::size_t i = y * width + x;
      if (!(p2.z() > 0)) {
        out.valid[i] = 0;
        c[2 * i] = -2;
        c[2 * i + 1] = -2;
        continue;
      }
      c[2 * i] = p2.x() / p2.z();
      c[2 * i + 1] = p2.y() / p2.z();
    }
  return out;
}

Tensor depth_distribution(const Tensor& f1, const Tensor& f2, const CameraSetup& cam) {
  check_pair(f1, f2, "depth_match");
  cam.validate();
  const std::size_t h = f1.dim(0), w = f1.dim(1), d = f1.dim(2);
  const auto depths = depth_candidates(cam.d_min, cam.d_max, cam.num_candidates);
  Tensor a = reshape(f1, Shape{h * w, d});
  std::vector<Tensor> corr;
  corr.reserve(depths.size());
  for (double di : depths) {
    const WarpGrid grid = plane_sweep_warp(cam, di, h, w);
    Tensor sampled = reshape(bilinear_sample(f2, grid.coords), Shape{h * w, d});
    corr.push_back(rowwise_dot(a, sampled));
  }
  return softmax_last(concat_last(corr), inv_sqrt_dim(f1));
}

DenseField depth_match(const Tensor& f1, const Tensor& f2, const CameraSetup& cam) {
  const std::size_t h = f1.dim(0), w = f1.dim(1);
  Tensor m = depth_distribution(f1, f2, cam);
  const auto depths = depth_candidates(cam.d_min, cam.d_max, cam.num_candidates);
  Tensor offsets(Shape{depths.size(), 1});
  for (std::size_t i = 0; i < depths.size(); ++i) offsets.data_mut()[i] = depths[i] - cam.d_min;
  // d_min + sum_i M_i (d_i - d_min); the clamp only absorbs rounding of sum M.
  Tensor depth = clamp(add_scalar(matmul(m, offsets), cam.d_min), cam.d_min, cam.d_max);
  return {FieldKind::kDepth, reshape(depth, Shape{h, w, 1}), 1};
}

}  // namespace unimatch
