#include "unimatch/refinement.hpp"

#include <cmath>
#include <string>

#include "unimatch/errors.hpp"
#include "unimatch/matching.hpp"
#include "unimatch/numerics/ops.hpp"
#include "unimatch/propagation.hpp"

namespace unimatch {

void RefineConfig::validate() const {
  if (window < 1 || window % 2 == 0) throw ConfigError("refinement window must be odd and positive");
  if (splits < 1) throw ConfigError("refinement splits must be positive");
}

Tensor warp_feature(const Tensor& f2, const DenseField& v) {
  check_field(v, "warp_feature");
  if (v.kind == FieldKind::kDepth) throw ConfigError("warp_feature: depth fields cannot be warped");
  if (f2.rank() != 3 || f2.dim(0) != v.height() || f2.dim(1) != v.width()) {
    throw ContractError("warp_feature: feature " + shape_str(f2.shape()) + " vs field " +
                        shape_str(v.values.shape()));
  }
  const Tensor grid = coordinate_grid(v.height(), v.width());
  return bilinear_sample(f2, add(grid, as_two_channels(v)));
}

RefineResult refine_once(const Tensor& f1_4, const Tensor& f2_4, const DenseField& coarse,
                         const RefineConfig& cfg, const AttentionConfig& attention,
                         const TransformerWeights& weights) {
  cfg.validate();
  check_field(coarse, "refine_once");
  if (coarse.kind == FieldKind::kDepth) {
    throw ConfigError("hierarchical refinement is only defined for flow and stereo");
  }
  DenseField up = bilinear_upsample(detached(coarse), 2);
  up.stride = 4;
  if (f1_4.shape() != f2_4.shape() || f1_4.rank() != 3 || f1_4.dim(0) != up.height() ||
      f1_4.dim(1) != up.width()) {
    throw ContractError("refine_once: 1/4 features " + shape_str(f1_4.shape()) +
                        " do not match upsampled field " + shape_str(up.values.shape()));
  }
  const bool stereo = coarse.kind == FieldKind::kDisparity;
  AttentionConfig local = attention;
  local.splits = cfg.splits;
  local.mode = stereo ? AttentionMode::kHorizontal1D : AttentionMode::kPlanar2D;
  auto [g1, g2] = enhance(f1_4, warp_feature(f2_4, up), local, weights);

  const long h = static_cast<long>(up.height()), w = static_cast<long>(up.width());
  const std::size_t d = f1_4.dim(2), n = static_cast<std::size_t>(h * w);
  const int radius = cfg.window / 2;
  const int ry = stereo ? 0 : radius;
  Tensor a = reshape(g1, Shape{n, d});
  Tensor b = reshape(g2, Shape{n, d});
  std::vector<Tensor> corr;
  std::vector<std::pair<int, int>> offsets;
  for (int dy = -ry; dy <= ry; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      std::vector<std::int64_t> idx(n);
      for (long y = 0; y < h; ++y)
        for (long x = 0; x < w; ++x) {
          const long yy = y + dy, xx = x + dx;
          idx[y * w + x] = (yy >= 0 && yy < h && xx >= 0 && xx < w) ? yy * w + xx : -1;
        }
      corr.push_back(rowwise_dot(a, gather_rows(b, idx)));
      offsets.emplace_back(dx, dy);
    }
  const std::size_t m = offsets.size();
  std::vector<std::uint8_t> keep(n * m);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (std::size_t k = 0; k < m; ++k) {
        const long yy = y + offsets[k].second, xx = x + offsets[k].first;
        keep[static_cast<std::size_t>(y * w + x) * m + k] = yy >= 0 && yy < h && xx >= 0 && xx < w;
      }
  Tensor prob = softmax_last(concat_last(corr), Real(1) / std::sqrt(static_cast<Real>(d)), keep);

  Tensor residual;
  if (stereo) {
    // A match at offset dx on the warped grid means disparity d - dx.
    Tensor ox(Shape{m, 1});
    for (std::size_t k = 0; k < m; ++k) ox.data_mut()[k] = -offsets[k].first;
    residual = matmul(prob, ox);
  } else {
    Tensor oxy(Shape{m, 2});
    for (std::size_t k = 0; k < m; ++k) {
      oxy.data_mut()[2 * k] = offsets[k].first;
      oxy.data_mut()[2 * k + 1] = offsets[k].second;
    }
    residual = matmul(prob, oxy);
  }
  Tensor values = add(up.values, reshape(residual, up.values.shape()));
  if (stereo) values = clamp_min(values, 0.0);
  DenseField matched{coarse.kind, values, 4};
  DenseField propagated = propagate(g1, matched, PropagationWindow::kLocal3x3);
  return {matched, propagated, g1};
}

}  // namespace unimatch
