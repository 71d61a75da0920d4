#include "unimatch/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "unimatch/attention.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"
#include "unimatch/numerics/tape.hpp"

namespace unimatch {
namespace {

// Row indices of the (dy, dx)-shifted neighbour of every pixel, -1 outside.
std::vector<std::int64_t> shifted_rows(std::size_t h, std::size_t w, int dy, int dx,
                                       bool replicate) {
  std::vector<std::int64_t> idx(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      long yy = static_cast<long>(y) + dy, xx = static_cast<long>(x) + dx;
      if (replicate) {
        yy = std::clamp(yy, 0L, static_cast<long>(h) - 1);
        xx = std::clamp(xx, 0L, static_cast<long>(w) - 1);
      }
      const bool inside = yy >= 0 && xx >= 0 && yy < static_cast<long>(h) && xx < static_cast<long>(w);
      idx[y * w + x] = inside ? static_cast<std::int64_t>(yy * static_cast<long>(w) + xx) : -1;
    }
  return idx;
}

Real unit_scale(const DenseField& v, int factor) {
  return v.scales_with_resolution() ? static_cast<Real>(factor) : Real(1);
}

}  // namespace

Tensor as_two_channels(const DenseField& v) {
  check_field(v, "as_two_channels");
  if (v.kind == FieldKind::kFlow) return v.values;
  Tensor first = v.kind == FieldKind::kDisparity ? scale(v.values, -1.0) : v.values;
  Tensor parts[] = {first, Tensor(v.values.shape())};
  return concat_last(parts);
}

DenseField propagate(const Tensor& f1, const DenseField& v, PropagationWindow window) {
  check_field(v, "propagate");
  if (f1.rank() != 3 || f1.dim(0) != v.height() || f1.dim(1) != v.width()) {
    throw ContractError("propagate: feature extents " + shape_str(f1.shape()) +
                        " do not match field " + shape_str(v.values.shape()));
  }
  const std::size_t h = f1.dim(0), w = f1.dim(1), d = f1.dim(2), c = v.channels();
  if (window == PropagationWindow::kGlobal) {
    // One window (K = 1) covering the whole map.
    auto fw = window_split(f1, 1, false);
    auto vw = window_split(v.values, 1, false);
    Tensor out[] = {attend(fw[0], fw[0], vw[0])};
    return {v.kind, window_merge(out, h, w, 1, false), v.stride};
  }
  Tensor fr = reshape(f1, Shape{h * w, d});
  Tensor vr = reshape(v.values, Shape{h * w, c});
  std::vector<Tensor> logits, values;
  std::vector<std::uint8_t> keep(h * w * 9);
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx, ++n) {
      const auto idx = shifted_rows(h, w, dy, dx, false);
      for (std::size_t i = 0; i < h * w; ++i) keep[i * 9 + n] = idx[i] >= 0;
      logits.push_back(rowwise_dot(fr, gather_rows(fr, idx)));
      values.push_back(gather_rows(vr, idx));
    }
  Tensor m = softmax_last(concat_last(logits), Real(1) / std::sqrt(static_cast<Real>(d)), keep);
  Tensor acc = mul_col(values[0], slice_last(m, 0, 1));
  for (int k = 1; k < 9; ++k) acc = add(acc, mul_col(values[k], slice_last(m, k, 1)));
  return {v.kind, reshape(acc, Shape{h, w, c}), v.stride};
}

UpsampleWeights normalize_upsample_weights(const Tensor& logits, int factor) {
  const std::size_t groups = static_cast<std::size_t>(factor) * factor * 9;
  if (logits.rank() != 3 || logits.dim(2) != groups) {
    throw DimensionError("upsample logits " + shape_str(logits.shape()) + " for factor " +
                         std::to_string(factor));
  }
  Tensor flat = reshape(logits, Shape{logits.numel() / 9, 9});
  return {reshape(softmax_last(flat, 1.0), logits.shape()), factor};
}

UpsampleHead::UpsampleHead(int feature_dim, int hidden, int factor, ModelParams& params,
                           std::mt19937_64& rng)
    : factor_(factor) {
  if (factor != 4 && factor != 8) throw ConfigError("upsample factor must be 4 or 8");
  if (hidden < 1) throw ConfigError("upsampler hidden width must be positive");
  const std::size_t cin = static_cast<std::size_t>(feature_dim) + 2;
  const std::size_t hid = static_cast<std::size_t>(hidden);
  const std::size_t out = static_cast<std::size_t>(factor) * factor * 9;
  conv1_ = params.add("upsampler.conv1", he_uniform(Shape{3, 3, cin, hid}, 9 * cin, rng));
  bias1_ = params.add("upsampler.bias1", Tensor(Shape{hid}));
  conv2_ = params.add("upsampler.conv2", he_uniform(Shape{1, 1, hid, out}, hid, rng));
  bias2_ = params.add("upsampler.bias2", Tensor(Shape{out}));
}

UpsampleWeights UpsampleHead::weights(const Tensor& features, const DenseField& coarse) const {
  Tensor parts[] = {features, as_two_channels(coarse)};
  Tensor x = concat_last(parts);
  Tensor hdn = gelu(add_bias(conv2d(x, conv1_, 1, Padding::kSame), bias1_));
  Tensor logits = add_bias(conv2d(hdn, conv2_, 1, Padding::kSame), bias2_);
  return normalize_upsample_weights(logits, factor_);
}

DenseField convex_upsample(const DenseField& v, const UpsampleWeights& w) {
  check_field(v, "convex_upsample");
  const int r = w.factor;
  if (r != 4 && r != 8) throw ConfigError("convex_upsample: factor must be 4 or 8");
  const std::size_t h = v.height(), wd = v.width(), c = v.channels();
  const std::size_t rr = static_cast<std::size_t>(r) * r;
  if (w.values.rank() != 3 || w.values.dim(0) != h || w.values.dim(1) != wd ||
      w.values.dim(2) != rr * 9) {
    throw ContractError("convex_upsample: weights " + shape_str(w.values.shape()) +
                        " do not match field " + shape_str(v.values.shape()));
  }
  const Real* wt = w.values.data();
  for (std::size_t g = 0; g < h * wd * rr; ++g) {
    Real s = 0;
    for (int n = 0; n < 9; ++n) s += wt[g * 9 + n];
    if (std::abs(s - 1) > 1e-6) {
      throw ContractError("convex_upsample: weight group " + std::to_string(g) +
                          " is not normalized");
    }
  }
  std::vector<std::vector<std::int64_t>> nbr;
  for (int dy = -1; dy <= 1; ++dy)
    for (int dx = -1; dx <= 1; ++dx) nbr.push_back(shifted_rows(h, wd, dy, dx, true));
  const Real unit = unit_scale(v, r);
  const std::size_t fh = h * r, fw = wd * r;
  Tensor out(Shape{fh, fw, c});
  const Tensor& vals = v.values;
  auto fine_index = [r = static_cast<std::size_t>(r), fw](std::size_t y, std::size_t x, std::size_t s) {
    return (y * r + s / r) * fw + (x * r + s % r);
  };
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < wd; ++x) {
      const std::size_t p = y * wd + x;
      for (std::size_t s = 0; s < rr; ++s) {
        Real* dst = out.data_mut() + fine_index(y, x, s) * c;
        const Real* ws = wt + (p * rr + s) * 9;
        for (int n = 0; n < 9; ++n) {
          const Real* src = vals.data() + nbr[n][p] * c;
          for (std::size_t ch = 0; ch < c; ++ch) dst[ch] += unit * ws[n] * src[ch];
        }
      }
    }
  detail::check_finite(out, "convex_upsample");
  const Tensor& weights = w.values;
  if (detail::should_record({&vals, &weights})) {
    detail::record(out, {&vals, &weights},
                   [vals, weights, nbr, h, wd, c, rr, unit, fine_index](const detail::TensorImpl& o) {
                     Real* gv = detail::grad_of(vals);
                     Real* gw = detail::grad_of(weights);
                     const Real* wt = weights.data();
                     for (std::size_t p = 0; p < h * wd; ++p) {
                       const std::size_t y = p / wd, x = p % wd;
                       for (std::size_t s = 0; s < rr; ++s) {
                         const Real* g = o.grad.data() + fine_index(y, x, s) * c;
                         for (int n = 0; n < 9; ++n) {
                           const std::size_t q = static_cast<std::size_t>(nbr[n][p]);
                           const Real wn = wt[(p * rr + s) * 9 + n];
                           Real acc = 0;
                           for (std::size_t ch = 0; ch < c; ++ch) {
                             if (gv) gv[q * c + ch] += unit * wn * g[ch];
                             acc += g[ch] * vals[q * c + ch];
                           }
                           if (gw) gw[(p * rr + s) * 9 + n] += unit * acc;
                         }
                       }
                     }
                   });
  }
  return {v.kind, out, std::max(1, v.stride / r)};
}

DenseField bilinear_upsample(const DenseField& v, int factor) {
  check_field(v, "bilinear_upsample");
  if (factor < 1) throw ConfigError("bilinear_upsample: factor must be >= 1");
  if (factor == 1) return v;
  const std::size_t h = v.height(), w = v.width();
  const std::size_t fh = h * factor, fw = w * factor;
  Tensor coords(Shape{fh, fw, 2});
  const Real sx = fw > 1 ? static_cast<Real>(w - 1) / static_cast<Real>(fw - 1) : 0;
  const Real sy = fh > 1 ? static_cast<Real>(h - 1) / static_cast<Real>(fh - 1) : 0;
  for (std::size_t y = 0; y < fh; ++y)
    for (std::size_t x = 0; x < fw; ++x) {
      coords.data_mut()[(y * fw + x) * 2] = static_cast<Real>(x) * sx;
      coords.data_mut()[(y * fw + x) * 2 + 1] = static_cast<Real>(y) * sy;
    }
  Tensor up = bilinear_sample(v.values, coords);
  const Real unit = unit_scale(v, factor);
  return {v.kind, unit == 1 ? up : scale(up, unit), std::max(1, v.stride / factor)};
}

}  // namespace unimatch
