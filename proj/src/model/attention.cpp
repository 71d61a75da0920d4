#include "unimatch/attention.hpp"

#include <cmath>
#include <string>

#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"

namespace unimatch {

Tensor positional_encoding(std::size_t height, std::size_t width, std::size_t dim) {
  if (dim == 0 || dim % 4 != 0) {
    throw ConfigError("positional encoding dimension must be a positive multiple of 4, got " +
                      std::to_string(dim));
  }
  const std::size_t half = dim / 2;
  Tensor pe(Shape{height, width, dim});
  std::vector<Real> inv_freq(half);
  for (std::size_t c = 0; c < half; ++c) {
    const Real e = static_cast<Real>(2 * (c / 2)) / static_cast<Real>(half);
    inv_freq[c] = Real(1) / std::pow(Real(10000), e);
  }
  Real* out = pe.data_mut();
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      Real* p = out + (y * width + x) * dim;
      for (std::size_t c = 0; c < half; ++c) {
        const Real ay = static_cast<Real>(y) * inv_freq[c];
        const Real ax = static_cast<Real>(x) * inv_freq[c];
        p[c] = (c % 2 == 0) ? std::sin(ay) : std::cos(ay);
        p[half + c] = (c % 2 == 0) ? std::sin(ax) : std::cos(ax);
      }
    }
  return pe;
}

std::vector<std::vector<std::int64_t>> window_indices(std::size_t height, std::size_t width,
                                                      int splits, bool shifted,
                                                      AttentionMode mode) {
  if (splits < 1) throw ConfigError("window splits must be >= 1");
  const std::size_t k = static_cast<std::size_t>(splits);
  const bool planar = mode == AttentionMode::kPlanar2D;
  const std::size_t ky = planar ? k : 1;  // windows along y
  // A single window is invariant to the roll, so K = 1 never shifts.
  shifted = shifted && k > 1;
  const std::size_t need_y = shifted ? 2 * ky : ky, need_x = shifted ? 2 * k : k;
  if ((planar && height % need_y != 0) || width % need_x != 0) {
    throw ConfigError("feature extents " + std::to_string(height) + "x" + std::to_string(width) +
                      " not divisible for " + std::to_string(splits) + " window splits" +
                      (shifted ? " (shifted)" : ""));
  }
  const std::size_t wh = planar ? height / k : 1, ww = width / k;
  const std::size_t sy = (shifted && planar) ? wh / 2 : 0, sx = shifted ? ww / 2 : 0;
  const std::size_t nwy = height / wh, nwx = k;
  std::vector<std::vector<std::int64_t>> windows;
  windows.reserve(nwy * nwx);
  for (std::size_t wy = 0; wy < nwy; ++wy)
    for (std::size_t wx = 0; wx < nwx; ++wx) {
      std::vector<std::int64_t> idx;
      idx.reserve(wh * ww);
      for (std::size_t ry = wy * wh; ry < (wy + 1) * wh; ++ry)
        for (std::size_t rx = wx * ww; rx < (wx + 1) * ww; ++rx) {
          // Rolled position (ry, rx) holds original ((ry - sy) mod H, (rx - sx) mod W).
          const std::size_t oy = (ry + height - sy) % height;
          const std::size_t ox = (rx + width - sx) % width;
          idx.push_back(static_cast<std::int64_t>(oy * width + ox));
        }
      windows.push_back(std::move(idx));
    }
  return windows;
}

std::vector<Tensor> window_split(const Tensor& t, int splits, bool shifted, AttentionMode mode) {
  if (t.rank() != 3) throw DimensionError("window_split expects [H x W x D]");
  auto windows = window_indices(t.dim(0), t.dim(1), splits, shifted, mode);
  std::vector<Tensor> out;
  out.reserve(windows.size());
  for (const auto& idx : windows) out.push_back(gather_rows(t, idx));
  return out;
}

Tensor window_merge(std::span<const Tensor> windows, std::size_t height, std::size_t width,
                    int splits, bool shifted, AttentionMode mode) {
  auto index = window_indices(height, width, splits, shifted, mode);
  if (windows.size() != index.size()) throw DimensionError("window_merge: window count mismatch");
  std::vector<std::int64_t> inverse(height * width, -1);
  std::int64_t row = 0;
  for (const auto& idx : index)
    for (std::int64_t token : idx) inverse[token] = row++;
  Tensor stacked = concat_rows(windows);
  return reshape(gather_rows(stacked, inverse), Shape{height, width, stacked.cols()});
}

Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) ||
      k.dim(0) != v.dim(0)) {
    throw ContractError("attend: incompatible q " + shape_str(q.shape()) + ", k " +
                        shape_str(k.shape()) + ", v " + shape_str(v.shape()));
  }
  const Real s = Real(1) / std::sqrt(static_cast<Real>(q.dim(1)));
  return matmul(softmax_last(matmul_nt(q, k), s), v);
}

namespace {

AttentionWeights make_attention(const std::string& prefix, int d, ModelParams& params,
                                std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(d);
  AttentionWeights w;
  w.norm_gamma = params.add(prefix + "norm.gamma", Tensor(Shape{n}, 1.0));
  w.norm_beta = params.add(prefix + "norm.beta", Tensor(Shape{n}));
  w.query = params.add(prefix + "query", xavier_uniform(Shape{n, n}, n, n, rng));
  w.key = params.add(prefix + "key", xavier_uniform(Shape{n, n}, n, n, rng));
  w.value = params.add(prefix + "value", xavier_uniform(Shape{n, n}, n, n, rng));
  w.out = params.add(prefix + "out", xavier_uniform(Shape{n, n}, n, n, rng));
  return w;
}

// Pre-norm attention sub-layer. `x` [N x D] queries, `source` [N x D] keys/values
// (x itself for self-attention), both laid out as an H x W map.
Tensor attention_update(const Tensor& x, const Tensor& source, bool is_self,
                        const AttentionWeights& w, std::size_t h, std::size_t wd,
                        const AttentionConfig& cfg, bool shifted) {
  Tensor xn = layer_norm(x, w.norm_gamma, w.norm_beta);
  Tensor sn = is_self ? xn : layer_norm(source, w.norm_gamma, w.norm_beta);
  Tensor q = matmul(xn, w.query);
  Tensor k = matmul(sn, w.key);
  Tensor v = matmul(sn, w.value);
  const auto windows = window_indices(h, wd, cfg.splits, shifted, cfg.mode);
  std::vector<Tensor> outs;
  outs.reserve(windows.size());
  for (const auto& idx : windows) {
    outs.push_back(attend(gather_rows(q, idx), gather_rows(k, idx), gather_rows(v, idx)));
  }
  std::vector<std::int64_t> inverse(h * wd, -1);
  std::int64_t row = 0;
  for (const auto& idx : windows)
    for (std::int64_t token : idx) inverse[token] = row++;
  Tensor merged = gather_rows(concat_rows(outs), inverse);
  return add(x, matmul(merged, w.out));
}

Tensor ffn_update(const Tensor& x, const BlockWeights& b) {
  Tensor xn = layer_norm(x, b.ffn_norm_gamma, b.ffn_norm_beta);
  Tensor hdn = gelu(add_bias(matmul(xn, b.ffn_in), b.ffn_in_bias));
  return add(x, add_bias(matmul(hdn, b.ffn_out), b.ffn_out_bias));
}

}  // namespace

TransformerWeights TransformerWeights::create(int num_blocks, int feature_dim, int ffn_ratio,
                                              ModelParams& params, std::mt19937_64& rng) {
  if (num_blocks < 0) throw ConfigError("num_blocks must be >= 0");
  if (feature_dim < 1 || ffn_ratio < 1) throw ConfigError("invalid Transformer widths");
  TransformerWeights tw;
  tw.feature_dim = feature_dim;
  const std::size_t d = static_cast<std::size_t>(feature_dim);
  const std::size_t hd = d * static_cast<std::size_t>(ffn_ratio);
  for (int i = 0; i < num_blocks; ++i) {
    const std::string prefix = "transformer.block" + std::to_string(i) + ".";
    BlockWeights b;
    b.self_attn = make_attention(prefix + "self.", feature_dim, params, rng);
    b.cross_attn = make_attention(prefix + "cross.", feature_dim, params, rng);
    b.ffn_norm_gamma = params.add(prefix + "ffn.norm.gamma", Tensor(Shape{d}, 1.0));
    b.ffn_norm_beta = params.add(prefix + "ffn.norm.beta", Tensor(Shape{d}));
    b.ffn_in = params.add(prefix + "ffn.in", xavier_uniform(Shape{d, hd}, d, hd, rng));
    b.ffn_in_bias = params.add(prefix + "ffn.in_bias", Tensor(Shape{hd}));
    b.ffn_out = params.add(prefix + "ffn.out", xavier_uniform(Shape{hd, d}, hd, d, rng));
    b.ffn_out_bias = params.add(prefix + "ffn.out_bias", Tensor(Shape{d}));
    tw.blocks.push_back(std::move(b));
  }
  return tw;
}

std::pair<Tensor, Tensor> enhance(const Tensor& f1, const Tensor& f2, const AttentionConfig& cfg,
                                  const TransformerWeights& weights) {
  if (f1.shape() != f2.shape() || f1.rank() != 3) {
    throw ContractError("enhance: feature extents differ " + shape_str(f1.shape()) + " vs " +
                        shape_str(f2.shape()));
  }
  if (static_cast<std::size_t>(cfg.num_blocks) != weights.blocks.size()) {
    throw ConfigError("enhance: config asks for " + std::to_string(cfg.num_blocks) +
                      " blocks, weights hold " + std::to_string(weights.blocks.size()));
  }
  const std::size_t h = f1.dim(0), w = f1.dim(1), d = f1.dim(2);
  if (static_cast<int>(d) != weights.feature_dim) {
    throw ContractError("enhance: feature dimension " + std::to_string(d) +
                        " does not match weights");
  }
  Tensor pe = positional_encoding(h, w, d);
  Tensor x1 = reshape(add(f1, pe), Shape{h * w, d});
  Tensor x2 = reshape(add(f2, pe), Shape{h * w, d});
  for (std::size_t i = 0; i < weights.blocks.size(); ++i) {
    const BlockWeights& b = weights.blocks[i];
    const bool shifted = (i % 2) == 1;
    Tensor s1 = attention_update(x1, x1, true, b.self_attn, h, w, cfg, shifted);
    Tensor s2 = attention_update(x2, x2, true, b.self_attn, h, w, cfg, shifted);
    Tensor c1 = attention_update(s1, s2, false, b.cross_attn, h, w, cfg, shifted);
    Tensor c2 = attention_update(s2, s1, false, b.cross_attn, h, w, cfg, shifted);
    x1 = ffn_update(c1, b);
    x2 = ffn_update(c2, b);
  }
  return {reshape(x1, Shape{h, w, d}), reshape(x2, Shape{h, w, d})};
}

}  // namespace unimatch
