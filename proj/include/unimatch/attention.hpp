#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "unimatch/numerics/params.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

enum class AttentionMode { kPlanar2D, kHorizontal1D };

struct AttentionConfig {
  int num_blocks = 6;
  int splits = 2;  // K: K x K windows (2-D) or K segments per row (1-D)
  AttentionMode mode = AttentionMode::kPlanar2D;
  int feature_dim = 128;
};

/// Fixed sine/cosine encoding, [H x W x D]. Channels [0, D/2) encode y and
/// [D/2, D) encode x, each as interleaved (sin, cos) pairs with frequencies
/// 10000^(2k / (D/2)).
Tensor positional_encoding(std::size_t height, std::size_t width, std::size_t dim);

/// Flat token indices of every window, window-major. With `shifted`, the
/// partition is applied after rolling the map by half a window, so window w
/// holds the tokens whose rolled position falls inside it.
std::vector<std::vector<std::int64_t>> window_indices(std::size_t height, std::size_t width,
                                                      int splits, bool shifted,
                                                      AttentionMode mode);

/// Splits [H x W x D] into per-window token matrices [(H*W / n) x D].
std::vector<Tensor> window_split(const Tensor& t, int splits, bool shifted,
                                 AttentionMode mode = AttentionMode::kPlanar2D);
/// Inverse of window_split; returns [H x W x D].
Tensor window_merge(std::span<const Tensor> windows, std::size_t height, std::size_t width,
                    int splits, bool shifted, AttentionMode mode = AttentionMode::kPlanar2D);

/// Single-head scaled dot-product attention: softmax(q k^T / sqrt(D)) v.
Tensor attend(const Tensor& q, const Tensor& k, const Tensor& v);
inline Tensor attend(const Tensor& q, const Tensor& kv) { return attend(q, kv, kv); }

struct AttentionWeights {
  Tensor norm_gamma, norm_beta;
  Tensor query, key, value, out;  // [D x D], no bias
};

struct BlockWeights {
  AttentionWeights self_attn;
  AttentionWeights cross_attn;
  Tensor ffn_norm_gamma, ffn_norm_beta;
  Tensor ffn_in, ffn_in_bias;    // [D x rD]
  Tensor ffn_out, ffn_out_bias;  // [rD x D]
};

/// Learnable projections of the Transformer stack. The window geometry is
/// not part of the weights, so one set serves every mode and split count.
struct TransformerWeights {
  std::vector<BlockWeights> blocks;
  int feature_dim = 0;

  static TransformerWeights create(int num_blocks, int feature_dim, int ffn_ratio,
                                   ModelParams& params, std::mt19937_64& rng);
};

/// Adds the positional encoding to both [H x W x D] maps, then runs the block
/// stack (self-attention, cross-attention, FFN, each pre-norm with residual)
/// symmetrically for the two images. Consecutive blocks alternate unshifted
/// and shifted windows.
std::pair<Tensor, Tensor> enhance(const Tensor& f1, const Tensor& f2, const AttentionConfig& cfg,
                                  const TransformerWeights& weights);

}  // namespace unimatch
