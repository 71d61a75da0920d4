#pragma once

#include <random>

#include "unimatch/field.hpp"
#include "unimatch/numerics/params.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

enum class PropagationWindow { kGlobal, kLocal3x3 };

/// V' = softmax(F1 F1^T / sqrt(D)) V, over all positions or a 3x3 neighbourhood
/// (out-of-image neighbours excluded).
DenseField propagate(const Tensor& f1, const DenseField& v, PropagationWindow window);

/// Per-pixel combination weights [h x w x (r*r*9)]; channel (s * 9 + n) is the
/// weight of coarse neighbour n (row-major 3x3, centre = 4) for sub-pixel
/// s = i * r + j.
struct UpsampleWeights {
  Tensor values;
  int factor = 8;
};

/// Softmax over the neighbour axis of raw head output.
UpsampleWeights normalize_upsample_weights(const Tensor& logits, int factor);

/// Two-layer convolutional head producing convex upsampling weights from
/// features concatenated with the (two-channel padded) coarse prediction.
class UpsampleHead {
 public:
  UpsampleHead(int feature_dim, int hidden, int factor, ModelParams& params, std::mt19937_64& rng);

  UpsampleWeights weights(const Tensor& features, const DenseField& coarse) const;
  int factor() const { return factor_; }

 private:
  int factor_;
  Tensor conv1_, bias1_, conv2_, bias2_;
};

/// Each fine pixel is the convex combination of its 3x3 coarse neighbourhood
/// (border neighbours replicated); flow and disparity are multiplied by r.
DenseField convex_upsample(const DenseField& v, const UpsampleWeights& w);

/// Align-corners bilinear interpolation by factor r, with the same unit rule.
DenseField bilinear_upsample(const DenseField& v, int factor);

/// Prediction padded to two channels: flow as is, disparity as (-d, 0),
/// depth as (d, 0).
Tensor as_two_channels(const DenseField& v);

}  // namespace unimatch
