#pragma once

#include "unimatch/attention.hpp"
#include "unimatch/field.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

struct RefineConfig {
  int window = 9;  // local matching extent (W x W for flow, W for stereo)
  int splits = 8;  // attention windows at 1/4 resolution

  void validate() const;
};

/// Samples F2 at G + V. Disparity is read as the flow (-d, 0); depth is rejected.
Tensor warp_feature(const Tensor& f2, const DenseField& v);

struct RefineResult {
  DenseField matched;     // upsampled coarse prediction plus local-matching residual
  DenseField propagated;  // after 3x3 self-similarity propagation
  Tensor f1;              // enhanced 1/4 features of image 1
};

/// One hierarchical step from 1/8 to 1/4: bilinear upsampling, warping,
/// Transformer enhancement with the shared weights, local matching around the
/// warped position and local propagation.
RefineResult refine_once(const Tensor& f1_4, const Tensor& f2_4, const DenseField& coarse,
                         const RefineConfig& cfg, const AttentionConfig& attention,
                         const TransformerWeights& weights);

}  // namespace unimatch
