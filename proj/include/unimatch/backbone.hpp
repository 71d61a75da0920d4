#pragma once

#include <optional>
#include <random>
#include <utility>
#include <vector>

#include "unimatch/numerics/params.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

struct ResidualStage {
  int channels;
  int stride;
};

/// Residual CNN: stride-2 stem, residual blocks reaching 1/4 resolution, and a
/// shared 3x3 "trident" projection applied with strides 1 (1/4) and 2 (1/8).
struct BackboneConfig {
  int stem_channels = 64;
  int stem_kernel = 7;
  std::vector<ResidualStage> blocks = {{64, 1}, {64, 1}, {96, 2}, {96, 1}, {128, 1}, {128, 1}};
  int feature_dim = 128;

  void validate() const;
};

struct FeaturePyramid {
  Tensor f8;                 // [H/8 x W/8 x D]
  std::optional<Tensor> f4;  // [H/4 x W/4 x D]
  std::size_t image_height = 0;
  std::size_t image_width = 0;
};

class Backbone {
 public:
  Backbone(const BackboneConfig& cfg, ModelParams& params, std::mt19937_64& rng);

  /// Features for a single [H x W x 3] image normalized to [-1, 1].
  FeaturePyramid forward(const Tensor& image, bool with_quarter) const;

  /// Runs both images through the identical parameter set.
  std::pair<FeaturePyramid, FeaturePyramid> extract(const Tensor& img1, const Tensor& img2,
                                                    bool with_quarter) const;

  const BackboneConfig& config() const { return cfg_; }

 private:
  struct Block {
    Tensor conv1, conv2;
    std::optional<Tensor> shortcut;
    int stride;
  };

  BackboneConfig cfg_;
  Tensor stem_;
  std::vector<Block> blocks_;
  Tensor trident_weight_, trident_bias_;
};

}  // namespace unimatch
