#include "unimatch/backbone.hpp"

#include <string>

#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"

namespace unimatch {
namespace {

Tensor conv_kernel(int k, int cin, int cout, std::mt19937_64& rng) {
  return he_uniform(Shape{std::size_t(k), std::size_t(k), std::size_t(cin), std::size_t(cout)},
                    std::size_t(k) * k * cin, rng);
}

}  // namespace

void BackboneConfig::validate() const {
  if (stem_channels < 1 || feature_dim < 1) throw ConfigError("backbone widths must be positive");
  if (stem_kernel < 1 || stem_kernel % 2 == 0) throw ConfigError("stem kernel must be odd");
  int total_stride = 2;
  for (const auto& b : blocks) {
    if (b.channels < 1) throw ConfigError("backbone block width must be positive");
    if (b.stride != 1 && b.stride != 2) throw ConfigError("backbone block stride must be 1 or 2");
    total_stride *= b.stride;
  }
  if (total_stride != 4) {
    throw ConfigError("backbone trunk must reach 1/4 resolution, got 1/" +
                      std::to_string(total_stride));
  }
}

Backbone::Backbone(const BackboneConfig& cfg, ModelParams& params, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg_.validate();
  stem_ = params.add("backbone.stem", conv_kernel(cfg.stem_kernel, 3, cfg.stem_channels, rng));
  int cin = cfg.stem_channels;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& stage = cfg.blocks[i];
    const std::string prefix = "backbone.block" + std::to_string(i) + ".";
    Block b;
    b.stride = stage.stride;
    b.conv1 = params.add(prefix + "conv1", conv_kernel(3, cin, stage.channels, rng));
    b.conv2 = params.add(prefix + "conv2", conv_kernel(3, stage.channels, stage.channels, rng));
    if (stage.stride != 1 || cin != stage.channels) {
      b.shortcut = params.add(prefix + "shortcut", conv_kernel(1, cin, stage.channels, rng));
    }
    blocks_.push_back(std::move(b));
    cin = stage.channels;
  }
  trident_weight_ = params.add("backbone.trident.weight", conv_kernel(3, cin, cfg.feature_dim, rng));
  trident_bias_ =
      params.add("backbone.trident.bias", Tensor(Shape{std::size_t(cfg.feature_dim)}));
}

FeaturePyramid Backbone::forward(const Tensor& image, bool with_quarter) const {
  if (image.rank() != 3 || image.dim(2) != 3) {
    throw InputError("backbone expects an [H x W x 3] image, got " + shape_str(image.shape()));
  }
  const std::size_t h = image.dim(0), w = image.dim(1);
  if (h % 8 != 0 || w % 8 != 0 || h == 0 || w == 0) {
    throw InputError("image extents " + shape_str(image.shape()) +
                     " must be positive multiples of 8; pad before extraction");
  }
  Tensor x = gelu(instance_norm(conv2d(image, stem_, 2, Padding::kSame)));
  for (const auto& b : blocks_) {
    Tensor y = gelu(instance_norm(conv2d(x, b.conv1, b.stride, Padding::kSame)));
    y = instance_norm(conv2d(y, b.conv2, 1, Padding::kSame));
    Tensor skip = b.shortcut ? instance_norm(conv2d(x, *b.shortcut, b.stride, Padding::kSame)) : x;
    x = gelu(add(skip, y));
  }
  FeaturePyramid out;
  out.image_height = h;
  out.image_width = w;
  out.f8 = add_bias(conv2d(x, trident_weight_, 2, Padding::kSame), trident_bias_);
  if (with_quarter) out.f4 = add_bias(conv2d(x, trident_weight_, 1, Padding::kSame), trident_bias_);
  return out;
}

std::pair<FeaturePyramid, FeaturePyramid> Backbone::extract(const Tensor& img1, const Tensor& img2,
                                                            bool with_quarter) const {
  if (img1.shape() != img2.shape()) {
    throw InputError("image pair extents differ: " + shape_str(img1.shape()) + " vs " +
                     shape_str(img2.shape()));
  }
  return {forward(img1, with_quarter), forward(img2, with_quarter)};
}

}  // namespace unimatch
