#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "unimatch/backbone.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

using testing::bitwise_equal;
using testing::max_abs_diff;
using testing::random_tensor;

BackboneConfig small_config() {
  BackboneConfig cfg;
  cfg.stem_channels = 8;
  cfg.blocks = {{8, 1}, {12, 2}};
  cfg.feature_dim = 16;
  return cfg;
}

// Smooth image that repeats every `period` pixels in both directions.
Tensor periodic_image(std::size_t size, std::size_t period, std::size_t shift) {
  Tensor img(Shape{size, size, 3});
  const Real w = 2 * M_PI / static_cast<Real>(period);
  for (std::size_t y = 0; y < size; ++y)
    for (std::size_t x = 0; x < size; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        const Real xs = static_cast<Real>(x + shift), ys = static_cast<Real>(y);
        img.data_mut()[(y * size + x) * 3 + c] =
            0.5 * std::sin(w * xs + c) * std::cos(2 * w * ys) + 0.3 * std::cos(3 * w * xs - ys * w);
      }
  return img;
}

TEST(Backbone, DefaultShapes) {
  ModelParams params;
  std::mt19937_64 rng(1);
  Backbone net(BackboneConfig{}, params, rng);
  auto img = random_tensor(Shape{64, 64, 3}, rng);
  auto fp = net.forward(img, true);
  EXPECT_EQ(fp.f8.shape(), (Shape{8, 8, 128}));
  ASSERT_TRUE(fp.f4.has_value());
  EXPECT_EQ(fp.f4->shape(), (Shape{16, 16, 128}));
  EXPECT_EQ(fp.image_height, 64u);
  EXPECT_EQ(fp.image_width, 64u);
  EXPECT_FALSE(net.forward(img, false).f4.has_value());
}

TEST(Backbone, IdenticalImagesGiveIdenticalFeatures) {
  ModelParams params;
  std::mt19937_64 rng(2);
  Backbone net(small_config(), params, rng);
  auto img = random_tensor(Shape{32, 32, 3}, rng);
  auto [a, b] = net.extract(img, img.clone(), true);
  EXPECT_TRUE(bitwise_equal(a.f8, b.f8));
  EXPECT_TRUE(bitwise_equal(*a.f4, *b.f4));
}

TEST(Backbone, SwappingInputsSwapsOutputs) {
  ModelParams params;
  std::mt19937_64 rng(3);
  Backbone net(small_config(), params, rng);
  auto i1 = random_tensor(Shape{32, 24, 3}, rng);
  auto i2 = random_tensor(Shape{32, 24, 3}, rng);
  auto [a1, a2] = net.extract(i1, i2, true);
  auto [b1, b2] = net.extract(i2, i1, true);
  EXPECT_TRUE(bitwise_equal(a1.f8, b2.f8));
  EXPECT_TRUE(bitwise_equal(a2.f8, b1.f8));
  EXPECT_TRUE(bitwise_equal(*a1.f4, *b2.f4));
}

TEST(Backbone, RejectsBadExtents) {
  ModelParams params;
  std::mt19937_64 rng(4);
  Backbone net(small_config(), params, rng);
  EXPECT_THROW(net.forward(Tensor(Shape{30, 32, 3}), false), InputError);
  EXPECT_THROW(net.extract(Tensor(Shape{32, 32, 3}), Tensor(Shape{32, 40, 3}), false),
               InputError);
  BackboneConfig bad = small_config();
  bad.feature_dim = 0;
  ModelParams p2;
  EXPECT_THROW(Backbone(bad, p2, rng), ConfigError);
}

TEST(Backbone, TranslationCovariantAwayFromBorder) {
  ModelParams params;
  std::mt19937_64 rng(5);
  Backbone net(small_config(), params, rng);
  const std::size_t size = 128, shift = 8;
  auto f0 = net.forward(periodic_image(size, 64, 0), false).f8;
  auto f1 = net.forward(periodic_image(size, 64, shift), false).f8;
  // Image shifted left by 8 px: feature column x of f1 matches column x + 1 of f0.
  const std::size_t n = size / 8, d = f0.dim(2), margin = 4;
  Real worst = 0, scale = 0;
  for (std::size_t y = margin; y < n - margin; ++y)
    for (std::size_t x = margin; x + 1 < n - margin; ++x)
      for (std::size_t c = 0; c < d; ++c) {
        const Real a = f1[(y * n + x) * d + c], b = f0[(y * n + x + 1) * d + c];
        worst = std::max(worst, std::abs(a - b));
        scale = std::max(scale, std::abs(b));
      }
  EXPECT_LT(worst, 0.05 * scale);
}

TEST(Backbone, ParameterRegistryNames) {
  ModelParams params;
  std::mt19937_64 rng(6);
  Backbone net(small_config(), params, rng);
  EXPECT_TRUE(params.contains("backbone.stem"));
  EXPECT_TRUE(params.contains("backbone.trident.weight"));
  EXPECT_TRUE(params.contains("backbone.block1.shortcut"));
  EXPECT_FALSE(params.contains("backbone.block0.shortcut"));
}

}  // namespace
}  // namespace unimatch
