#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"
#include "unimatch/numerics/tape.hpp"
#include "unimatch/propagation.hpp"
#include "unimatch/refinement.hpp"

namespace unimatch {
namespace {

using testing::bitwise_equal;
using testing::max_abs_diff;
using testing::random_tensor;

// Unit-norm features, smooth and periodic with the given period (pixels).
Tensor smooth_features(std::size_t h, std::size_t w, std::size_t d, Real period, Real phase = 0) {
  Tensor t(Shape{h, w, d});
  const Real om = 2 * M_PI / period;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      Real norm = 0;
      Real* v = t.data_mut() + (y * w + x) * d;
      for (std::size_t c = 0; c < d; ++c) {
        const Real a = om * ((c % 2 + 1) * (x + phase) + (c % 3) * 0.5 * y) + c;
        v[c] = std::sin(a) + 1.5;
        norm += v[c] * v[c];
      }
      for (std::size_t c = 0; c < d; ++c) v[c] /= std::sqrt(norm);
    }
  return t;
}

// Saturated random unit codes, one per source position; column x shows the code
// of column x + shift_x (zero where that column is outside the map).
Tensor coded_features(std::size_t h, std::size_t w, std::size_t d, Real s, long shift_x) {
  std::mt19937_64 rng(99);
  Tensor codes = random_tensor(Shape{h * w, d}, rng);
  Tensor t(Shape{h, w, d});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const long src = static_cast<long>(x) + shift_x;
      if (src < 0 || src >= static_cast<long>(w)) continue;
      const Real* code = codes.data() + (y * w + src) * d;
      Real norm = 0;
      for (std::size_t c = 0; c < d; ++c) norm += code[c] * code[c];
      for (std::size_t c = 0; c < d; ++c) t.data_mut()[(y * w + x) * d + c] = s * code[c] / std::sqrt(norm);
    }
  return t;
}

struct Shared {
  ModelParams params;
  TransformerWeights weights;
  AttentionConfig attn{2, 2, AttentionMode::kPlanar2D, 16};
  Shared() {
    std::mt19937_64 rng(3);
    weights = TransformerWeights::create(2, 16, 4, params, rng);
  }
};

TEST(WarpFeature, ZeroFieldIsIdentity) {
  std::mt19937_64 rng(1);
  auto f = random_tensor(Shape{4, 6, 3}, rng);
  DenseField v{FieldKind::kFlow, Tensor(Shape{4, 6, 2}), 4};
  EXPECT_TRUE(bitwise_equal(warp_feature(f, v), f));
  DenseField d{FieldKind::kDisparity, Tensor(Shape{4, 6, 1}), 4};
  EXPECT_TRUE(bitwise_equal(warp_feature(f, d), f));
}

TEST(WarpFeature, IntegerTranslationShiftsInterior) {
  auto f = smooth_features(8, 12, 4, 6);
  DenseField v{FieldKind::kFlow, Tensor(Shape{8, 12, 2}), 4};
  for (std::size_t i = 0; i < 96; ++i) {
    v.values.data_mut()[2 * i] = 2;
    v.values.data_mut()[2 * i + 1] = -1;
  }
  auto out = warp_feature(f, v);
  for (std::size_t y = 1; y < 8; ++y)
    for (std::size_t x = 0; x + 2 < 12; ++x)
      for (std::size_t c = 0; c < 4; ++c)
        EXPECT_EQ(out[(y * 12 + x) * 4 + c], f[((y - 1) * 12 + x + 2) * 4 + c]);
  DenseField disp{FieldKind::kDisparity, Tensor(Shape{8, 12, 1}, 3.0), 4};
  auto sd = warp_feature(f, disp);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 3; x < 12; ++x)
      EXPECT_EQ(sd[(y * 12 + x) * 4], f[(y * 12 + x - 3) * 4]);
}

TEST(WarpFeature, ForwardThenBackwardIsNearIdentity) {
  const std::size_t h = 16, w = 16, d = 8;
  auto f = smooth_features(h, w, d, 32);
  DenseField v{FieldKind::kFlow, Tensor(Shape{h, w, 2}), 4};
  DenseField back{FieldKind::kFlow, Tensor(Shape{h, w, 2}), 4};
  for (std::size_t i = 0; i < h * w; ++i) {
    v.values.data_mut()[2 * i] = 0.3;
    v.values.data_mut()[2 * i + 1] = 0.6;
    back.values.data_mut()[2 * i] = -0.3;
    back.values.data_mut()[2 * i + 1] = -0.6;
  }
  auto twice = warp_feature(warp_feature(f, v), back);
  Real worst = 0;
  for (std::size_t y = 2; y + 2 < h; ++y)
    for (std::size_t x = 2; x + 2 < w; ++x)
      for (std::size_t c = 0; c < d; ++c)
        worst = std::max(worst, std::abs(twice[(y * w + x) * d + c] - f[(y * w + x) * d + c]));
  EXPECT_LT(worst, 1e-2);
}

TEST(WarpFeature, RejectsDepth) {
  DenseField v{FieldKind::kDepth, Tensor(Shape{2, 2, 1}, 1.0), 4};
  EXPECT_THROW(warp_feature(Tensor(Shape{2, 2, 3}), v), ConfigError);
}

TEST(RefineOnce, AlignedFeaturesKeepPrediction) {
  Shared s;
  const std::size_t h = 16, w = 16, d = 16;
  for (long shift : {0L, 2L}) {
    // Coarse flow (shift / 2, 0) at 1/8 becomes (shift, 0) at 1/4; F2 is aligned with it.
    auto f1 = coded_features(h, w, d, 30, 0);
    auto f2 = coded_features(h, w, d, 30, -shift);
    DenseField coarse{FieldKind::kFlow, Tensor(Shape{h / 2, w / 2, 2}), 8};
    for (std::size_t i = 0; i < h * w / 4; ++i) coarse.values.data_mut()[2 * i] = shift / 2.0;
    auto r = refine_once(f1, f2, coarse, RefineConfig{}, s.attn, s.weights);
    EXPECT_EQ(r.matched.stride, 4);
    EXPECT_EQ(r.propagated.values.shape(), (Shape{h, w, 2}));
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x + shift < w; ++x) {
        const std::size_t i = y * w + x;
        EXPECT_NEAR(r.matched.values[2 * i], Real(shift), 1e-3) << x;
        EXPECT_NEAR(r.matched.values[2 * i + 1], 0.0, 1e-3);
        if (x + shift + 1 < w) EXPECT_NEAR(r.propagated.values[2 * i], Real(shift), 1e-3);
      }
  }
}

TEST(RefineOnce, ResidualBoundedByWindowRadius) {
  Shared s;
  std::mt19937_64 rng(4);
  const std::size_t h = 16, w = 16;
  for (int trial = 0; trial < 3; ++trial) {
    auto f1 = random_tensor(Shape{h, w, 16}, rng, -3, 3);
    auto f2 = random_tensor(Shape{h, w, 16}, rng, -3, 3);
    DenseField coarse{FieldKind::kFlow, random_tensor(Shape{h / 2, w / 2, 2}, rng, -2, 2), 8};
    auto r = refine_once(f1, f2, coarse, RefineConfig{}, s.attn, s.weights);
    auto up = bilinear_upsample(coarse, 2);
    for (std::size_t i = 0; i < up.values.numel(); ++i)
      EXPECT_LE(std::abs(r.matched.values[i] - up.values[i]), 4.0 + 1e-12);
  }
}

TEST(RefineOnce, StereoIsHorizontalAndNonNegative) {
  Shared s;
  std::mt19937_64 rng(5);
  const std::size_t h = 8, w = 32;
  auto f1 = random_tensor(Shape{h, w, 16}, rng, -3, 3);
  auto f2 = random_tensor(Shape{h, w, 16}, rng, -3, 3);
  DenseField coarse{FieldKind::kDisparity, random_tensor(Shape{h / 2, w / 2, 1}, rng, 0, 2), 8};
  auto r = refine_once(f1, f2, coarse, RefineConfig{}, s.attn, s.weights);
  EXPECT_EQ(r.matched.channels(), 1u);
  auto up = bilinear_upsample(coarse, 2);
  for (std::size_t i = 0; i < up.values.numel(); ++i) {
    EXPECT_GE(r.matched.values[i], 0.0);
    EXPECT_GE(r.propagated.values[i], 0.0);
    EXPECT_LE(std::abs(r.matched.values[i] - up.values[i]), 4.0 + 1e-12);
  }
  // With one row of candidates the y component of the implied flow stays at 0.
  auto as_flow = as_two_channels(r.propagated);
  for (std::size_t i = 0; i < h * w; ++i) EXPECT_EQ(as_flow[2 * i + 1], 0.0);
}

TEST(RefineOnce, DepthIsRejected) {
  Shared s;
  DenseField coarse{FieldKind::kDepth, Tensor(Shape{8, 8, 1}, 1.0), 8};
  EXPECT_THROW(refine_once(Tensor(Shape{16, 16, 16}), Tensor(Shape{16, 16, 16}), coarse,
                           RefineConfig{}, s.attn, s.weights),
               ConfigError);
  RefineConfig even;
  even.window = 8;
  EXPECT_THROW(even.validate(), ConfigError);
}

TEST(RefineOnce, SharesTransformerWeights) {
  Shared s;
  std::mt19937_64 rng(6);
  const std::size_t before = s.params.size();
  auto f1 = random_tensor(Shape{16, 16, 16}, rng);
  auto f2 = random_tensor(Shape{16, 16, 16}, rng);
  DenseField coarse{FieldKind::kFlow, random_tensor(Shape{8, 8, 2}, rng), 8};
  Tape tape;
  Tensor loss;
  {
    Tape::Scope scope(tape);
    auto r = refine_once(f1, f2, coarse, RefineConfig{}, s.attn, s.weights);
    loss = sum(mul(r.propagated.values, random_tensor(Shape{16, 16, 2}, rng)));
  }
  EXPECT_EQ(s.params.size(), before);
  auto grads = gradients(tape, loss, s.params.tensors());
  Real total = 0;
  for (const auto& g : grads)
    for (Real v : g.values()) total += std::abs(v);
  EXPECT_GT(total, 0.0);
}

}  // namespace
}  // namespace unimatch
