#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"
#include "unimatch/propagation.hpp"

namespace unimatch {
namespace {

using testing::max_abs_diff;
using testing::max_gradient_error;
using testing::random_tensor;

// Explicit attention over the neighbourhood |dy|, |dx| <= radius (radius < 0: global).
Tensor propagate_oracle(const Tensor& f, const Tensor& v, int radius) {
  const long h = f.dim(0), w = f.dim(1), d = f.dim(2), c = v.dim(2);
  Tensor out(v.shape());
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x) {
      std::vector<std::pair<long, long double>> logits;
      long double mx = -1e300L;
      for (long yy = 0; yy < h; ++yy)
        for (long xx = 0; xx < w; ++xx) {
          if (radius >= 0 && (std::abs(yy - y) > radius || std::abs(xx - x) > radius)) continue;
          long double s = 0;
          for (long k = 0; k < d; ++k) s += (long double)f[(y * w + x) * d + k] * f[(yy * w + xx) * d + k];
          s /= std::sqrt((long double)d);
          logits.push_back({yy * w + xx, s});
          mx = std::max(mx, s);
        }
      long double z = 0;
      for (auto& [q, s] : logits) z += std::exp(s - mx);
      for (long ch = 0; ch < c; ++ch) {
        long double acc = 0;
        for (auto& [q, s] : logits) acc += std::exp(s - mx) / z * v[q * c + ch];
        out.data_mut()[(y * w + x) * c + ch] = static_cast<Real>(acc);
      }
    }
  return out;
}

UpsampleWeights random_weights(std::size_t h, std::size_t w, int r, std::mt19937_64& rng) {
  return normalize_upsample_weights(random_tensor(Shape{h, w, std::size_t(r * r * 9)}, rng, -3, 3), r);
}

TEST(Propagate, ConstantFieldIsFixed) {
  std::mt19937_64 rng(1);
  auto f = random_tensor(Shape{4, 4, 8}, rng, -2, 2);
  DenseField v{FieldKind::kFlow, Tensor(Shape{4, 4, 2}), 8};
  for (std::size_t i = 0; i < 16; ++i) {
    v.values.data_mut()[2 * i] = 1.25;
    v.values.data_mut()[2 * i + 1] = -3.5;
  }
  for (auto win : {PropagationWindow::kGlobal, PropagationWindow::kLocal3x3}) {
    auto out = propagate(f, v, win);
    EXPECT_EQ(out.kind, FieldKind::kFlow);
    EXPECT_EQ(out.stride, 8);
    EXPECT_LT(max_abs_diff(out.values, v.values), 1e-12);
  }
}

TEST(Propagate, SinglePixelUnchanged) {
  std::mt19937_64 rng(2);
  auto f = random_tensor(Shape{1, 1, 4}, rng);
  DenseField v{FieldKind::kDisparity, Tensor(Shape{1, 1, 1}, 2.5), 8};
  for (auto win : {PropagationWindow::kGlobal, PropagationWindow::kLocal3x3})
    EXPECT_DOUBLE_EQ(propagate(f, v, win).values[0], 2.5);
}

TEST(Propagate, MatchesOracle) {
  std::mt19937_64 rng(3);
  auto f = random_tensor(Shape{3, 3, 4}, rng, -2, 2);
  DenseField v{FieldKind::kFlow, random_tensor(Shape{3, 3, 2}, rng, -5, 5), 8};
  EXPECT_LT(max_abs_diff(propagate(f, v, PropagationWindow::kGlobal).values, propagate_oracle(f, v.values, -1)), 1e-10);
  auto f8 = random_tensor(Shape{6, 5, 8}, rng, -2, 2);
  DenseField v8{FieldKind::kFlow, random_tensor(Shape{6, 5, 2}, rng, -5, 5), 8};
  EXPECT_LT(max_abs_diff(propagate(f8, v8, PropagationWindow::kLocal3x3).values,
                         propagate_oracle(f8, v8.values, 1)),
            1e-10);
  EXPECT_LT(max_abs_diff(propagate(f8, v8, PropagationWindow::kGlobal).values,
                         propagate_oracle(f8, v8.values, -1)),
            1e-10);
}

TEST(Propagate, StaysInConvexHull) {
  std::mt19937_64 rng(4);
  auto f = random_tensor(Shape{5, 5, 6}, rng, -3, 3);
  DenseField v{FieldKind::kDepth, random_tensor(Shape{5, 5, 1}, rng, 0.5, 10), 8};
  const auto [lo, hi] = std::minmax_element(v.values.values().begin(), v.values.values().end());
  for (auto win : {PropagationWindow::kGlobal, PropagationWindow::kLocal3x3}) {
    const auto out = propagate(f, v, win);
    for (Real e : out.values.values()) {
      EXPECT_GE(e, *lo - 1e-12);
      EXPECT_LE(e, *hi + 1e-12);
    }
  }
}

TEST(Propagate, ExtentMismatch) {
  DenseField v{FieldKind::kFlow, Tensor(Shape{2, 3, 2}), 8};
  EXPECT_THROW(propagate(Tensor(Shape{3, 2, 4}), v, PropagationWindow::kGlobal), ContractError);
}

TEST(Propagate, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  auto f = random_tensor(Shape{3, 4, 4}, rng);
  auto v = random_tensor(Shape{3, 4, 2}, rng);
  auto w = random_tensor(Shape{3, 4, 2}, rng);
  for (auto win : {PropagationWindow::kGlobal, PropagationWindow::kLocal3x3}) {
    auto err = max_gradient_error({f, v}, [&](const std::vector<Tensor>& in) {
      return sum(mul(propagate(in[0], {FieldKind::kFlow, in[1], 8}, win).values, w));
    });
    EXPECT_LT(err, 1e-4);
  }
}

TEST(ConvexUpsample, ConstantFlowScales) {
  std::mt19937_64 rng(6);
  for (int r : {4, 8}) {
    DenseField v{FieldKind::kFlow, Tensor(Shape{3, 2, 2}), 8};
    for (std::size_t i = 0; i < 6; ++i) {
      v.values.data_mut()[2 * i] = 0.75;
      v.values.data_mut()[2 * i + 1] = -0.5;
    }
    auto out = convex_upsample(v, random_weights(3, 2, r, rng));
    EXPECT_EQ(out.values.shape(), (Shape{std::size_t(3 * r), std::size_t(2 * r), 2}));
    EXPECT_EQ(out.stride, 8 / r);
    for (std::size_t i = 0; i < out.values.numel() / 2; ++i) {
      EXPECT_NEAR(out.values[2 * i], 0.75 * r, 1e-12);
      EXPECT_NEAR(out.values[2 * i + 1], -0.5 * r, 1e-12);
    }
  }
}

TEST(ConvexUpsample, CentreWeightsReplicate) {
  std::mt19937_64 rng(7);
  const int r = 4;
  DenseField v{FieldKind::kDisparity, random_tensor(Shape{3, 3, 1}, rng, 0, 5), 8};
  Tensor w(Shape{3, 3, std::size_t(r * r * 9)});
  for (std::size_t g = 0; g < w.numel() / 9; ++g) w.data_mut()[g * 9 + 4] = 1;
  auto out = convex_upsample(v, {w, r});
  for (std::size_t y = 0; y < 12; ++y)
    for (std::size_t x = 0; x < 12; ++x)
      EXPECT_DOUBLE_EQ(out.values[y * 12 + x], r * v.values[(y / r) * 3 + x / r]);
}

TEST(ConvexUpsample, NeighbourLayout) {
  // All weight on neighbour (dy, dx) = (0, +1): fine pixels copy the right coarse neighbour.
  const int r = 4;
  DenseField v{FieldKind::kDepth, Tensor(Shape{1, 3, 1}, std::vector<Real>{1, 2, 3}), 8};
  Tensor w(Shape{1, 3, std::size_t(r * r * 9)});
  for (std::size_t g = 0; g < w.numel() / 9; ++g) w.data_mut()[g * 9 + 5] = 1;
  auto out = convex_upsample(v, {w, r});
  EXPECT_DOUBLE_EQ(out.values[0], 2.0);
  EXPECT_DOUBLE_EQ(out.values[4], 3.0);
  EXPECT_DOUBLE_EQ(out.values[8], 3.0);  // border neighbour replicated
}

TEST(ConvexUpsample, DepthIsNotScaledAndStaysBounded) {
  std::mt19937_64 rng(8);
  DenseField c{FieldKind::kDepth, Tensor(Shape{2, 2, 1}, 3.25), 8};
  const auto flat = convex_upsample(c, random_weights(2, 2, 8, rng));
  for (Real e : flat.values.values()) EXPECT_NEAR(e, 3.25, 1e-12);
  DenseField v{FieldKind::kDepth, random_tensor(Shape{4, 3, 1}, rng, 0.5, 10), 8};
  const auto up = convex_upsample(v, random_weights(4, 3, 4, rng));
  for (Real e : up.values.values()) {
    EXPECT_GE(e, 0.5 - 1e-12);
    EXPECT_LE(e, 10 + 1e-12);
  }
}

TEST(ConvexUpsample, PreservesNeighbourhoodBounds) {
  std::mt19937_64 rng(9);
  const int r = 4;
  DenseField v{FieldKind::kFlow, random_tensor(Shape{4, 5, 2}, rng, -3, 3), 8};
  auto out = convex_upsample(v, random_weights(4, 5, r, rng));
  for (long y = 0; y < 16; ++y)
    for (long x = 0; x < 20; ++x)
      for (long ch = 0; ch < 2; ++ch) {
        Real lo = 1e9, hi = -1e9;
        for (long dy = -1; dy <= 1; ++dy)
          for (long dx = -1; dx <= 1; ++dx) {
            const long yy = std::clamp(y / r + dy, 0L, 3L), xx = std::clamp(x / r + dx, 0L, 4L);
            lo = std::min(lo, r * v.values[(yy * 5 + xx) * 2 + ch]);
            hi = std::max(hi, r * v.values[(yy * 5 + xx) * 2 + ch]);
          }
        const Real e = out.values[(y * 20 + x) * 2 + ch];
        EXPECT_GE(e, lo - 1e-12);
        EXPECT_LE(e, hi + 1e-12);
      }
}

TEST(ConvexUpsample, RejectsUnnormalizedWeights) {
  DenseField v{FieldKind::kFlow, Tensor(Shape{2, 2, 2}), 8};
  EXPECT_THROW(convex_upsample(v, {Tensor(Shape{2, 2, 16 * 9}, 0.5), 4}), ContractError);
  EXPECT_THROW(convex_upsample(v, {Tensor(Shape{2, 2, 9}, 1.0 / 9), 1}), ConfigError);
}

TEST(ConvexUpsample, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(10);
  auto v = random_tensor(Shape{2, 3, 2}, rng);
  auto logits = random_tensor(Shape{2, 3, 16 * 9}, rng);
  auto probe = random_tensor(Shape{8, 12, 2}, rng);
  auto err = max_gradient_error({v, logits}, [&](const std::vector<Tensor>& in) {
    auto w = normalize_upsample_weights(in[1], 4);
    return sum(mul(convex_upsample({FieldKind::kFlow, in[0], 8}, w).values, probe));
  });
  EXPECT_LT(err, 1e-4);
}

TEST(UpsampleHead, ProducesNormalizedWeights) {
  ModelParams params;
  std::mt19937_64 rng(11);
  UpsampleHead head(8, 16, 8, params, rng);
  auto f = random_tensor(Shape{3, 4, 8}, rng);
  DenseField v{FieldKind::kDisparity, random_tensor(Shape{3, 4, 1}, rng, 0, 3), 8};
  auto w = head.weights(f, v);
  EXPECT_EQ(w.factor, 8);
  ASSERT_EQ(w.values.shape(), (Shape{3, 4, 64 * 9}));
  for (std::size_t g = 0; g < w.values.numel() / 9; ++g) {
    Real s = 0;
    for (int n = 0; n < 9; ++n) s += w.values[g * 9 + n];
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
  EXPECT_EQ(params.size(), 4u);
}

TEST(TwoChannels, Padding) {
  DenseField disp{FieldKind::kDisparity, Tensor(Shape{1, 1, 1}, 2.0), 8};
  DenseField depth{FieldKind::kDepth, Tensor(Shape{1, 1, 1}, 3.0), 8};
  auto a = as_two_channels(disp), b = as_two_channels(depth);
  EXPECT_EQ(a[0], -2.0);
  EXPECT_EQ(a[1], 0.0);
  EXPECT_EQ(b[0], 3.0);
  EXPECT_EQ(b[1], 0.0);
}

TEST(BilinearUpsample, IdentityAndConstants) {
  std::mt19937_64 rng(12);
  DenseField v{FieldKind::kFlow, random_tensor(Shape{3, 4, 2}, rng), 8};
  EXPECT_TRUE(testing::bitwise_equal(bilinear_upsample(v, 1).values, v.values));
  DenseField c{FieldKind::kDisparity, Tensor(Shape{3, 4, 1}, 1.5), 8};
  const auto doubled = bilinear_upsample(c, 2);
  for (Real e : doubled.values.values()) EXPECT_NEAR(e, 3.0, 1e-12);
  DenseField d{FieldKind::kDepth, Tensor(Shape{3, 4, 1}, 1.5), 8};
  auto up = bilinear_upsample(d, 8);
  EXPECT_EQ(up.values.shape(), (Shape{24, 32, 1}));
  EXPECT_EQ(up.stride, 1);
  for (Real e : up.values.values()) EXPECT_NEAR(e, 1.5, 1e-12);
}

TEST(BilinearUpsample, RampKeepsEndpoints) {
  const std::size_t w = 5;
  DenseField v{FieldKind::kDepth, Tensor(Shape{2, w, 1}), 4};
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t x = 0; x < w; ++x) v.values.data_mut()[y * w + x] = 1 + 0.5 * x;
  auto up = bilinear_upsample(v, 2);
  const std::size_t fw = 2 * w;
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < fw; ++x) {
      const Real src = Real(x) * Real(w - 1) / Real(fw - 1);
      EXPECT_NEAR(up.values[y * fw + x], 1 + 0.5 * src, 1e-6);
    }
  EXPECT_NEAR(up.values[0], 1.0, 1e-6);
  EXPECT_NEAR(up.values[fw - 1], 3.0, 1e-6);
}

}  // namespace
}  // namespace unimatch
