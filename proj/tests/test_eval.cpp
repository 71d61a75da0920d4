#include <cstring>
#include <nlohmann/json.hpp>

#include "test_util.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/io.hpp"
#include "unimatch/metrics.hpp"

namespace unimatch {
namespace {

using testing::bitwise_equal;

// Repeats `value` over the elements of an [h x w x channels(kind)] field.
DenseField constant(FieldKind kind, std::size_t h, std::size_t w, std::vector<Real> value) {
  DenseField f{kind, Tensor(Shape{h, w, field_channels(kind)}), 1};
  auto v = f.values.values_mut();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = value[i % value.size()];
  return f;
}

DenseField random_field(FieldKind kind, std::size_t h, std::size_t w, std::mt19937_64& rng, Real lo, Real hi) {
  return {kind, testing::random_tensor({h, w, field_channels(kind)}, rng, lo, hi), 1};
}

// Values on a grid the codec represents exactly.
DenseField quantized(DenseField f, double step) {
  for (auto& v : f.values.values_mut()) v = std::round(v / step) * step;
  return f;
}

TEST(Metrics, PerfectPredictionIsZero) {
  std::mt19937_64 rng(1);
  for (FieldKind kind : {FieldKind::kFlow, FieldKind::kDisparity, FieldKind::kDepth}) {
    const DenseField gt = random_field(kind, 6, 7, rng, 0.5, 50);
    const auto r = compute_metrics(gt, gt);
    EXPECT_FALSE(r.empty);
    EXPECT_EQ(r.valid_count, 42u);
    EXPECT_EQ(r.epe, 0.0);
    EXPECT_EQ(r.outlier_percent, 0.0);
    EXPECT_EQ(r.abs_rel, 0.0);
    EXPECT_EQ(r.sq_rel, 0.0);
    EXPECT_EQ(r.rmse, 0.0);
    EXPECT_EQ(r.rmse_log, 0.0);
  }
}

TEST(Metrics, ThreeFourFive) {
  const auto r = compute_metrics(constant(FieldKind::kFlow, 1, 1, {3, 4}), constant(FieldKind::kFlow, 1, 1, {0, 0}));
  EXPECT_DOUBLE_EQ(r.epe, 5.0);
  EXPECT_EQ(r.s0_10.count, 1u);
  EXPECT_DOUBLE_EQ(r.s0_10.epe, 5.0);
  EXPECT_EQ(r.s10_40.count + r.s40_plus.count, 0u);
  EXPECT_EQ(r.outlier_percent, 100.0);
}

TEST(Metrics, DepthFormulas) {
  const auto r = compute_metrics(constant(FieldKind::kDepth, 1, 1, {2}), constant(FieldKind::kDepth, 1, 1, {1}));
  EXPECT_DOUBLE_EQ(r.abs_rel, 1.0);
  EXPECT_DOUBLE_EQ(r.sq_rel, 1.0);
  EXPECT_DOUBLE_EQ(r.rmse, 1.0);
  EXPECT_NEAR(r.rmse_log, 0.6931, 1e-4);
  EXPECT_DOUBLE_EQ(r.rmse_log, std::log(2.0));
}

TEST(Metrics, OutlierNeedsBothThresholds) {
  // Error 4 px: outlier for |gt| = 20 (4 > 1), not for |gt| = 100 (4 < 5).
  DenseField gt = constant(FieldKind::kDisparity, 1, 2, {20, 100});
  DenseField pred = constant(FieldKind::kDisparity, 1, 2, {24, 104});
  EXPECT_DOUBLE_EQ(compute_metrics(pred, gt).outlier_percent, 50.0);
  // Error 2 px is never an outlier.
  pred = constant(FieldKind::kDisparity, 1, 2, {22, 102});
  EXPECT_DOUBLE_EQ(compute_metrics(pred, gt).outlier_percent, 0.0);
}

TEST(Metrics, BucketsPartitionAndAverageExactly) {
  std::mt19937_64 rng(2);
  const DenseField gt = random_field(FieldKind::kFlow, 16, 16, rng, -45, 45);
  const DenseField pred = random_field(FieldKind::kFlow, 16, 16, rng, -45, 45);
  std::vector<std::uint8_t> valid(256);
  for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = i % 7 != 0;
  const auto r = compute_metrics(pred, gt, valid);
  const auto n = r.s0_10.count + r.s10_40.count + r.s40_plus.count;
  EXPECT_EQ(n, r.valid_count);
  EXPECT_GT(r.s0_10.count, 0u);
  EXPECT_GT(r.s10_40.count, 0u);
  EXPECT_GT(r.s40_plus.count, 0u);
  const double weighted = (r.s0_10.epe * r.s0_10.count + r.s10_40.epe * r.s10_40.count +
                           r.s40_plus.epe * r.s40_plus.count) / static_cast<double>(n);
  EXPECT_NEAR(r.epe, weighted, 1e-12);
  for (double v : {r.epe, r.outlier_percent, r.s0_10.epe, r.s10_40.epe, r.s40_plus.epe}) EXPECT_GE(v, 0.0);
}

TEST(Metrics, EmptyMaskGivesEmptyReport) {
  const DenseField f = constant(FieldKind::kFlow, 2, 2, {1, 1});
  const std::vector<std::uint8_t> none(4, 0);
  const auto r = compute_metrics(f, f, none);
  EXPECT_TRUE(r.empty);
  EXPECT_EQ(r.valid_count, 0u);
  EXPECT_FALSE(std::isnan(r.epe));
  const auto json = nlohmann::json::parse(r.to_json());
  EXPECT_TRUE(json.at("epe").is_null());
  EXPECT_THROW(compute_metrics(f, constant(FieldKind::kFlow, 2, 3, {0, 0})), ContractError);
}

TEST(Metrics, JsonFields) {
  const auto r = compute_metrics(constant(FieldKind::kFlow, 1, 1, {3, 4}), constant(FieldKind::kFlow, 1, 1, {0, 0}));
  const auto json = nlohmann::json::parse(r.to_json());
  EXPECT_EQ(json.at("epe").get<double>(), 5.0);
  EXPECT_EQ(json.at("f1_all").get<double>(), 100.0);
  EXPECT_EQ(json.at("s0-10").at("epe").get<double>(), 5.0);
  EXPECT_EQ(json.at("s0-10").at("count").get<int>(), 1);
  EXPECT_TRUE(json.at("s10-40").at("epe").is_null());
  EXPECT_EQ(json.at("valid_count").get<int>(), 1);
}

TEST(Occlusion, ZeroFieldsAreConsistent) {
  const DenseField z = constant(FieldKind::kFlow, 8, 8, {0, 0});
  for (auto m : occlusion_mask(z, z)) EXPECT_EQ(m, 0);
}

TEST(Occlusion, SameDirectionIsInconsistent) {
  const std::size_t h = 8, w = 24;
  const DenseField f = constant(FieldKind::kFlow, h, w, {10, 0});
  const auto mask = occlusion_mask(f, f);
  // Targets x + 10 stay inside for x < w - 10.
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x + 10 < w - 1; ++x) EXPECT_EQ(mask[y * w + x], 1) << x;
}

TEST(Occlusion, OppositeDirectionIsConsistent) {
  const std::size_t h = 8, w = 24;
  const auto mask = occlusion_mask(constant(FieldKind::kFlow, h, w, {5, 0}), constant(FieldKind::kFlow, h, w, {-5, 0}));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x + 5 < w - 1; ++x) EXPECT_EQ(mask[y * w + x], 0) << x;
}

TEST(Flo, SinglePixelByteLayout) {
  // Magic, width, height, u, v: five 4-byte words.
  const Bytes bytes = encode_flo(constant(FieldKind::kFlow, 1, 1, {1.5, -2}));
  ASSERT_EQ(bytes.size(), 20u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "PIEH");
  float magic, u, v;
  std::int32_t w, h;
  std::memcpy(&magic, bytes.data(), 4);
  std::memcpy(&w, bytes.data() + 4, 4);
  std::memcpy(&h, bytes.data() + 8, 4);
  std::memcpy(&u, bytes.data() + 12, 4);
  std::memcpy(&v, bytes.data() + 16, 4);
  EXPECT_EQ(magic, 202021.25f);
  EXPECT_EQ(w, 1);
  EXPECT_EQ(h, 1);
  EXPECT_EQ(u, 1.5f);
  EXPECT_EQ(v, -2.0f);
}

TEST(Flo, RoundTripBitwise) {
  std::mt19937_64 rng(3);
  DenseField f = random_field(FieldKind::kFlow, 5, 9, rng, -30, 30);
  for (auto& v : f.values.values_mut()) v = static_cast<float>(v);
  const Bytes bytes = encode_flo(f);
  const DenseField back = decode_flo(bytes);
  EXPECT_TRUE(bitwise_equal(back.values, f.values));
  EXPECT_EQ(encode_flo(back), bytes);
}

TEST(Flo, RejectsBadInput) {
  Bytes bytes = encode_flo(constant(FieldKind::kFlow, 2, 2, {0, 0}));
  Bytes bad = bytes;
  bad[0] ^= 1;
  EXPECT_THROW(decode_flo(bad), FormatError);
  bad = bytes;
  bad.pop_back();
  try {
    decode_flo(bad);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  EXPECT_THROW(encode_flo(constant(FieldKind::kDisparity, 1, 1, {1})), ContractError);
}

TEST(KittiFlow, ZeroEncodesAsOffset) {
  const Bytes png = encode_kitti_flow(constant(FieldKind::kFlow, 1, 1, {0, 0}));
  // Decode through the codec, then check the raw channel value it implies.
  const auto back = decode_kitti_flow(png);
  EXPECT_EQ(back.field.values[0], 0.0);
  EXPECT_EQ(back.valid[0], 1);
  const auto shifted = decode_kitti_flow(encode_kitti_flow(constant(FieldKind::kFlow, 1, 1, {1.0 / 64, 0})));
  EXPECT_EQ(shifted.field.values[0], 1.0 / 64);
}

TEST(KittiFlow, RoundTripWithMask) {
  std::mt19937_64 rng(4);
  const DenseField f = quantized(random_field(FieldKind::kFlow, 6, 10, rng, -200, 200), 1.0 / 64);
  std::vector<std::uint8_t> valid(60);
  for (std::size_t i = 0; i < 60; ++i) valid[i] = (i * 7) % 3 != 0;
  const Bytes png = encode_kitti_flow(f, valid);
  const auto back = decode_kitti_flow(png);
  EXPECT_TRUE(bitwise_equal(back.field.values, f.values));
  EXPECT_EQ(back.valid, valid);
  EXPECT_EQ(encode_kitti_flow(back.field, back.valid), png);
}

TEST(KittiDisparity, RoundTrip) {
  std::mt19937_64 rng(5);
  const DenseField f = quantized(random_field(FieldKind::kDisparity, 7, 5, rng, 0.01, 250), 1.0 / 256);
  const auto back = decode_kitti_disparity(encode_kitti_disparity(f));
  EXPECT_TRUE(bitwise_equal(back.field.values, f.values));
}

TEST(DepthPng, MillimetreRoundTrip) {
  std::mt19937_64 rng(6);
  const DenseField f = quantized(random_field(FieldKind::kDepth, 4, 6, rng, 0.5, 10), 0.001);
  const auto back = decode_depth_png(encode_depth_png(f));
  EXPECT_LT(testing::max_abs_diff(back.field.values, f.values), 1e-12);
  EXPECT_EQ(encode_depth_png(back.field), encode_depth_png(f));
  for (auto v : back.valid) EXPECT_EQ(v, 1);
  const auto one = decode_depth_png(encode_depth_png(constant(FieldKind::kDepth, 1, 1, {1.234})));
  EXPECT_DOUBLE_EQ(one.field.values[0], 1.234);
}

TEST(Pfm, BottomUpLittleEndian) {
  DenseField f = constant(FieldKind::kDisparity, 2, 1, {1});
  f.values.values_mut()[0] = 1.0;  // top row
  f.values.values_mut()[1] = 2.0;  // bottom row
  const Bytes bytes = encode_pfm(f);
  const std::string header = "Pf\n1 2\n-1\n";
  ASSERT_EQ(bytes.size(), header.size() + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + header.size()), header);
  float first;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  EXPECT_EQ(first, 2.0f);
  EXPECT_TRUE(bitwise_equal(decode_pfm(bytes, FieldKind::kDisparity).values, f.values));
}

TEST(Pfm, RoundTripAndBigEndian) {
  std::mt19937_64 rng(7);
  DenseField f = random_field(FieldKind::kDepth, 5, 3, rng, 0.5, 10);
  for (auto& v : f.values.values_mut()) v = static_cast<float>(v);
  const Bytes bytes = encode_pfm(f);
  EXPECT_EQ(encode_pfm(decode_pfm(bytes, FieldKind::kDepth)), bytes);
  // Same data written big-endian with a positive scale.
  const std::string header = "Pf\n3 5\n-1\n";
  Bytes big(bytes);
  big[header.size() - 3] = ' ';
  for (std::size_t i = header.size(); i < big.size(); i += 4) std::reverse(big.begin() + i, big.begin() + i + 4);
  EXPECT_TRUE(bitwise_equal(decode_pfm(big, FieldKind::kDepth).values, f.values));
  Bytes bad = bytes;
  bad[1] = 'F';
  EXPECT_THROW(decode_pfm(bad, FieldKind::kDepth), FormatError);
  bad = bytes;
  bad.resize(bad.size() - 1);
  EXPECT_THROW(decode_pfm(bad, FieldKind::kDepth), FormatError);
}

TEST(Image, RoundTripOnByteGrid) {
  std::mt19937_64 rng(8);
  Tensor img = testing::random_tensor({5, 7, 3}, rng);
  for (auto& v : img.values_mut()) v = std::round((v + 1) / 2 * 255) / 255 * 2 - 1;
  const Bytes png = encode_image(img);
  const Tensor back = decode_image(png);
  EXPECT_TRUE(bitwise_equal(back, img));
  EXPECT_EQ(encode_image(back), png);
}

TEST(Image, RejectsNonPng) {
  const Bytes junk{'n', 'o', 't', ' ', 'a', ' ', 'p', 'n', 'g'};
  try {
    decode_image(junk);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset 0"), std::string::npos);
  }
  Bytes truncated = encode_image(Tensor(Shape{4, 4, 3}));
  truncated.resize(truncated.size() / 2);
  EXPECT_THROW(decode_image(truncated), FormatError);
  EXPECT_THROW(decode_kitti_flow(encode_image(Tensor(Shape{4, 4, 3}))), FormatError);
}

TEST(Mask, RoundTrip) {
  const std::vector<std::uint8_t> mask{0, 1, 1, 0, 0, 1};
  std::size_t h = 0, w = 0;
  EXPECT_EQ(decode_mask(encode_mask(mask, 2, 3), &h, &w), mask);
  EXPECT_EQ(h, 2u);
  EXPECT_EQ(w, 3u);
}

TEST(Cameras, RoundTripExact) {
  CameraSetup cam = CameraSetup::rectified(48.123456789, 31.5, 30.25, 0.1, 0.5, 10, 32);
  const CameraSetup back = parse_cameras(format_cameras(cam));
  EXPECT_EQ(back.k1, cam.k1);
  EXPECT_EQ(back.e2, cam.e2);
  EXPECT_EQ(back.d_min, cam.d_min);
  EXPECT_EQ(back.num_candidates, 32);
  EXPECT_EQ(format_cameras(back), format_cameras(cam));
}

TEST(Cameras, RejectsMalformed) {
  EXPECT_THROW(parse_cameras("1 2 3"), FormatError);
  std::string text = format_cameras(CameraSetup::rectified(48, 31.5, 31.5, 0.1, 0.5, 10, 8));
  EXPECT_THROW(parse_cameras(text + " x"), FormatError);
  // A non-rigid extrinsic fails validation.
  CameraSetup cam = CameraSetup::rectified(48, 31.5, 31.5, 0.1, 0.5, 10, 8);
  cam.e1[0] = 2;
  EXPECT_THROW(parse_cameras(format_cameras(cam)), ConfigError);
}

TEST(Files, DispatchByExtension) {
  std::mt19937_64 rng(9);
  const std::string dir = ::testing::TempDir();
  DenseField flow = random_field(FieldKind::kFlow, 3, 4, rng, -5, 5);
  for (auto& v : flow.values.values_mut()) v = static_cast<float>(v);
  write_field(dir + "f.flo", flow);
  EXPECT_TRUE(bitwise_equal(read_field(dir + "f.flo", FieldKind::kFlow).field.values, flow.values));
  DenseField disp = quantized(random_field(FieldKind::kDisparity, 3, 4, rng, 1, 5), 1.0 / 256);
  write_field(dir + "d.pfm", disp);
  EXPECT_TRUE(bitwise_equal(read_field(dir + "d.pfm", FieldKind::kDisparity).field.values, disp.values));
  write_field(dir + "d.png", disp);
  EXPECT_TRUE(bitwise_equal(read_field(dir + "d.png", FieldKind::kDisparity).field.values, disp.values));
  EXPECT_THROW(write_field(dir + "f.txt", flow), InputError);
  EXPECT_THROW(read_field(dir + "missing.flo", FieldKind::kFlow), InputError);
}

}  // namespace
}  // namespace unimatch
