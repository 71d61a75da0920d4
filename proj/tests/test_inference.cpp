#include "test_util.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/inference.hpp"

namespace unimatch {
namespace {

using testing::bitwise_equal;
using testing::px;

ModelConfig small_model() {
  ModelConfig cfg;
  cfg.backbone.stem_channels = 6;
  cfg.backbone.stem_kernel = 3;
  cfg.backbone.blocks = {{8, 1}, {8, 2}};
  cfg.backbone.feature_dim = 8;
  cfg.num_blocks = 2;
  cfg.splits = 1;
  cfg.ffn_ratio = 2;
  cfg.upsample_hidden = 6;
  cfg.seed = 5;
  return cfg;
}

TEST(ReplicatePad, RepeatsLastRowAndColumn) {
  std::mt19937_64 rng(3);
  const Tensor img = testing::random_tensor({3, 5, 2}, rng);
  const Tensor p = replicate_pad(img, 4, 4);
  ASSERT_EQ(p.shape(), (Shape{4, 8, 2}));
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t c = 0; c < 2; ++c) {
        EXPECT_EQ(px(p, y, x, c), px(img, std::min<std::size_t>(y, 2), std::min<std::size_t>(x, 4), c));
      }
}

TEST(ReplicatePad, AlignedInputUnchanged) {
  std::mt19937_64 rng(4);
  const Tensor img = testing::random_tensor({8, 16, 3}, rng);
  EXPECT_TRUE(bitwise_equal(replicate_pad(img, 8, 8), img));
}

TEST(ReplicatePad, RejectsBadArguments) {
  EXPECT_THROW(replicate_pad(Tensor(Shape{0, 4, 3}), 8, 8), InputError);
  EXPECT_THROW(replicate_pad(Tensor(Shape{4, 4}), 8, 8), InputError);
  EXPECT_THROW(replicate_pad(Tensor(Shape{4, 4, 3}), 0, 8), ContractError);
}

TEST(CropField, KeepsTopLeftWindow) {
  std::mt19937_64 rng(5);
  const DenseField f{FieldKind::kFlow, testing::random_tensor({6, 7, 2}, rng), 1};
  const DenseField c = crop_field(f, 4, 3);
  ASSERT_EQ(c.values.shape(), (Shape{4, 3, 2}));
  EXPECT_EQ(c.kind, FieldKind::kFlow);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 3; ++x)
      for (std::size_t ch = 0; ch < 2; ++ch) EXPECT_EQ(px(c.values, y, x, ch), px(f.values, y, x, ch));
  EXPECT_THROW(crop_field(f, 7, 3), ContractError);
}

TEST(InferPadded, MatchesManualPadAndCrop) {
  const UniMatch model(small_model());
  std::mt19937_64 rng(6);
  const Tensor a = testing::random_tensor({13, 19, 3}, rng), b = testing::random_tensor({13, 19, 3}, rng);
  InferenceOptions opts;
  opts.bidirectional = true;
  const Prediction p = infer_padded(model, Task::kFlow, a, b, nullptr, opts);
  const auto [mh, mw] = model.config().input_multiple(Task::kFlow);
  const Prediction full = model.flow(replicate_pad(a, mh, mw), replicate_pad(b, mh, mw), opts);
  ASSERT_EQ(p.sequence.size(), full.sequence.size());
  for (std::size_t k = 0; k < p.sequence.size(); ++k) {
    EXPECT_EQ(p.sequence[k].values.shape(), (Shape{13, 19, 2}));
    EXPECT_TRUE(bitwise_equal(p.sequence[k].values, crop_field(full.sequence[k], 13, 19).values));
  }
  ASSERT_TRUE(p.backward.has_value());
  EXPECT_EQ(p.backward->values.shape(), (Shape{13, 19, 2}));
}

TEST(InferPadded, RejectsMismatchedImages) {
  const UniMatch model(small_model());
  EXPECT_THROW(infer_padded(model, Task::kFlow, Tensor(Shape{8, 8, 3}), Tensor(Shape{8, 9, 3})), InputError);
}

}  // namespace
}  // namespace unimatch
