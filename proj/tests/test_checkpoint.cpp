#include <cstdio>
#include <fstream>

#include "test_util.hpp"
#include "unimatch/checkpoint.hpp"
#include "unimatch/config.hpp"
#include "unimatch/errors.hpp"

namespace unimatch {
namespace {

ModelConfig small_model(std::uint64_t seed = 1) {
  ModelConfig c;
  c.backbone.stem_channels = 8;
  c.backbone.blocks = {{8, 1}, {16, 2}};
  c.backbone.feature_dim = 16;
  c.num_blocks = 2;
  c.upsample_hidden = 8;
  c.num_scales = 2;
  c.seed = seed;
  return c;
}

TEST(Checkpoint, RoundTripsBitwise) {
  const UniMatch model(small_model());
  const auto bytes = encode_checkpoint(make_checkpoint(model));
  const std::string path = ::testing::TempDir() + "roundtrip.ckpt";
  save_checkpoint(path, decode_checkpoint(bytes));
  const auto again = encode_checkpoint(load_checkpoint(path));
  EXPECT_EQ(again, bytes);
  std::remove(path.c_str());
}

TEST(Checkpoint, RestoresParametersIntoFreshModel) {
  const UniMatch source(small_model(1));
  UniMatch target(small_model(2));
  apply_checkpoint(make_checkpoint(source), target.params());
  for (std::size_t k = 0; k < source.params().size(); ++k) {
    const auto a = source.params().tensors()[k].values();
    const auto b = target.params().tensors()[k].values();
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(b[i], Real(static_cast<float>(a[i])));
  }
}

TEST(Checkpoint, TaskAgnosticParameterSet) {
  // One model object serves every task, so its registry cannot depend on the task.
  const UniMatch model(small_model());
  const Checkpoint ckpt = make_checkpoint(model);
  std::mt19937_64 rng(1);
  const Tensor a = testing::random_tensor({64, 64, 3}, rng), b = testing::random_tensor({64, 64, 3}, rng);
  const std::size_t count = model.params().scalar_count();
  model.flow(a, b);
  model.stereo(a, b);
  CameraSetup cam = CameraSetup::rectified(48, 31.5, 31.5, 0.1, 0.5, 10, 8);
  model.depth(a, b, cam);
  EXPECT_EQ(model.params().scalar_count(), count);
  UniMatch for_depth(small_model(5));
  EXPECT_NO_THROW(apply_checkpoint(ckpt, for_depth.params()));
}

TEST(Checkpoint, RejectsCorruption) {
  const UniMatch model(small_model());
  const auto bytes = encode_checkpoint(make_checkpoint(model));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), FormatError);
  auto bad_version = bytes;
  bad_version[8] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), FormatError);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  try {
    decode_checkpoint(truncated);
    FAIL() << "truncated checkpoint accepted";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.ckpt"), InputError);
}

TEST(Checkpoint, ReportsArchitectureMismatch) {
  const UniMatch model(small_model());
  ModelConfig other_cfg = small_model();
  other_cfg.backbone.feature_dim = 32;
  UniMatch other(other_cfg);
  EXPECT_THROW(apply_checkpoint(make_checkpoint(model), other.params()), FormatError);
}

TEST(KeyValues, ParsesCommentsAndTracksUse) {
  const auto kv = KeyValues::parse("# header\nsteps = 10  # inline\n lr=0.5\nflag = true\nname = a b\n");
  EXPECT_EQ(kv.get_int("steps", 0), 10);
  EXPECT_EQ(kv.get_double("lr", 0), 0.5);
  EXPECT_TRUE(kv.get_bool("flag", false));
  EXPECT_EQ(kv.get("missing", "dflt"), "dflt");
  ASSERT_EQ(kv.unused().size(), 1u);
  EXPECT_EQ(kv.unused()[0], "name");
  EXPECT_THROW(kv.reject_unused(), ConfigError);
  EXPECT_EQ(kv.get("name", ""), "a b");
  EXPECT_NO_THROW(kv.reject_unused());
}

TEST(KeyValues, RejectsMalformedInput) {
  EXPECT_THROW(KeyValues::parse("a = 1\na = 2\n"), ConfigError);
  EXPECT_THROW(KeyValues::parse("just words\n"), ConfigError);
  const auto kv = KeyValues::parse("n = ten\nx = 1.5z\nb = maybe\n");
  EXPECT_THROW(kv.get_int("n", 0), ConfigError);
  EXPECT_THROW(kv.get_double("x", 0), ConfigError);
  EXPECT_THROW(kv.get_bool("b", false), ConfigError);
  EXPECT_THROW(KeyValues::load("/nonexistent/cfg.txt"), InputError);
}

TEST(KeyValues, ModelConfigRoundTrip) {
  const ModelConfig cfg = ModelConfig::desk();
  KeyValues kv;
  write_model_config(cfg, kv);
  const ModelConfig back = read_model_config(KeyValues::parse(kv.str()), ModelConfig{});
  EXPECT_EQ(back.architecture(), cfg.architecture());
  EXPECT_EQ(back.fingerprint(), cfg.fingerprint());
  EXPECT_EQ(back.seed, cfg.seed);
  EXPECT_THROW(read_model_config(KeyValues::parse("backbone_blocks = 32:3\n"), cfg), ConfigError);
  EXPECT_THROW(read_model_config(KeyValues::parse("num_scales = 3\n"), cfg), ConfigError);
}

}  // namespace
}  // namespace unimatch
