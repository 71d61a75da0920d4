#include "unimatch/model.hpp"

#include <algorithm>
#include <random>
#include <sstream>

#include "unimatch/errors.hpp"

namespace unimatch {

std::string to_string(Task task) {
  switch (task) {
    case Task::kFlow:
      return "flow";
    case Task::kStereo:
      return "stereo";
    case Task::kDepth:
      return "depth";
  }
  return "unknown";
}

Task parse_task(const std::string& name) {
  if (name == "flow") return Task::kFlow;
  if (name == "stereo") return Task::kStereo;
  if (name == "depth") return Task::kDepth;
  throw ConfigError("unknown task '" + name + "' (expected flow, stereo or depth)");
}

FieldKind field_kind(Task task) {
  switch (task) {
    case Task::kFlow:
      return FieldKind::kFlow;
    case Task::kStereo:
      return FieldKind::kDisparity;
    case Task::kDepth:
      return FieldKind::kDepth;
  }
  return FieldKind::kFlow;
}

ModelConfig ModelConfig::desk() {
  ModelConfig cfg;
  cfg.backbone.stem_channels = 32;
  cfg.backbone.blocks = {{32, 1}, {32, 1}, {48, 2}, {48, 1}, {64, 1}, {64, 1}};
  cfg.backbone.feature_dim = 64;
  cfg.num_blocks = 4;
  cfg.num_scales = 2;
  cfg.upsample_hidden = 64;
  return cfg;
}

void ModelConfig::validate() const {
  backbone.validate();
  refine.validate();
  if (feature_dim() % 4 != 0) throw ConfigError("feature dimension must be divisible by 4");
  if (num_blocks < 0) throw ConfigError("num_blocks must be >= 0");
  if (splits < 1) throw ConfigError("splits must be >= 1");
  if (ffn_ratio < 1) throw ConfigError("ffn_ratio must be >= 1");
  if (num_scales != 1 && num_scales != 2) throw ConfigError("num_scales must be 1 or 2");
  if (upsample_hidden < 1) throw ConfigError("upsample_hidden must be positive");
}

std::string ModelConfig::architecture() const {
  std::ostringstream os;
  os << "stem=" << backbone.stem_channels << "k" << backbone.stem_kernel << ";blocks=";
  for (std::size_t i = 0; i < backbone.blocks.size(); ++i) {
    os << (i ? "," : "") << backbone.blocks[i].channels << "s" << backbone.blocks[i].stride;
  }
  os << ";dim=" << feature_dim() << ";transformer=" << num_blocks << "x" << ffn_ratio
     << ";splits=" << splits << ";scales=" << num_scales << ";refine=" << refine.window << "/"
     << refine.splits << ";upsampler=" << upsample_hidden << "x" << upsample_factor();
  return os.str();
}

std::uint64_t ModelConfig::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : architecture()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::pair<std::size_t, std::size_t> ModelConfig::input_multiple(Task task) const {
  // Window extents must divide evenly, twice over when shifted blocks exist.
  const std::size_t shift = num_blocks >= 2 ? 2 : 1;
  const std::size_t coarse = 8 * static_cast<std::size_t>(splits) * shift;
  std::size_t mh = coarse, mw = coarse;
  if (task == Task::kStereo) mh = 8;
  if (num_scales == 2 && task != Task::kDepth) {
    const std::size_t fine = 4 * static_cast<std::size_t>(refine.splits) * shift;
    mw = std::max(mw, fine);
    if (task == Task::kFlow) mh = std::max(mh, fine);
  }
  auto lcm = [](std::size_t a, std::size_t b) {
    std::size_t x = a, y = b;
    while (y) x = std::exchange(y, x % y);
    return a / x * b;
  };
  return {lcm(mh, 8), lcm(mw, 8)};
}

UniMatch::UniMatch(const ModelConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(cfg_.seed);
  backbone_ = std::make_unique<Backbone>(cfg_.backbone, params_, rng);
  transformer_ =
      TransformerWeights::create(cfg_.num_blocks, cfg_.feature_dim(), cfg_.ffn_ratio, params_, rng);
  upsampler_ = std::make_unique<UpsampleHead>(cfg_.feature_dim(), cfg_.upsample_hidden,
                                              cfg_.upsample_factor(), params_, rng);
}

AttentionConfig UniMatch::attention(AttentionMode mode) const {
  return {cfg_.num_blocks, cfg_.splits, mode, cfg_.feature_dim()};
}

UniMatch::Features UniMatch::features(const Tensor& img1, const Tensor& img2, AttentionMode mode,
                                      bool quarter, Task task) const {
  const auto [mh, mw] = cfg_.input_multiple(task);
  if (img1.rank() != 3 || img1.dim(0) % mh != 0 || img1.dim(1) % mw != 0) {
    throw InputError("input " + shape_str(img1.shape()) + " must have extents that are multiples of " +
                     std::to_string(mh) + " x " + std::to_string(mw) + " for " + to_string(task));
  }
  auto [p1, p2] = backbone_->extract(img1, img2, quarter);
  auto [f1, f2] = enhance(p1.f8, p2.f8, attention(mode), transformer_);
  return {f1, f2, p1.f4, p2.f4};
}

void UniMatch::finish(const Tensor& f1, const Tensor* q1, const Tensor* q2, DenseField matched,
                      bool refine, AttentionMode mode, std::vector<DenseField>& seq) const {
  matched.stride = 8;
  seq.push_back(bilinear_upsample(matched, 8));
  DenseField prop = propagate(f1, matched, PropagationWindow::kGlobal);
  if (cfg_.num_scales == 1) {
    seq.push_back(convex_upsample(prop, upsampler_->weights(f1, prop)));
    return;
  }
  seq.push_back(bilinear_upsample(prop, 8));
  if (!refine || matched.kind == FieldKind::kDepth) return;
  auto r = refine_once(*q1, *q2, prop, cfg_.refine, attention(mode), transformer_);
  seq.push_back(bilinear_upsample(r.matched, 4));
  seq.push_back(convex_upsample(r.propagated, upsampler_->weights(r.f1, r.propagated)));
}

Prediction UniMatch::flow(const Tensor& img1, const Tensor& img2,
                          const InferenceOptions& opts) const {
  const bool refine = opts.refine && cfg_.num_scales == 2;
  Features f = features(img1, img2, AttentionMode::kPlanar2D, refine, Task::kFlow);
  const CorrelationVolume corr = flow_correlation(f.f1, f.f2);
  Prediction out;
  finish(f.f1, refine ? &*f.q1 : nullptr, refine ? &*f.q2 : nullptr, flow_from_correlation(corr),
         refine, AttentionMode::kPlanar2D, out.sequence);
  if (opts.bidirectional) {
    std::vector<DenseField> back;
    finish(f.f2, refine ? &*f.q2 : nullptr, refine ? &*f.q1 : nullptr, backward_flow(corr), refine,
           AttentionMode::kPlanar2D, back);
    out.backward = back.back();
  }
  return out;
}

Prediction UniMatch::stereo(const Tensor& img1, const Tensor& img2,
                            const InferenceOptions& opts) const {
  const bool refine = opts.refine && cfg_.num_scales == 2;
  Features f = features(img1, img2, AttentionMode::kHorizontal1D, refine, Task::kStereo);
  Prediction out;
  finish(f.f1, refine ? &*f.q1 : nullptr, refine ? &*f.q2 : nullptr, disparity_match(f.f1, f.f2),
         refine, AttentionMode::kHorizontal1D, out.sequence);
  return out;
}

Prediction UniMatch::depth(const Tensor& img1, const Tensor& img2, const CameraSetup& cam) const {
  cam.validate();
  Features f = features(img1, img2, AttentionMode::kPlanar2D, false, Task::kDepth);
  Prediction out;
  finish(f.f1, nullptr, nullptr, depth_match(f.f1, f.f2, cam.scaled(0.125)), false,
         AttentionMode::kPlanar2D, out.sequence);
  return out;
}

Prediction UniMatch::run(Task task, const Tensor& img1, const Tensor& img2, const CameraSetup* cam,
                         const InferenceOptions& opts) const {
  switch (task) {
    case Task::kFlow:
      return flow(img1, img2, opts);
    case Task::kStereo:
      return stereo(img1, img2, opts);
    case Task::kDepth:
      if (!cam) throw InputError("depth inference requires a camera setup");
      return depth(img1, img2, *cam);
  }
  throw ConfigError("unknown task");
}

}  // namespace unimatch
