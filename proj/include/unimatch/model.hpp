#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "unimatch/attention.hpp"
#include "unimatch/backbone.hpp"
#include "unimatch/field.hpp"
#include "unimatch/matching.hpp"
#include "unimatch/numerics/params.hpp"
#include "unimatch/propagation.hpp"
#include "unimatch/refinement.hpp"

namespace unimatch {

enum class Task { kFlow, kStereo, kDepth };

std::string to_string(Task task);
Task parse_task(const std::string& name);
FieldKind field_kind(Task task);

struct ModelConfig {
  BackboneConfig backbone;
  int num_blocks = 6;
  int splits = 2;
  int ffn_ratio = 4;
  int num_scales = 1;  // 2 adds hierarchical refinement at 1/4 resolution
  RefineConfig refine;
  int upsample_hidden = 256;
  std::uint64_t seed = 0;

  int feature_dim() const { return backbone.feature_dim; }
  /// Factor of the convex upsampler: 8 from 1/8, or 4 from 1/4 with two scales.
  int upsample_factor() const { return num_scales == 2 ? 4 : 8; }
  /// Small configuration used for training on synthetic data.
  static ModelConfig desk();

  void validate() const;
  /// Canonical text of every architecture setting (excludes the seed).
  std::string architecture() const;
  /// FNV-1a hash of architecture().
  std::uint64_t fingerprint() const;
  /// Input extents (height, width) must be multiples of these for `task`.
  std::pair<std::size_t, std::size_t> input_multiple(Task task) const;
};

struct InferenceOptions {
  bool refine = true;          // use the 1/4 stage when the model has two scales
  bool bidirectional = false;  // flow only: also predict image 2 -> image 1
};

struct Prediction {
  /// Every intermediate prediction at full resolution, coarse to fine; the
  /// last entry is the output.
  std::vector<DenseField> sequence;
  std::optional<DenseField> backward;

  const DenseField& final() const { return sequence.back(); }
};

/// Shared feature pipeline with the three parameter-free matching heads.
class UniMatch {
 public:
  explicit UniMatch(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  ModelParams& params() { return params_; }
  const ModelParams& params() const { return params_; }

  Prediction flow(const Tensor& img1, const Tensor& img2, const InferenceOptions& opts = {}) const;
  Prediction stereo(const Tensor& img1, const Tensor& img2, const InferenceOptions& opts = {}) const;
  /// `cam` holds intrinsics at image resolution.
  Prediction depth(const Tensor& img1, const Tensor& img2, const CameraSetup& cam) const;

  /// Dispatch by task; `cam` is required for depth.
  Prediction run(Task task, const Tensor& img1, const Tensor& img2, const CameraSetup* cam,
                 const InferenceOptions& opts = {}) const;

 private:
  struct Features {
    Tensor f1, f2;                   // enhanced 1/8
    std::optional<Tensor> q1, q2;    // backbone 1/4
  };

  Features features(const Tensor& img1, const Tensor& img2, AttentionMode mode, bool quarter,
                    Task task) const;
  void finish(const Tensor& f1, const Tensor* q1, const Tensor* q2, DenseField matched,
              bool refine, AttentionMode mode, std::vector<DenseField>& seq) const;
  AttentionConfig attention(AttentionMode mode) const;

  ModelConfig cfg_;
  ModelParams params_;
  std::unique_ptr<Backbone> backbone_;
  TransformerWeights transformer_;
  std::unique_ptr<UpsampleHead> upsampler_;
};

}  // namespace unimatch
