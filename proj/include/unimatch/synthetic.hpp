#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "unimatch/field.hpp"
#include "unimatch/matching.hpp"
#include "unimatch/model.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

/// Smooth multi-octave value noise with three colour channels, defined on the
/// continuous plane and roughly within [-1, 1].
class Texture {
 public:
  explicit Texture(std::uint64_t seed, double cell = 16.0, int octaves = 4, double persistence = 0.7);
  void sample(double x, double y, Real* rgb) const;

 private:
  double lattice(long ix, long iy, int channel, int octave) const;
  std::uint64_t seed_;
  double cell_;
  int octaves_;
  double persistence_;
};

enum class FlowMotion { kTranslation, kAffine };

struct SyntheticConfig {
  std::size_t height = 64;
  std::size_t width = 64;
  FlowMotion motion = FlowMotion::kTranslation;
  double max_translation = 8.0;    // flow, pixels per axis
  double max_affine = 0.05;        // flow, bound on |A - I| entries
  double max_disparity = 12.0;     // stereo, pixels
  int max_layers = 3;              // stereo/depth foreground rectangles
  double focal = 48.0;             // depth, pixels
  double baseline = 0.1;           // depth, metres
  double d_min = 0.5, d_max = 10.0;
  int num_candidates = 64;
  double texture_cell = 16.0;        // coarsest noise period, pixels
  int texture_octaves = 4;           // each halves the period
  double texture_persistence = 0.7;  // amplitude ratio between octaves

  void validate() const;
};

struct SyntheticSample {
  Tensor img1, img2;  // [H x W x 3] in [-1, 1]
  DenseField gt;
  std::optional<CameraSetup> cam;
  std::uint64_t seed = 0;
};

/// `count` samples; sample i depends only on (task, seed, i, cfg).
std::vector<SyntheticSample> generate_synthetic(Task task, std::uint64_t seed, std::size_t count,
                                                const SyntheticConfig& cfg);

SyntheticSample generate_sample(Task task, std::uint64_t seed, const SyntheticConfig& cfg);

/// A flow sample with the given constant translation.
SyntheticSample translation_sample(std::uint64_t seed, double tx, double ty,
                                   const SyntheticConfig& cfg);

/// A depth sample showing a single fronto-parallel plane at `depth`.
SyntheticSample plane_sample(std::uint64_t seed, double depth, const SyntheticConfig& cfg);

}  // namespace unimatch
