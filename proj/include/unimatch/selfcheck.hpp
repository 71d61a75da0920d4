#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace unimatch {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0;
};

/// Correlation, attention, propagation, convolution and bilinear sampling
/// against brute-force sums on random inputs up to 8x8x8; max error < 1e-10.
CheckResult check_primitive_oracles(std::uint64_t seed, int trials = 20);

/// Analytic vs extrapolated central-difference gradients of a small flow model on a
/// 16x16 input at `probes` random parameters; relative error < 1e-4.
CheckResult check_pipeline_gradients(std::uint64_t seed, int probes = 100);

/// Matching distributions and upsampling weight groups sum to one within
/// 1e-6; disparity >= 0 and depth within range, over `trials` random inputs.
CheckResult check_normalization(std::uint64_t seed, int trials = 1000);

/// Backward flow from the transposed volume equals forward flow on swapped
/// inputs within 1e-6, at the matching stage and for the full model.
CheckResult check_bidirectional(std::uint64_t seed, int pairs = 50);

/// Plane-sweep warp against the rectified pinhole formula (1e-9) and depth
/// matching against disparity matching within one inverse-depth bin.
CheckResult check_geometry(std::uint64_t seed, int configs = 10);

/// Every field codec round-trips bitwise on random data.
CheckResult check_codecs(std::uint64_t seed);

/// All of the above with their default sizes.
std::vector<CheckResult> run_selfcheck(std::uint64_t seed);

}  // namespace unimatch
