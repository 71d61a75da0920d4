#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unimatch/field.hpp"

namespace unimatch {

struct BucketEpe {
  double epe = 0;
  std::size_t count = 0;
};

/// Error statistics over valid pixels. `empty` marks a report with no valid
/// pixels, in which case every statistic is left at zero.
struct MetricReport {
  FieldKind kind = FieldKind::kFlow;
  std::size_t valid_count = 0;
  bool empty = true;
  // Flow and disparity.
  double epe = 0;
  double outlier_percent = 0;  // F1-all (flow) or D1-all (disparity)
  BucketEpe s0_10, s10_40, s40_plus;
  // Depth.
  double abs_rel = 0, sq_rel = 0, rmse = 0, rmse_log = 0;

  std::string to_json() const;
};

/// `valid` has one flag per pixel; empty means every pixel is valid.
MetricReport compute_metrics(const DenseField& pred, const DenseField& gt,
                             std::span<const std::uint8_t> valid = {});

struct OcclusionThresholds {
  double alpha1 = 0.01;
  double alpha2 = 0.5;
};

/// Forward-backward check: pixel p is occluded when
/// |Vf(p) + Vb(p + Vf(p))|^2 > alpha1 (|Vf(p)|^2 + |Vb(p + Vf(p))|^2) + alpha2,
/// with Vb sampled bilinearly (zero outside the image). 1 = occluded.
std::vector<std::uint8_t> occlusion_mask(const DenseField& forward, const DenseField& backward,
                                         const OcclusionThresholds& t = {});

}  // namespace unimatch
