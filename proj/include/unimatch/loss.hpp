#pragma once

#include <span>

#include "unimatch/field.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

struct LossConfig {
  FieldKind kind = FieldKind::kFlow;
  double gamma = 0.9;
  double smooth_l1_beta = 1.0;
  double inverse_depth_weight = 20.0;
  double gradient_weight = 20.0;

  void validate() const;
};

/// Per-prediction loss: mean L1 (flow), mean smooth L1 (disparity), or the
/// weighted sum of inverse-depth L1 and forward-difference gradient L1 (depth).
Tensor prediction_loss(const DenseField& pred, const DenseField& gt, const LossConfig& cfg);

/// sum_i gamma^(N - i) * loss(pred_i, gt) over the sequence i = 1..N.
Tensor sequence_loss(std::span<const DenseField> preds, const DenseField& gt, const LossConfig& cfg);

}  // namespace unimatch
