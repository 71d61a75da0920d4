#include "unimatch/loss.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "unimatch/errors.hpp"
#include "unimatch/numerics/ops.hpp"

namespace unimatch {
namespace {

// Mean |d/dx| and |d/dy| differences between two [H x W x 1] maps.
Tensor gradient_l1(const Tensor& pred, const Tensor& gt) {
  const std::size_t h = pred.dim(0), w = pred.dim(1);
  Tensor diff = reshape(sub(pred, gt), Shape{h * w, 1});
  std::vector<std::int64_t> here, right, below_here, below;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const auto i = static_cast<std::int64_t>(y * w + x);
      if (x + 1 < w) {
        here.push_back(i);
        right.push_back(i + 1);
      }
      if (y + 1 < h) {
        below_here.push_back(i);
        below.push_back(i + static_cast<std::int64_t>(w));
      }
    }
  Tensor total = Tensor::scalar(0);
  if (!here.empty()) {
    total = add(total, mean(abs(sub(gather_rows(diff, right), gather_rows(diff, here)))));
  }
  if (!below.empty()) {
    total = add(total, mean(abs(sub(gather_rows(diff, below), gather_rows(diff, below_here)))));
  }
  return total;
}

}  // namespace

void LossConfig::validate() const {
  if (!(gamma > 0 && gamma <= 1)) throw ConfigError("loss gamma must lie in (0, 1]");
  if (!(smooth_l1_beta > 0)) throw ConfigError("smooth L1 beta must be positive");
  if (inverse_depth_weight < 0 || gradient_weight < 0) throw ConfigError("negative loss weight");
}

Tensor prediction_loss(const DenseField& pred, const DenseField& gt, const LossConfig& cfg) {
  check_field(pred, "prediction_loss");
  check_field(gt, "prediction_loss");
  if (pred.kind != gt.kind || pred.kind != cfg.kind || pred.values.shape() != gt.values.shape()) {
    throw ContractError("prediction_loss: prediction " + to_string(pred.kind) +
                        shape_str(pred.values.shape()) + " vs ground truth " + to_string(gt.kind) +
                        shape_str(gt.values.shape()));
  }
  switch (pred.kind) {
    case FieldKind::kFlow:
      return mean(abs(sub(pred.values, gt.values)));
    case FieldKind::kDisparity:
      return mean(smooth_l1(sub(pred.values, gt.values), cfg.smooth_l1_beta));
    case FieldKind::kDepth: {
      Tensor inv_pred = reciprocal(pred.values);
      Tensor inv_gt = reciprocal(gt.values);
      Tensor l1 = mean(abs(sub(inv_pred, inv_gt)));
      return add(scale(l1, cfg.inverse_depth_weight),
                 scale(gradient_l1(inv_pred, inv_gt), cfg.gradient_weight));
    }
  }
  throw ContractError("prediction_loss: unknown field kind");
}

Tensor sequence_loss(std::span<const DenseField> preds, const DenseField& gt, const LossConfig& cfg) {
  cfg.validate();
  if (preds.empty()) throw ContractError("sequence_loss: empty prediction list");
  const std::size_t n = preds.size();
  Tensor total = prediction_loss(preds[n - 1], gt, cfg);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double w = std::pow(cfg.gamma, static_cast<double>(n - 1 - i));
    total = add(total, scale(prediction_loss(preds[i], gt, cfg), w));
  }
  return total;
}

}  // namespace unimatch
