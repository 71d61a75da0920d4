#pragma once

#include <span>
#include <vector>

#include "unimatch/numerics/params.hpp"
#include "unimatch/numerics/tensor.hpp"

namespace unimatch {

/// Linear warmup to the peak rate, then cosine decay to zero at `total_steps`.
struct LrSchedule {
  double peak_lr = 4e-4;
  int warmup_steps = 100;
  int total_steps = 2000;

  void validate() const;
  /// Rate for step in [0, total_steps]; ConfigError beyond.
  double at(int step) const;
};

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
};

/// Adam with decoupled weight decay. Moment buffers follow the registry order.
class AdamW {
 public:
  AdamW(const ModelParams& params, AdamWConfig cfg, LrSchedule schedule);

  /// Applies update number `step` (1-based) with rate schedule.at(step).
  void step(ModelParams& params, std::span<const Tensor> grads, int step);

  const LrSchedule& schedule() const { return schedule_; }

 private:
  AdamWConfig cfg_;
  LrSchedule schedule_;
  std::vector<std::vector<Real>> m_, v_;
};

/// Global L2 norm over all gradients.
double global_norm(std::span<const Tensor> grads);
/// Rescales gradients in place so their global norm is at most `max_norm`;
/// returns the norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace unimatch
