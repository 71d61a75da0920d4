#include "unimatch/optimizer.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "unimatch/errors.hpp"

namespace unimatch {

void LrSchedule::validate() const {
  if (!(peak_lr > 0)) throw ConfigError("peak learning rate must be positive");
  if (warmup_steps < 0 || total_steps < 0 || warmup_steps > total_steps) {
    throw ConfigError("schedule needs 0 <= warmup <= total");
  }
}

double LrSchedule::at(int step) const {
  validate();
  if (step < 0 || step > total_steps) {
    throw ConfigError("step " + std::to_string(step) + " outside schedule [0, " +
                      std::to_string(total_steps) + "]");
  }
  if (step < warmup_steps) return peak_lr * step / warmup_steps;
  if (step == warmup_steps) return peak_lr;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(total_steps - warmup_steps);
  if (step == total_steps) return 0.0;
  return peak_lr * 0.5 * (1 + std::cos(std::numbers::pi * progress));
}

AdamW::AdamW(const ModelParams& params, AdamWConfig cfg, LrSchedule schedule)
    : cfg_(cfg), schedule_(schedule) {
  schedule_.validate();
  for (const auto& p : params.tensors()) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void AdamW::step(ModelParams& params, std::span<const Tensor> grads, int step) {
  if (step < 1) throw ConfigError("optimizer steps are numbered from 1");
  if (grads.size() != params.size() || m_.size() != params.size()) {
    throw ContractError("optimizer: gradient list does not match the parameter registry");
  }
  const double lr = schedule_.at(step);
  const double c1 = 1 - std::pow(cfg_.beta1, step);
  const double c2 = 1 - std::pow(cfg_.beta2, step);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor p = params.tensors()[k];
    if (grads[k].numel() != p.numel()) throw ContractError("optimizer: gradient shape mismatch");
    auto values = p.values_mut();
    auto g = grads[k].values();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1 - cfg_.beta2) * g[i] * g[i];
      const double update = (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.eps);
      values[i] -= lr * (update + cfg_.weight_decay * values[i]);
    }
  }
}

double global_norm(std::span<const Tensor> grads) {
  double s = 0;
  for (const auto& g : grads)
    for (Real v : g.values()) s += v * v;
  return std::sqrt(s);
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0) {
    const double f = max_norm / norm;
    for (auto& g : grads)
      for (auto& v : g.values_mut()) v *= f;
  }
  return norm;
}

}  // namespace unimatch
