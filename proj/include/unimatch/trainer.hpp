#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "unimatch/config.hpp"
#include "unimatch/loss.hpp"
#include "unimatch/model.hpp"
#include "unimatch/optimizer.hpp"
#include "unimatch/synthetic.hpp"

namespace unimatch {

struct TrainConfig {
  Task task = Task::kFlow;
  ModelConfig model = ModelConfig::desk();
  LrSchedule schedule;
  AdamWConfig adam;
  double clip_norm = 1.0;
  double gamma = 0.9;
  int batch = 4;
  std::size_t train_samples = 32;
  std::size_t val_samples = 8;
  std::uint64_t data_seed = 1;
  SyntheticConfig data;
  int log_interval = 100;
  std::string checkpoint_path;  // empty: do not write
  std::string curve_path;       // empty: do not write

  /// Keys: task, steps, batch, lr, warmup, weight_decay, clip_norm, gamma,
  /// train_samples, val_samples, data_seed, height, width, motion,
  /// max_translation, max_disparity, num_candidates, log_interval,
  /// checkpoint, curve, plus the model keys of read_model_config.
  static TrainConfig from(const KeyValues& kv);
  void validate() const;
  LossConfig loss() const;
};

struct CurvePoint {
  int step = 0;
  double loss = 0;
  double lr = 0;
  double grad_norm = 0;
};

struct TrainResult {
  std::vector<CurvePoint> curve;
  std::vector<SyntheticSample> train_set, val_set;
};

/// Mean per-sample EPE (flow, stereo) or Abs Rel (depth) of the final prediction.
double evaluate(const UniMatch& model, Task task, const std::vector<SyntheticSample>& samples,
                const InferenceOptions& opts = {});

/// Mean sequence loss over `samples` without gradient recording.
double mean_loss(const UniMatch& model, Task task, const std::vector<SyntheticSample>& samples,
                 const LossConfig& loss);

/// Builds the synthetic sets, then runs `schedule.total_steps` AdamW steps on
/// `model` (initialised by the caller, e.g. from a checkpoint). A non-finite
/// loss or gradient aborts with NumericError naming the step. `on_step` is
/// called after every update.
TrainResult train(const TrainConfig& cfg, UniMatch& model, std::ostream* log = nullptr,
                  const std::function<void(int, const UniMatch&)>& on_step = {});

}  // namespace unimatch
