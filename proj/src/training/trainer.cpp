#include "unimatch/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "unimatch/checkpoint.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/metrics.hpp"
#include "unimatch/numerics/tape.hpp"

namespace unimatch {
namespace {

Prediction forward(const UniMatch& model, Task task, const SyntheticSample& s,
                   const InferenceOptions& opts = {}) {
  return model.run(task, s.img1, s.img2, s.cam ? &*s.cam : nullptr, opts);
}

}  // namespace

TrainConfig TrainConfig::from(const KeyValues& kv) {
  TrainConfig c;
  c.task = parse_task(kv.get("task", to_string(c.task)));
  c.model = read_model_config(kv, c.model);
  c.schedule.total_steps = static_cast<int>(kv.get_int("steps", c.schedule.total_steps));
  c.schedule.warmup_steps = static_cast<int>(kv.get_int("warmup", c.schedule.warmup_steps));
  c.schedule.peak_lr = kv.get_double("lr", c.schedule.peak_lr);
  c.adam.weight_decay = kv.get_double("weight_decay", c.adam.weight_decay);
  c.clip_norm = kv.get_double("clip_norm", c.clip_norm);
  c.gamma = kv.get_double("gamma", c.gamma);
  c.batch = static_cast<int>(kv.get_int("batch", c.batch));
  c.train_samples = static_cast<std::size_t>(kv.get_int("train_samples", long(c.train_samples)));
  c.val_samples = static_cast<std::size_t>(kv.get_int("val_samples", long(c.val_samples)));
  c.data_seed = static_cast<std::uint64_t>(kv.get_int("data_seed", long(c.data_seed)));
  c.data.height = static_cast<std::size_t>(kv.get_int("height", long(c.data.height)));
  c.data.width = static_cast<std::size_t>(kv.get_int("width", long(c.data.width)));
  const std::string motion = kv.get("motion", "translation");
  if (motion == "translation") {
    c.data.motion = FlowMotion::kTranslation;
  } else if (motion == "affine") {
    c.data.motion = FlowMotion::kAffine;
  } else {
    throw ConfigError("motion must be 'translation' or 'affine', got '" + motion + "'");
  }
  c.data.max_translation = kv.get_double("max_translation", c.data.max_translation);
  c.data.max_disparity = kv.get_double("max_disparity", c.data.max_disparity);
  c.data.num_candidates = static_cast<int>(kv.get_int("num_candidates", c.data.num_candidates));
  c.data.texture_cell = kv.get_double("texture_cell", c.data.texture_cell);
  c.data.texture_octaves = static_cast<int>(kv.get_int("texture_octaves", c.data.texture_octaves));
  c.data.texture_persistence = kv.get_double("texture_persistence", c.data.texture_persistence);
  c.log_interval = static_cast<int>(kv.get_int("log_interval", c.log_interval));
  c.checkpoint_path = kv.get("checkpoint", "");
  c.curve_path = kv.get("curve", "");
  c.validate();
  return c;
}

void TrainConfig::validate() const {
  model.validate();
  schedule.validate();
  data.validate();
  loss().validate();
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (train_samples < 1) throw ConfigError("train_samples must be >= 1");
  if (!(clip_norm > 0)) throw ConfigError("clip_norm must be positive");
  if (log_interval < 1) throw ConfigError("log_interval must be >= 1");
  const auto [mh, mw] = model.input_multiple(task);
  if (data.height % mh || data.width % mw) {
    throw ConfigError("training extents must be multiples of " + std::to_string(mh) + " x " +
                      std::to_string(mw) + " for this model");
  }
}

LossConfig TrainConfig::loss() const {
  LossConfig l;
  l.kind = field_kind(task);
  l.gamma = gamma;
  return l;
}

double evaluate(const UniMatch& model, Task task, const std::vector<SyntheticSample>& samples,
                const InferenceOptions& opts) {
  if (samples.empty()) throw ContractError("evaluate: empty sample set");
  double total = 0;
  for (const auto& s : samples) {
    const auto report = compute_metrics(forward(model, task, s, opts).final(), s.gt);
    total += task == Task::kDepth ? report.abs_rel : report.epe;
  }
  return total / static_cast<double>(samples.size());
}

double mean_loss(const UniMatch& model, Task task, const std::vector<SyntheticSample>& samples,
                 const LossConfig& loss) {
  if (samples.empty()) throw ContractError("mean_loss: empty sample set");
  double total = 0;
  for (const auto& s : samples) {
    total += sequence_loss(forward(model, task, s).sequence, s.gt, loss).item();
  }
  return total / static_cast<double>(samples.size());
}

TrainResult train(const TrainConfig& cfg, UniMatch& model, std::ostream* log,
                  const std::function<void(int, const UniMatch&)>& on_step) {
  cfg.validate();
  if (model.config().architecture() != cfg.model.architecture()) {
    throw ConfigError("train: model architecture differs from the training configuration");
  }
  TrainResult result;
  result.train_set = generate_synthetic(cfg.task, cfg.data_seed, cfg.train_samples, cfg.data);
  result.val_set =
      generate_synthetic(cfg.task, cfg.data_seed ^ 0xabcdef12345ULL, cfg.val_samples, cfg.data);
  const LossConfig loss_cfg = cfg.loss();
  AdamW opt(model.params(), cfg.adam, cfg.schedule);
  std::mt19937_64 rng(cfg.data_seed * 7919 + 17);
  std::vector<std::size_t> order(result.train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();
  const auto start = std::chrono::steady_clock::now();

  for (int step = 1; step <= cfg.schedule.total_steps; ++step) {
    std::vector<Tensor> grads;
    double loss_sum = 0;
    for (int b = 0; b < cfg.batch; ++b) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const SyntheticSample& s = result.train_set[order[cursor++]];
      Tape tape;
      Tensor loss;
      try {
        Tape::Scope scope(tape);
        loss = sequence_loss(forward(model, cfg.task, s).sequence, s.gt, loss_cfg);
      } catch (const NumericError& e) {
        throw NumericError("training step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(loss.item())) {
        throw NumericError("training step " + std::to_string(step) + ": loss is not finite");
      }
      loss_sum += loss.item();
      auto g = gradients(tape, loss, model.params().tensors());
      if (grads.empty()) {
        grads = std::move(g);
      } else {
        for (std::size_t k = 0; k < grads.size(); ++k) {
          auto dst = grads[k].values_mut();
          auto src = g[k].values();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
      }
    }
    for (auto& g : grads)
      for (auto& v : g.values_mut()) v /= cfg.batch;
    const double norm = clip_global_norm(grads, cfg.clip_norm);
    if (!std::isfinite(norm)) {
      throw NumericError("training step " + std::to_string(step) + ": gradient norm is not finite");
    }
    opt.step(model.params(), grads, step);
    const CurvePoint point{step, loss_sum / cfg.batch, cfg.schedule.at(step), norm};
    result.curve.push_back(point);
    if (on_step) on_step(step, model);
    if (log && (step % cfg.log_interval == 0 || step == cfg.schedule.total_steps)) {
      double recent = 0;
      const std::size_t n = std::min<std::size_t>(cfg.log_interval, result.curve.size());
      for (std::size_t i = result.curve.size() - n; i < result.curve.size(); ++i) recent += result.curve[i].loss;
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      *log << "step " << step << " loss " << recent / n << " lr " << point.lr << " grad_norm "
           << norm << " elapsed " << secs << "s";
      if (!result.val_set.empty()) {
        *log << " val_" << (cfg.task == Task::kDepth ? "abs_rel " : "epe ")
             << evaluate(model, cfg.task, result.val_set);
      }
      *log << "\n" << std::flush;
    }
  }
  if (!cfg.checkpoint_path.empty()) save_checkpoint(cfg.checkpoint_path, make_checkpoint(model));
  if (!cfg.curve_path.empty()) {
    std::ofstream out(cfg.curve_path);
    if (!out) throw InputError("cannot write loss curve '" + cfg.curve_path + "'");
    out << "step,loss,lr,grad_norm\n";
    for (const auto& p : result.curve) out << p.step << "," << p.loss << "," << p.lr << "," << p.grad_norm << "\n";
  }
  return result;
}

}  // namespace unimatch
