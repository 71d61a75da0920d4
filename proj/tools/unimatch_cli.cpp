#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "unimatch/checkpoint.hpp"
#include "unimatch/config.hpp"
#include "unimatch/errors.hpp"
#include "unimatch/inference.hpp"
#include "unimatch/io.hpp"
#include "unimatch/metrics.hpp"
#include "unimatch/selfcheck.hpp"
#include "unimatch/trainer.hpp"

namespace {

using namespace unimatch;

const char* kConfigHelp = R"(Config file keys (key = value, '#' comments):
  training: steps, batch, lr, warmup, weight_decay, clip_norm, gamma,
            train_samples, val_samples, data_seed, log_interval, checkpoint, curve
  data:     height, width, motion (translation|affine), max_translation,
            max_disparity, num_candidates, texture_cell, texture_octaves,
            texture_persistence
  model:    stem_channels, stem_kernel, backbone_blocks (width:stride,...),
            feature_dim, num_blocks, splits, ffn_ratio, num_scales,
            refine_window, refine_splits, upsample_hidden, seed
UNIMATCH_SEED overrides both seed and data_seed.)";

std::string with_suffix(const std::string& path, const std::string& suffix, const std::string& ext = "") {
  const auto slash = path.find_last_of('/');
  const auto dot = path.find_last_of('.');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  const std::string stem = has_ext ? path.substr(0, dot) : path;
  return stem + suffix + (ext.empty() ? (has_ext ? path.substr(dot) : "") : ext);
}

std::optional<std::string> seed_override() {
  const char* env = std::getenv("UNIMATCH_SEED");
  if (!env || !*env) return std::nullopt;
  return std::string(env);
}

int run_train(const std::string& task, const std::string& config_path, const std::string& init,
              const std::string& out, const std::string& curve) {
  KeyValues kv = config_path.empty() ? KeyValues{} : KeyValues::load(config_path);
  if (kv.has("task") && kv.get("task", "") != task) {
    throw ConfigError("--task " + task + " conflicts with task = " + kv.get("task", "") + " in the config");
  }
  kv.set("task", task);
  if (auto seed = seed_override()) {
    kv.set("seed", *seed);
    kv.set("data_seed", *seed);
  }
  if (!out.empty()) kv.set("checkpoint", out);
  if (!curve.empty()) kv.set("curve", curve);
  if (!kv.has("checkpoint")) kv.set("checkpoint", task + ".ckpt");

  std::optional<Checkpoint> start;
  if (!init.empty()) {
    start = load_checkpoint(init);
    // Architecture keys default to the checkpoint's.
    KeyValues model_kv;
    write_model_config(start->model, model_kv);
    for (const auto& key : {"stem_channels", "stem_kernel", "backbone_blocks", "feature_dim", "num_blocks",
                            "splits", "ffn_ratio", "num_scales", "refine_window", "refine_splits",
                            "upsample_hidden"}) {
      if (!kv.has(key) && model_kv.has(key)) kv.set(key, model_kv.get(key, ""));
    }
  }
  const TrainConfig cfg = TrainConfig::from(kv);
  kv.reject_unused();
  UniMatch model(cfg.model);
  if (start) apply_checkpoint(*start, model.params());
  std::cerr << "training " << task << ": " << model.params().scalar_count() << " parameters, "
            << cfg.schedule.total_steps << " steps, batch " << cfg.batch << "\n";
  train(cfg, model, &std::cerr);
  std::cerr << "wrote " << cfg.checkpoint_path << "\n";
  return 0;
}

int run_infer(const std::string& task_name, const std::string& ckpt, const std::string& in1, const std::string& in2,
              const std::string& cameras, const std::string& out, bool bidirectional, bool occlusion,
              bool no_refine) {
  const Task task = parse_task(task_name);
  if ((bidirectional || occlusion) && task != Task::kFlow) {
    throw ConfigError("--bidirectional and --occlusion apply to flow only");
  }
  if (task == Task::kDepth && cameras.empty()) throw ConfigError("depth inference needs --cameras");
  const Checkpoint c = load_checkpoint(ckpt);
  UniMatch model(c.model);
  apply_checkpoint(c, model.params());
  const Tensor img1 = decode_image(read_file(in1));
  const Tensor img2 = decode_image(read_file(in2));
  std::optional<CameraSetup> cam;
  if (!cameras.empty()) {
    const Bytes text = read_file(cameras);
    cam = parse_cameras(std::string(text.begin(), text.end()));
  }
  InferenceOptions opts;
  opts.refine = !no_refine;
  opts.bidirectional = bidirectional || occlusion;
  const Prediction p = infer_padded(model, task, img1, img2, cam ? &*cam : nullptr, opts);
  write_field(out, p.final());
  std::cerr << "wrote " << out << "\n";
  if (p.backward) {
    const std::string back = with_suffix(out, "_bwd");
    write_field(back, *p.backward);
    std::cerr << "wrote " << back << "\n";
  }
  if (occlusion) {
    const std::string occ = with_suffix(out, "_occ", ".png");
    write_file(occ, encode_mask(occlusion_mask(p.final(), *p.backward), img1.dim(0), img1.dim(1)));
    std::cerr << "wrote " << occ << "\n";
  }
  return 0;
}

int run_eval(const std::string& task_name, const std::string& pred_path, const std::string& gt_path,
             const std::string& valid_path) {
  const FieldKind kind = field_kind(parse_task(task_name));
  const FieldWithMask pred = read_field(pred_path, kind);
  const FieldWithMask gt = read_field(gt_path, kind);
  if (pred.field.values.shape() != gt.field.values.shape()) {
    throw InputError("prediction " + shape_str(pred.field.values.shape()) + " and ground truth " +
                     shape_str(gt.field.values.shape()) + " differ in extent");
  }
  std::vector<std::uint8_t> valid = gt.valid;
  if (!valid_path.empty()) {
    std::size_t h = 0, w = 0;
    const auto mask = decode_mask(read_file(valid_path), &h, &w);
    if (h != gt.field.height() || w != gt.field.width()) throw InputError("valid mask extent differs from the ground truth");
    for (std::size_t i = 0; i < valid.size(); ++i) valid[i] = valid[i] && mask[i];
  }
  std::cout << compute_metrics(pred.field, gt.field, valid).to_json() << "\n";
  return 0;
}

int run_selfcheck_cmd(std::uint64_t seed) {
  bool ok = true;
  for (const auto& r : run_selfcheck(seed)) {
    ok = ok && r.passed;
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << " [" << r.seconds << " s]\n";
  }
  std::cout << (ok ? "selfcheck passed" : "selfcheck FAILED") << "\n";
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Unified flow, stereo and depth matching"};
  app.require_subcommand(1);
  const std::vector<std::string> tasks{"flow", "stereo", "depth"};

  std::string task, config, init, out, curve;
  auto* train_cmd = app.add_subcommand("train", "Train on synthetic data and write a checkpoint");
  train_cmd->footer(kConfigHelp);
  train_cmd->add_option("--task", task, "Task")->required()->check(CLI::IsMember(tasks));
  train_cmd->add_option("--config", config, "Key-value config file")->check(CLI::ExistingFile);
  train_cmd->add_option("--init", init, "Initial checkpoint (any task)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", out, "Checkpoint to write (default: config 'checkpoint' or <task>.ckpt)");
  train_cmd->add_option("--curve", curve, "CSV loss curve to write");

  std::string ckpt, input1, input2, cameras, output;
  bool bidirectional = false, occlusion = false, no_refine = false;
  auto* infer_cmd = app.add_subcommand("infer", "Predict a field for one image pair");
  infer_cmd->add_option("--task", task, "Task")->required()->check(CLI::IsMember(tasks));
  infer_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--input1", input1, "First image (PNG)")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--input2", input2, "Second image (PNG)")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--cameras", cameras, "Camera file (depth)")->check(CLI::ExistingFile);
  infer_cmd->add_option("--out", output, "Output field (.flo/.png flow, .pfm/.png stereo and depth)")->required();
  infer_cmd->add_flag("--bidirectional", bidirectional, "Also write the backward flow as <out>_bwd");
  infer_cmd->add_flag("--occlusion", occlusion, "Write the forward-backward occlusion mask as <out>_occ.png");
  infer_cmd->add_flag("--no-refine", no_refine, "Skip the 1/4 refinement stage");

  std::string pred, gt, valid;
  auto* eval_cmd = app.add_subcommand("eval", "Compare a prediction with ground truth; prints JSON");
  eval_cmd->add_option("--task", task, "Task")->required()->check(CLI::IsMember(tasks));
  eval_cmd->add_option("--pred", pred, "Predicted field")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--gt", gt, "Ground-truth field")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--valid", valid, "Validity mask PNG (nonzero = valid)")->check(CLI::ExistingFile);

  std::uint64_t seed = 20240101;
  auto* self_cmd = app.add_subcommand("selfcheck", "Run the built-in oracle and invariant checks");
  self_cmd->add_option("--seed", seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  try {
    if (*train_cmd) return run_train(task, config, init, out, curve);
    if (*infer_cmd) return run_infer(task, ckpt, input1, input2, cameras, output, bidirectional, occlusion, no_refine);
    if (*eval_cmd) return run_eval(task, pred, gt, valid);
    if (*self_cmd) return run_selfcheck_cmd(seed);
  } catch (const unimatch::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
