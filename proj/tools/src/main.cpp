#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "run_config.hpp"
#include "segflow/errors.hpp"

namespace {

using segflow::cli::RunConfig;

// --config is honored before CLI11 parses, so later flags win over the
// file, which wins over built-in defaults.
RunConfig preload_config(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) return RunConfig::load(argv[i + 1]);
    if (arg.rfind("--config=", 0) == 0) return RunConfig::load(arg.substr(9));
  }
  return RunConfig{};
}

void add_common_options(CLI::App* cmd, RunConfig& run) {
  cmd->add_option("--config", "run configuration JSON (parsed before other flags)")
      ->expected(1);
  cmd->add_option("--seed", run.seed, "master RNG seed");
  cmd->add_option("--out", run.out_dir, "output directory");
}

void add_model_options(CLI::App* cmd, RunConfig& run) {
  cmd->add_option("--size", [&run](const std::vector<std::string>& vals) {
        const auto x = vals.front().find('x');
        if (x == std::string::npos) return false;
        run.model.input_height = std::stoi(vals.front().substr(0, x));
        run.model.input_width = std::stoi(vals.front().substr(x + 1));
        return true;
      },
      "input size HxW (divisible by 32)");
  cmd->add_option("--lambda-flow", run.model.lambda_flow, "flow loss weight in the combined loss");
}

void add_train_options(CLI::App* cmd, RunConfig& run) {
  cmd->add_option("--rounds", run.train.rounds, "offline training rounds");
  cmd->add_option("--lr-seg", run.train.lr_seg, "segmentation phase learning rate");
  cmd->add_option("--lr-flow", run.train.lr_flow, "flow phase learning rate");
  cmd->add_option("--lr-online", run.train.lr_online, "online fine-tuning learning rate");
  cmd->add_option("--halving-interval", run.train.halving_interval,
                  "steps between learning-rate halvings");
  cmd->add_option("--batch-size", run.train.batch_size, "SGD batch size");
  cmd->add_option("--patience", run.train.patience,
                  "validation evaluations without improvement before stopping");
  cmd->add_option("--min-delta", run.train.min_delta, "improvement threshold");
  cmd->add_option("--max-steps-per-phase", run.train.max_steps_per_phase, "phase step cap");
  cmd->add_option("--val-interval", run.train.val_interval, "steps between validations");
  cmd->add_option("--online-samples", run.train.online_samples,
                  "augmented samples for online fine-tuning");
}

void add_ablation_options(CLI::App* cmd, RunConfig& run) {
  cmd->add_flag("--disable-fusion", run.disable_fusion, "drop the bridge (the -flo variant)");
  cmd->add_flag("--disable-online", run.disable_online, "skip online fine-tuning (-ol)");
  cmd->add_flag("--disable-offline", run.disable_offline, "skip offline training (-of)");
  cmd->add_flag("--disable-iterative", run.disable_iterative, "single round (-it)");
  cmd->add_flag("--disable-seg-augmentation", run.disable_seg_augmentation,
                "no affine augmentation (-sda)");
  cmd->add_flag("--disable-flow-augmentation", run.disable_flow_augmentation,
                "no synthesized motion pairs (-fda)");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig run;
  try {
    run = preload_config(argc, argv);
  } catch (const segflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return segflow::cli::kExitUsage;
  }

  CLI::App app{"joint video object segmentation and optical flow at desk scale"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic moving-shapes dataset");
  add_common_options(gen, run);
  add_model_options(gen, run);
  gen->add_option("--train-seqs", run.gen_train_seqs, "training sequences");
  gen->add_option("--val-seqs", run.gen_val_seqs, "validation sequences");
  gen->add_option("--frames", run.gen_frames, "frames per sequence");
  gen->add_option("--max-objects", run.gen_max_objects, "objects per scene upper bound");
  gen->add_option("--target-object", run.gen_target_object,
                  "annotate only this object index (-1 = union)");

  auto* train = app.add_subcommand("train", "offline iterative training");
  add_common_options(train, run);
  add_model_options(train, run);
  add_train_options(train, run);
  add_ablation_options(train, run);
  train->add_option("--seg-data", run.seg_data, "segmentation dataset root (masks)");
  train->add_option("--flow-data", run.flow_data, "flow dataset root (.flo files)");

  segflow::cli::FinetuneArgs finetune_args;
  auto* finetune = app.add_subcommand("finetune", "online per-sequence fine-tuning");
  add_common_options(finetune, run);
  add_train_options(finetune, run);
  add_ablation_options(finetune, run);
  finetune->add_option("--ckpt", finetune_args.checkpoint, "offline checkpoint");
  finetune->add_option("--seq", finetune_args.sequence, "sequence id under --eval-data");
  finetune->add_option("--eval-data", run.eval_data, "dataset root for --seq");
  finetune->add_option("--frame", finetune_args.frame_path, "first frame image");
  finetune->add_option("--mask", finetune_args.mask_path, "first frame mask");

  segflow::cli::EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  add_common_options(eval, run);
  eval->add_option("--ckpt", eval_args.checkpoint, "checkpoint to evaluate");
  eval->add_option("--data", eval_args.dataset, "dataset root");
  eval->add_flag("--flip-ensemble", eval_args.flip_ensemble,
                 "average predictions over the input and its mirror");
  eval->add_flag("--oracle", eval_args.oracle, "score the ground truth against itself");

  segflow::cli::VizArgs viz_args;
  auto* viz = app.add_subcommand("viz", "render mask overlay and flow colorization");
  add_common_options(viz, run);
  viz->add_option("--ckpt", viz_args.checkpoint, "checkpoint");
  viz->add_option("--frame", viz_args.frame_path, "input frame");
  viz->add_option("--next", viz_args.next_path, "next frame (defaults to --frame)");
  viz->add_option("--alpha", viz_args.overlay_alpha, "overlay opacity in [0,1]");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? segflow::cli::kExitOk : segflow::cli::kExitUsage;
  }

  try {
    if (gen->parsed()) return segflow::cli::cmd_gen_data(run);
    if (train->parsed()) return segflow::cli::cmd_train(run);
    if (finetune->parsed()) return segflow::cli::cmd_finetune(run, finetune_args);
    if (eval->parsed()) return segflow::cli::cmd_eval(run, eval_args);
    if (viz->parsed()) return segflow::cli::cmd_viz(run, viz_args);
  } catch (const segflow::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return segflow::cli::kExitUsage;
  } catch (const segflow::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return segflow::cli::kExitDivergence;
  } catch (const std::exception& e) {  // DataError, IoError, ShapeError
    std::cerr << "error: " << e.what() << "\n";
    return segflow::cli::kExitData;
  }
  return segflow::cli::kExitUsage;
}
