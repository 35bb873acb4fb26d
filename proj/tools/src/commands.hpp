#pragma once

#include <string>

#include "run_config.hpp"

namespace segflow::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitDivergence = 3;

int cmd_gen_data(RunConfig run);

int cmd_train(RunConfig run);

struct FinetuneArgs {
  std::string checkpoint;
  std::string sequence;  // sequence id under eval_data; or explicit files:
  std::string frame_path;
  std::string mask_path;
};
int cmd_finetune(RunConfig run, const FinetuneArgs& args);

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  bool flip_ensemble = false;
  bool oracle = false;
};
int cmd_eval(RunConfig run, const EvalArgs& args);

struct VizArgs {
  std::string checkpoint;
  std::string frame_path;
  std::string next_path;  // defaults to frame_path (static pair)
  double overlay_alpha = 0.5;
};
int cmd_viz(RunConfig run, const VizArgs& args);

}  // namespace segflow::cli
