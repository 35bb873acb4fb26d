#pragma once

#include <filesystem>
#include <string>

#include "segflow/model.hpp"
#include "segflow/training.hpp"

namespace segflow::cli {

// Everything one run needs: architecture, training protocol, augmentation
// ranges, dataset paths and the ablation switches matching the study
// axes (-flo, -ol, -of, -it, -sda, -fda). Ablations are pure
// configuration: apply_ablations() folds them into the model/train
// settings, so every variant runs the same code.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;

  std::string seg_data;
  std::string flow_data;
  std::string eval_data;

  bool disable_fusion = false;
  bool disable_online = false;
  bool disable_offline = false;
  bool disable_iterative = false;
  bool disable_seg_augmentation = false;
  bool disable_flow_augmentation = false;

  std::string out_dir = "out";
  std::uint64_t seed = 0;

  // gen-data knobs
  int gen_train_seqs = 20;
  int gen_val_seqs = 5;
  int gen_frames = 8;
  int gen_max_objects = 2;
  int gen_target_object = -1;

  void apply_ablations();
  // Pushes the run seed into the model/train configs.
  void propagate_seed();

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

}  // namespace segflow::cli
