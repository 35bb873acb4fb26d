#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "segflow/augmentation.hpp"
#include "segflow/dataset.hpp"
#include "segflow/losses.hpp"
#include "segflow/model.hpp"

namespace segflow {

// Protocol hyper-parameters. The paper's learning rates (1e-8 / 1e-9 /
// 1e-10, halving every 10000 iterations) are tuned to pretrained
// full-scale weights; the desk-scale defaults keep the 10:1
// segmentation:flow ratio that realizes the loss weighting through the
// learning-rate route.
struct TrainConfig {
  int rounds = 3;
  double lr_seg = 1e-4;
  double lr_flow = 1e-5;
  double lr_online = 1e-5;
  int halving_interval = 500;
  int batch_size = 1;
  int patience = 4;          // validation evaluations without improvement
  double min_delta = 1e-4;   // improvement threshold
  int max_steps_per_phase = 400;
  int val_interval = 50;     // steps between validation evaluations
  double val_fraction = 0.10;

  Reduction seg_reduction = Reduction::kSum;
  Reduction flow_reduction = Reduction::kMean;

  // Offline-phase augmentation (the -sda / -fda switches).
  bool augment_seg = true;
  bool augment_flow = true;
  AffineRanges affine_ranges;

  // Online fine-tuning sample budget (the paper uses 1000 per frame).
  int online_samples = 120;
  SynthesisRanges synthesis_ranges;
  bool online_affine = true;
  bool online_synthesize = true;

  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

// lr(step) = lr0 * 2^-(floor(step / halving_interval))
double scheduled_lr(double lr0, int step, int halving_interval);

struct ValPoint {
  int step = 0;
  double error = 0.0;
};

struct TrainState {
  int round_index = 0;
  Branch active_branch = Branch::kSegmentation;
  int step = 0;             // SGD updates executed in this phase
  double lr_current = 0.0;
  std::vector<ValPoint> val_history;
  double best_val_error = 0.0;
  int best_step = 0;
  bool diverged = false;
  std::string diagnostic;
};

struct TrainHooks {
  std::ostream* log = nullptr;  // one line per validation evaluation
  std::function<void(int phase_index, const SegFlowModel& best_model)> on_phase_end;
};

// A subset view used for train/validation splits.
struct IndexedPairs {
  const PairSource* source = nullptr;
  std::vector<std::size_t> indices;
  std::size_t size() const { return indices.size(); }
  FramePair get(std::size_t i) const { return source->get(indices[i]); }
};

// Seeded 90/10 split (validation gets at least one pair).
std::pair<IndexedPairs, IndexedPairs> split_train_val(const PairSource& source,
                                                      double val_fraction, Rng& rng);

// Validation error definitions used for branch switching and model
// selection: mean per-pixel weighted cross-entropy for segmentation,
// rooted average endpoint error for flow.
double validation_error(const SegFlowModel& model, Branch branch, const IndexedPairs& val);

// SGD on one branch with the other frozen: Eq-style branch loss, halving
// schedule (unless constant_lr), periodic validation with
// (patience, min_delta) early stopping, divergence abort. The model is
// left at the validation-optimal parameters of the phase.
TrainState train_phase(SegFlowModel& model, Branch branch, const IndexedPairs& train,
                       const IndexedPairs& val, const TrainConfig& config, double lr0,
                       bool constant_lr, bool augment, Rng rng, const std::string& phase_label,
                       const TrainHooks& hooks = {});

struct PhaseRecord {
  int round = 0;
  Branch branch = Branch::kSegmentation;
  TrainState state;
};

struct OfflineResult {
  std::vector<PhaseRecord> phases;
  bool diverged = false;
};

// Iterative offline training: rounds x (segmentation phase, flow phase),
// segmentation first, each phase resuming from the previous phase's best
// checkpoint. The two datasets need not coincide; each carries only its
// own ground truth.
// start_phase > 0 resumes an interrupted run: the model must already hold
// that phase's starting checkpoint, and the per-phase seed derivation
// makes the remaining phases identical to an uninterrupted run.
OfflineResult offline_train(SegFlowModel& model, const PairSource& seg_data,
                            const PairSource& flow_data, const TrainConfig& config,
                            const TrainHooks& hooks = {}, int start_phase = 0);

// Per-sequence adaptation from the first-frame mask: the mask is expanded
// through the augmentation pipeline into a training set and only the
// segmentation branch is updated, at a fixed learning rate, with the flow
// branch frozen throughout.
TrainState online_finetune(SegFlowModel& model, const Tensor& first_frame,
                           const Tensor& first_mask, const TrainConfig& config,
                           const TrainHooks& hooks = {});

}  // namespace segflow
