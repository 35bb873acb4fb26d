#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "segflow/model.hpp"
#include "segflow/tensor.hpp"

namespace segflow {

// Per-sequence evaluation series. per_frame lists cover every frame; the
// T proxy is computed over the frames-1 transitions.
struct SequenceEval {
  std::vector<double> per_frame_J;
  std::vector<double> per_frame_F;
  double T_value = 0.0;
  int frames = 0;
  std::optional<double> epe;
};

struct EvalReport {
  double J_mean = 0.0, J_recall = 0.0, J_decay = 0.0;
  double F_mean = 0.0, F_recall = 0.0, F_decay = 0.0;
  double T_mean = 0.0;
  std::map<std::string, SequenceEval> per_sequence;
  std::optional<double> epe;

  // Sequence statistics first, then dataset averages of them; exactly the
  // recomputation the invariant tests perform.
  static EvalReport aggregate(std::map<std::string, SequenceEval> per_sequence,
                              double recall_threshold = 0.5);

  std::string to_text() const;  // one row per statistic
  std::string to_json() const;  // machine-readable, per-sequence included
};

// One evaluation unit: ordered frames with ground-truth masks and,
// optionally, ground-truth flow for the transitions.
struct EvalSequence {
  std::string id;
  std::vector<Tensor> frames;
  std::vector<Tensor> gt_masks;
  std::vector<Tensor> gt_flows;        // empty or frames-1 entries
  std::vector<Tensor> gt_flow_valids;  // parallel to gt_flows when present
};

struct EvalOptions {
  bool flip_ensemble = false;
  // Score the ground truth against itself; exercises the metric path
  // without a model.
  bool oracle = false;
  int contour_tolerance_px = 2;
  double recall_threshold = 0.5;
};

// Runs the model (or the oracle) over every sequence: frame t is paired
// with frame t+1 (the final frame with itself), per-frame J/F are scored
// against the ground truth, the T proxy uses the predicted masks and
// predicted flows, and EPE compares predicted flow to ground truth where
// present. model may be null only in oracle mode.
EvalReport evaluate_sequences(const SegFlowModel* model, const std::vector<EvalSequence>& data,
                              const EvalOptions& options);

}  // namespace segflow
