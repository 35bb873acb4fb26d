#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "segflow/autograd.hpp"
#include "segflow/types.hpp"

namespace segflow {

enum class Branch { kSegmentation, kFlow };

const char* branch_name(Branch b);

// Architectural and training-relevant hyper-parameters, including the
// fusion ablation switch. Desk-scale defaults; the topology (5 modules,
// scales 1/2..1/32, bridges at 1/8, 1/16, 1/32) is fixed.
struct ModelConfig {
  int input_height = 64;
  int input_width = 64;
  std::vector<int> encoder_channels = {16, 32, 64, 96, 128};
  std::vector<int> flow_channels = {16, 32, 64, 96, 128};
  bool fusion_enabled = true;
  std::set<int> fusion_scales = {8, 16, 32};
  double lambda_flow = 0.1;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
};

struct Parameter {
  std::string name;
  Branch owner = Branch::kSegmentation;
  Tensor value;
  Tensor grad;
};

// Two-branch network with bi-directional feature propagation.
//
// Segmentation branch: 5 stride-2 convolution modules on frame_t
// (scales 1/2..1/32); 1x1 score projections at 1/8, 1/16, 1/32 are
// upsampled to full resolution and summed into seg_logits.
//
// Flow branch: encoder over the 6-channel frame stack down to 1/32, then
// a decoder that doubles resolution per step with encoder skip
// concatenations; a 1x1 head at 1/2 upsampled to full resolution gives
// flow_pred.
//
// At each scale in fusion_scales the branches exchange features: the
// foreign map is resampled to the receiving size, concatenated, passed
// through a channel-restoring convolution and added back, so a
// zero-weight bridge is exactly the unfused network. Bridge convolutions
// belong to the receiving branch.
class SegFlowModel {
 public:
  explicit SegFlowModel(const ModelConfig& config);

  const ModelConfig& config() const { return cfg_; }

  // Inference pass; safe to call concurrently on a const model.
  SegFlowOutput forward(const FramePair& pair) const;

  struct TapedForward {
    ag::Var seg_logits;
    ag::Var flow_pred;
    std::vector<std::pair<int, ag::Var>> param_leaves;  // param index -> leaf
  };
  // Tape-building pass. Parameters owned by a frozen branch enter the
  // tape as constants, so backward never produces gradients for them.
  TapedForward forward_train(const FramePair& pair) const;

  // Pre-fusion feature maps at the bridging scales {8,16,32}.
  FeaturePyramid seg_feature_pyramid(const Tensor& frame) const;
  FeaturePyramid flow_feature_pyramid(const FramePair& pair) const;

  // Applies the per-scale exchange to two pyramids covering
  // fusion_scales; identity pass-through when fusion is disabled.
  // Both directions read the pre-fusion inputs.
  std::pair<FeaturePyramid, FeaturePyramid> fuse_bidirectional(
      const FeaturePyramid& seg, const FeaturePyramid& flow) const;

  std::vector<Parameter>& parameters() { return params_; }
  const std::vector<Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;
  std::size_t parameter_count(Branch b) const;
  void zero_grad();

  bool frozen(Branch b) const { return frozen_[static_cast<std::size_t>(b)]; }
  void set_frozen(Branch b, bool frozen) { frozen_[static_cast<std::size_t>(b)] = frozen; }

  std::uint64_t weight_hash() const;

 private:
  struct ConvRef {
    int w = -1;
    int b = -1;
  };

  int add_param(const std::string& name, Branch owner, std::vector<int> shape, int fan_in);
  ConvRef add_conv(const std::string& name, Branch owner, int c_in, int c_out, int k);

  ag::Var conv(const ConvRef& ref, const ag::Var& x, int stride, int pad,
               std::vector<std::pair<int, ag::Var>>& leaves, bool with_grad) const;
  ag::Var param_leaf(int index, std::vector<std::pair<int, ag::Var>>& leaves,
                     bool with_grad) const;
  ag::Var fuse_into(const ag::Var& own, const ag::Var& foreign, const ConvRef& bridge,
                    std::vector<std::pair<int, ag::Var>>& leaves, bool with_grad) const;

  struct Built {
    ag::Var seg_logits;
    ag::Var flow_pred;
    std::vector<std::pair<int, ag::Var>> leaves;
  };
  Built build_forward(const FramePair& pair, bool with_grad) const;

  ModelConfig cfg_;
  std::vector<Parameter> params_;
  std::array<ConvRef, 5> seg_modules_;
  std::map<int, ConvRef> seg_scores_;    // scale -> 1x1 projection
  std::array<ConvRef, 5> flow_encoder_;
  std::array<ConvRef, 4> flow_decoder_;  // produces scales 16, 8, 4, 2
  ConvRef flow_head_;
  std::map<int, ConvRef> fuse_into_seg_;
  std::map<int, ConvRef> fuse_into_flow_;
  std::array<bool, 2> frozen_ = {false, false};
};

// Spec-facing conveniences for the alternating trainer.
inline void freeze_branch(SegFlowModel& model, Branch b) { model.set_frozen(b, true); }
inline void unfreeze_branch(SegFlowModel& model, Branch b) { model.set_frozen(b, false); }
inline Branch other_branch(Branch b) {
  return b == Branch::kSegmentation ? Branch::kFlow : Branch::kSegmentation;
}

}  // namespace segflow
