#include <cmath>

#include "doctest.h"
#include "segflow/errors.hpp"
#include "segflow/losses.hpp"
#include "segflow/model.hpp"
#include "segflow/rng.hpp"

using namespace segflow;

namespace {

ModelConfig micro_config(bool fusion = true) {
  ModelConfig cfg;
  cfg.input_height = 32;
  cfg.input_width = 32;
  cfg.encoder_channels = {3, 4, 5, 6, 7};
  cfg.flow_channels = {3, 4, 5, 6, 7};
  cfg.fusion_enabled = fusion;
  cfg.fusion_scales = {8, 16, 32};
  cfg.seed = 5;
  return cfg;
}

FramePair random_pair(int h, int w, Rng& rng) {
  FramePair pair;
  pair.frame_t = Tensor({3, h, w});
  pair.frame_t1 = Tensor({3, h, w});
  for (std::size_t i = 0; i < pair.frame_t.size(); ++i) {
    pair.frame_t[i] = rng.uniform();
    pair.frame_t1[i] = rng.uniform();
  }
  return pair;
}

Tensor random_binary(int h, int w, Rng& rng) {
  Tensor m({h, w});
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = rng.bernoulli(0.3) ? 1.0 : 0.0;
  return m;
}

void zero_params_with_prefix(SegFlowModel& model, const std::string& prefix) {
  for (auto& p : model.parameters())
    if (p.name.rfind(prefix, 0) == 0) p.value.fill(0.0);
}

}  // namespace

TEST_CASE("ModelConfig validation") {
  ModelConfig cfg = micro_config();
  CHECK_NOTHROW(cfg.validate());

  ModelConfig bad = cfg;
  bad.input_height = 48;  // not divisible by 32
  CHECK_THROWS_AS(SegFlowModel{bad}, ConfigError);

  bad = cfg;
  bad.encoder_channels = {3, 4, 5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.fusion_scales.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.fusion_enabled = false;
  bad.fusion_scales.clear();
  CHECK_NOTHROW(bad.validate());

  bad = cfg;
  bad.fusion_scales = {4};
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.encoder_channels[2] = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);

  bad = cfg;
  bad.lambda_flow = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("output shapes and stride arithmetic") {
  ModelConfig cfg;
  cfg.input_height = 64;
  cfg.input_width = 64;
  cfg.encoder_channels = {16, 32, 64, 96, 128};
  cfg.flow_channels = {16, 32, 64, 96, 128};
  cfg.seed = 1;
  SegFlowModel model(cfg);

  Rng rng(2);
  const FramePair pair = random_pair(64, 64, rng);
  const SegFlowOutput out = model.forward(pair);
  CHECK(out.seg_logits.shape() == std::vector<int>{2, 64, 64});
  CHECK(out.flow_pred.shape() == std::vector<int>{2, 64, 64});
  CHECK(out.flow_pred.all_finite());

  // Module 3 feature map is 1/8 of 64 -> 8x8; deepest flow feature 2x2.
  const FeaturePyramid seg_pyr = model.seg_feature_pyramid(pair.frame_t);
  seg_pyr.validate(64, 64);
  const PyramidLevel* level8 = seg_pyr.find(8);
  REQUIRE(level8 != nullptr);
  CHECK(level8->features.dim(0) == 64);
  CHECK(level8->features.dim(1) == 8);
  CHECK(level8->features.dim(2) == 8);

  const FeaturePyramid flow_pyr = model.flow_feature_pyramid(pair);
  flow_pyr.validate(64, 64);
  const PyramidLevel* level32 = flow_pyr.find(32);
  REQUIRE(level32 != nullptr);
  CHECK(level32->features.dim(1) == 2);
  CHECK(level32->features.dim(2) == 2);
}

TEST_CASE("forward rejects mismatched pair shapes") {
  SegFlowModel model(micro_config());
  Rng rng(3);
  CHECK_THROWS_AS(model.forward(random_pair(64, 64, rng)), ShapeError);
}

TEST_CASE("forward is deterministic") {
  SegFlowModel model(micro_config());
  Rng rng(4);
  const FramePair pair = random_pair(32, 32, rng);
  const SegFlowOutput a = model.forward(pair);
  const SegFlowOutput b = model.forward(pair);
  CHECK(max_abs_diff(a.seg_logits, b.seg_logits) == 0.0);
  CHECK(max_abs_diff(a.flow_pred, b.flow_pred) == 0.0);

  // Same seed + config builds identical weights.
  SegFlowModel twin(micro_config());
  CHECK(twin.weight_hash() == model.weight_hash());
}

TEST_CASE("zeroed score projections give identically zero seg_logits") {
  SegFlowModel model(micro_config());
  zero_params_with_prefix(model, "seg.score");
  Rng rng(6);
  const SegFlowOutput out = model.forward(random_pair(32, 32, rng));
  for (std::size_t i = 0; i < out.seg_logits.size(); ++i) CHECK(out.seg_logits[i] == 0.0);
}

TEST_CASE("zeroed flow head gives identically zero flow_pred") {
  SegFlowModel model(micro_config());
  zero_params_with_prefix(model, "flow.head");
  Rng rng(7);
  FramePair pair = random_pair(32, 32, rng);
  pair.frame_t1 = pair.frame_t;  // identical frames
  const SegFlowOutput out = model.forward(pair);
  for (std::size_t i = 0; i < out.flow_pred.size(); ++i) CHECK(out.flow_pred[i] == 0.0);
}

TEST_CASE("fusion neutrality and capacity") {
  SegFlowModel fused(micro_config(true));
  SegFlowModel plain(micro_config(false));
  // Disjoint union: parameter count of the unfused model is the sum of
  // the two single-branch counts; fusion strictly adds capacity.
  CHECK(plain.parameter_count() ==
        plain.parameter_count(Branch::kSegmentation) + plain.parameter_count(Branch::kFlow));
  CHECK(fused.parameter_count() > plain.parameter_count());
  CHECK(fused.parameter_count(Branch::kSegmentation) >
        plain.parameter_count(Branch::kSegmentation));
  CHECK(fused.parameter_count(Branch::kFlow) > plain.parameter_count(Branch::kFlow));
}

TEST_CASE("zeroing the fusion convolutions reproduces the fusion-disabled forward") {
  SegFlowModel fused(micro_config(true));
  SegFlowModel plain(micro_config(false));
  zero_params_with_prefix(fused, "seg.fuse");
  zero_params_with_prefix(fused, "flow.fuse");
  Rng rng(8);
  const FramePair pair = random_pair(32, 32, rng);
  const SegFlowOutput a = fused.forward(pair);
  const SegFlowOutput b = plain.forward(pair);
  CHECK(max_abs_diff(a.seg_logits, b.seg_logits) < 1e-12);
  CHECK(max_abs_diff(a.flow_pred, b.flow_pred) < 1e-12);
}

TEST_CASE("fuse_bidirectional contracts") {
  SegFlowModel model(micro_config(true));
  Rng rng(9);
  const FramePair pair = random_pair(32, 32, rng);
  const FeaturePyramid seg = model.seg_feature_pyramid(pair.frame_t);
  const FeaturePyramid flow = model.flow_feature_pyramid(pair);

  const auto [seg_f, flow_f] = model.fuse_bidirectional(seg, flow);
  // Shapes preserved at every level.
  for (std::size_t i = 0; i < seg.levels.size(); ++i)
    CHECK(seg_f.levels[i].features.same_shape(seg.levels[i].features));
  for (std::size_t i = 0; i < flow.levels.size(); ++i)
    CHECK(flow_f.levels[i].features.same_shape(flow.levels[i].features));

  // Missing scale is a structural error.
  FeaturePyramid truncated = seg;
  truncated.levels.erase(truncated.levels.begin());
  CHECK_THROWS_AS(model.fuse_bidirectional(truncated, flow), ShapeError);

  // Disabled fusion passes through bit-identically.
  SegFlowModel plain(micro_config(false));
  const auto [seg_id, flow_id] = plain.fuse_bidirectional(seg, flow);
  for (std::size_t i = 0; i < seg.levels.size(); ++i)
    CHECK(max_abs_diff(seg_id.levels[i].features, seg.levels[i].features) == 0.0);
  for (std::size_t i = 0; i < flow.levels.size(); ++i)
    CHECK(max_abs_diff(flow_id.levels[i].features, flow.levels[i].features) == 0.0);
}

TEST_CASE("frozen branches contribute no parameter leaves") {
  SegFlowModel model(micro_config(true));
  Rng rng(10);
  const FramePair pair = random_pair(32, 32, rng);
  freeze_branch(model, Branch::kFlow);
  auto taped = model.forward_train(pair);
  for (const auto& [index, leaf] : taped.param_leaves)
    CHECK(model.parameters()[static_cast<std::size_t>(index)].owner == Branch::kSegmentation);
  unfreeze_branch(model, Branch::kFlow);
  auto taped2 = model.forward_train(pair);
  CHECK(taped2.param_leaves.size() > taped.param_leaves.size());
}

TEST_CASE("combined-loss gradients match central finite differences on a micro model") {
  ModelConfig cfg = micro_config(true);
  SegFlowModel model(cfg);
  Rng rng(11);
  FramePair pair = random_pair(32, 32, rng);
  pair.mask_gt = random_binary(32, 32, rng);
  pair.flow_gt = Tensor({2, 32, 32});
  for (std::size_t i = 0; i < pair.flow_gt->size(); ++i) (*pair.flow_gt)[i] = rng.normal();

  auto loss_value = [&]() {
    const SegFlowOutput out = model.forward(pair);
    const LossValue seg = weighted_seg_loss(out.seg_logits, *pair.mask_gt);
    const LossValue flow = epe_loss(out.flow_pred, *pair.flow_gt);
    return combined_loss(seg, flow, cfg.lambda_flow).value;
  };

  auto taped = model.forward_train(pair);
  auto seg_node = weighted_seg_loss_node(taped.seg_logits, *pair.mask_gt);
  auto flow_node = epe_loss_node(taped.flow_pred, *pair.flow_gt);
  auto total = combined_loss_node(seg_node, flow_node, cfg.lambda_flow);
  ag::backward(total);
  model.zero_grad();
  for (const auto& [index, leaf] : taped.param_leaves)
    if (!leaf->grad.empty()) model.parameters()[static_cast<std::size_t>(index)].grad += leaf->grad;

  // Spot-check a handful of parameters across layers; the acceptance
  // suite runs the full 500-parameter sweep.
  Rng pick(12);
  auto& params = model.parameters();
  int checked = 0;
  for (int probe = 0; probe < 40 && checked < 25; ++probe) {
    const std::size_t pi = pick.below(params.size());
    if (params[pi].value.size() == 0) continue;
    const std::size_t ei = pick.below(params[pi].value.size());
    const double saved = params[pi].value[ei];
    const double h = 1e-5;
    params[pi].value[ei] = saved + h;
    const double up = loss_value();
    params[pi].value[ei] = saved - h;
    const double down = loss_value();
    params[pi].value[ei] = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = params[pi].grad[ei];
    const double denom = std::max({std::fabs(fd), std::fabs(an), 1e-6});
    CHECK(std::fabs(fd - an) / denom < 1e-3);
    ++checked;
  }
  CHECK(checked == 25);
}
