#include "segflow/model.hpp"

#include <cmath>

#include "segflow/errors.hpp"
#include "segflow/rng.hpp"

namespace segflow {

namespace {

constexpr std::array<int, 3> kBridgeScales = {8, 16, 32};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

int scale_index(int scale) {
  // scale 8 -> module 3 (index 2), 16 -> 4, 32 -> 5
  switch (scale) {
    case 8: return 2;
    case 16: return 3;
    case 32: return 4;
    default: throw ConfigError("unsupported bridge scale");
  }
}

}  // namespace

const char* branch_name(Branch b) {
  return b == Branch::kSegmentation ? "segmentation" : "flow";
}

void ModelConfig::validate() const {
  if (input_height <= 0 || input_width <= 0 || input_height % 32 != 0 || input_width % 32 != 0)
    throw ConfigError("ModelConfig: input size must be positive and divisible by 32");
  if (encoder_channels.size() != 5)
    throw ConfigError("ModelConfig: encoder_channels must list 5 module widths");
  if (flow_channels.size() != 5)
    throw ConfigError("ModelConfig: flow_channels must list 5 encoder step widths");
  for (int c : encoder_channels)
    if (c < 1) throw ConfigError("ModelConfig: encoder channel counts must be >= 1");
  for (int c : flow_channels)
    if (c < 1) throw ConfigError("ModelConfig: flow channel counts must be >= 1");
  if (fusion_enabled && fusion_scales.empty())
    throw ConfigError("ModelConfig: fusion_scales must be non-empty when fusion is enabled");
  for (int s : fusion_scales)
    if (s != 8 && s != 16 && s != 32)
      throw ConfigError("ModelConfig: fusion scales must be drawn from {8,16,32}");
  if (!(lambda_flow > 0.0)) throw ConfigError("ModelConfig: lambda_flow must be positive");
}

int SegFlowModel::add_param(const std::string& name, Branch owner, std::vector<int> shape,
                            int fan_in) {
  Parameter p;
  p.name = name;
  p.owner = owner;
  p.value = Tensor(std::move(shape));
  p.grad = Tensor::zeros_like(p.value);
  if (fan_in > 0) {
    // He fan-in scaling, seeded per parameter name so that the same
    // branch gets identical weights whether or not fusion layers exist.
    Rng rng = Rng(cfg_.seed).fork(fnv1a(name));
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = stddev * rng.normal();
  }
  params_.push_back(std::move(p));
  return static_cast<int>(params_.size()) - 1;
}

SegFlowModel::ConvRef SegFlowModel::add_conv(const std::string& name, Branch owner, int c_in,
                                             int c_out, int k) {
  ConvRef ref;
  ref.w = add_param(name + ".weight", owner, {c_out, c_in, k, k}, c_in * k * k);
  ref.b = add_param(name + ".bias", owner, {c_out}, 0);
  return ref;
}

SegFlowModel::SegFlowModel(const ModelConfig& config) : cfg_(config) {
  cfg_.validate();
  const auto& ec = cfg_.encoder_channels;
  const auto& fc = cfg_.flow_channels;

  int c_prev = 3;
  for (int m = 0; m < 5; ++m) {
    seg_modules_[static_cast<std::size_t>(m)] =
        add_conv("seg.module" + std::to_string(m + 1), Branch::kSegmentation, c_prev, ec[m], 3);
    c_prev = ec[m];
  }
  for (int scale : kBridgeScales)
    seg_scores_[scale] = add_conv("seg.score" + std::to_string(scale), Branch::kSegmentation,
                                  ec[static_cast<std::size_t>(scale_index(scale))], 2, 1);

  c_prev = 6;
  for (int m = 0; m < 5; ++m) {
    flow_encoder_[static_cast<std::size_t>(m)] =
        add_conv("flow.enc" + std::to_string(m + 1), Branch::kFlow, c_prev, fc[m], 3);
    c_prev = fc[m];
  }
  // Decoder step to scale 2^k consumes the upsampled deeper state plus the
  // same-scale encoder skip and restores that scale's encoder width.
  const std::array<int, 4> dec_scales = {16, 8, 4, 2};
  for (std::size_t i = 0; i < dec_scales.size(); ++i) {
    const int deep = fc[4 - i];
    const int skip = fc[3 - i];
    flow_decoder_[i] = add_conv("flow.dec" + std::to_string(dec_scales[i]), Branch::kFlow,
                                deep + skip, skip, 3);
  }
  flow_head_ = add_conv("flow.head", Branch::kFlow, fc[0], 2, 1);

  if (cfg_.fusion_enabled) {
    for (int scale : cfg_.fusion_scales) {
      const int sc = ec[static_cast<std::size_t>(scale_index(scale))];
      const int fl = fc[static_cast<std::size_t>(scale_index(scale))];
      fuse_into_seg_[scale] = add_conv("seg.fuse" + std::to_string(scale),
                                       Branch::kSegmentation, sc + fl, sc, 3);
      fuse_into_flow_[scale] =
          add_conv("flow.fuse" + std::to_string(scale), Branch::kFlow, fl + sc, fl, 3);
    }
  }
}

ag::Var SegFlowModel::param_leaf(int index, std::vector<std::pair<int, ag::Var>>& leaves,
                                 bool with_grad) const {
  const Parameter& p = params_[static_cast<std::size_t>(index)];
  const bool needs = with_grad && !frozen(p.owner);
  ag::Var v = ag::leaf(p.value, needs, index);
  if (needs) leaves.emplace_back(index, v);
  return v;
}

ag::Var SegFlowModel::conv(const ConvRef& ref, const ag::Var& x, int stride, int pad,
                           std::vector<std::pair<int, ag::Var>>& leaves, bool with_grad) const {
  return ag::conv2d(x, param_leaf(ref.w, leaves, with_grad),
                    param_leaf(ref.b, leaves, with_grad), stride, pad);
}

ag::Var SegFlowModel::fuse_into(const ag::Var& own, const ag::Var& foreign, const ConvRef& bridge,
                                std::vector<std::pair<int, ag::Var>>& leaves,
                                bool with_grad) const {
  ag::Var matched = ag::resize_bilinear(foreign, own->value.dim(1), own->value.dim(2));
  ag::Var fused = ag::concat_channels(own, matched);
  return ag::add(own, conv(bridge, fused, 1, 1, leaves, with_grad));
}

SegFlowModel::Built SegFlowModel::build_forward(const FramePair& pair, bool with_grad) const {
  pair.validate(cfg_.input_height, cfg_.input_width);
  const int h = cfg_.input_height, w = cfg_.input_width;

  Built out;
  auto& leaves = out.leaves;

  // Segmentation branch consumes frame_t only.
  ag::Var seg_in = ag::leaf(pair.frame_t);
  std::array<ag::Var, 5> seg_feat;
  ag::Var cur = seg_in;
  for (std::size_t m = 0; m < 5; ++m) {
    cur = ag::relu(conv(seg_modules_[m], cur, 2, 1, leaves, with_grad));
    seg_feat[m] = cur;
  }

  // Flow branch consumes the stacked frame pair.
  Tensor stacked({6, h, w});
  std::copy(pair.frame_t.data(), pair.frame_t.data() + pair.frame_t.size(), stacked.data());
  std::copy(pair.frame_t1.data(), pair.frame_t1.data() + pair.frame_t1.size(),
            stacked.data() + pair.frame_t.size());
  cur = ag::leaf(std::move(stacked));
  std::array<ag::Var, 5> flow_feat;
  for (std::size_t m = 0; m < 5; ++m) {
    cur = ag::relu(conv(flow_encoder_[m], cur, 2, 1, leaves, with_grad));
    flow_feat[m] = cur;
  }

  const bool fused = cfg_.fusion_enabled;
  auto bridged = [&](int scale) { return fused && cfg_.fusion_scales.count(scale) > 0; };

  // seg_used[scale] feeds the score tap at that scale (post-fusion).
  std::map<int, ag::Var> seg_used = {
      {8, seg_feat[2]}, {16, seg_feat[3]}, {32, seg_feat[4]}};

  ag::Var state = flow_feat[4];
  if (bridged(32)) {
    ag::Var pre = state;
    seg_used[32] = fuse_into(seg_feat[4], pre, fuse_into_seg_.at(32), leaves, with_grad);
    state = fuse_into(pre, seg_feat[4], fuse_into_flow_.at(32), leaves, with_grad);
  }

  const std::array<int, 4> dec_scales = {16, 8, 4, 2};
  for (std::size_t i = 0; i < dec_scales.size(); ++i) {
    const int scale = dec_scales[i];
    ag::Var up = ag::resize_bilinear(state, h / scale, w / scale);
    ag::Var skip = flow_feat[3 - i];
    state = ag::relu(conv(flow_decoder_[i], ag::concat_channels(up, skip), 1, 1, leaves,
                          with_grad));
    if ((scale == 16 || scale == 8) && bridged(scale)) {
      ag::Var pre = state;
      const std::size_t m = static_cast<std::size_t>(scale_index(scale));
      seg_used[scale] = fuse_into(seg_feat[m], pre, fuse_into_seg_.at(scale), leaves, with_grad);
      state = fuse_into(pre, seg_feat[m], fuse_into_flow_.at(scale), leaves, with_grad);
    }
  }
  out.flow_pred = ag::resize_bilinear(conv(flow_head_, state, 1, 0, leaves, with_grad), h, w);

  ag::Var logits;
  for (int scale : kBridgeScales) {
    ag::Var score = conv(seg_scores_.at(scale), seg_used.at(scale), 1, 0, leaves, with_grad);
    score = ag::resize_bilinear(score, h, w);
    logits = logits ? ag::add(logits, score) : score;
  }
  out.seg_logits = logits;
  return out;
}

SegFlowOutput SegFlowModel::forward(const FramePair& pair) const {
  Built b = build_forward(pair, false);
  return {std::move(b.seg_logits->value), std::move(b.flow_pred->value)};
}

SegFlowModel::TapedForward SegFlowModel::forward_train(const FramePair& pair) const {
  Built b = build_forward(pair, true);
  return {std::move(b.seg_logits), std::move(b.flow_pred), std::move(b.leaves)};
}

FeaturePyramid SegFlowModel::seg_feature_pyramid(const Tensor& frame) const {
  std::vector<std::pair<int, ag::Var>> leaves;
  ag::Var cur = ag::leaf(frame);
  FeaturePyramid pyr;
  for (std::size_t m = 0; m < 5; ++m) {
    cur = ag::relu(conv(seg_modules_[m], cur, 2, 1, leaves, false));
    if (m >= 2) pyr.levels.push_back({1 << (m + 1), cur->value});
  }
  return pyr;
}

FeaturePyramid SegFlowModel::flow_feature_pyramid(const FramePair& pair) const {
  pair.validate(cfg_.input_height, cfg_.input_width);
  const int h = cfg_.input_height, w = cfg_.input_width;
  std::vector<std::pair<int, ag::Var>> leaves;
  Tensor stacked({6, h, w});
  std::copy(pair.frame_t.data(), pair.frame_t.data() + pair.frame_t.size(), stacked.data());
  std::copy(pair.frame_t1.data(), pair.frame_t1.data() + pair.frame_t1.size(),
            stacked.data() + pair.frame_t.size());
  ag::Var cur = ag::leaf(std::move(stacked));
  std::array<ag::Var, 5> enc;
  for (std::size_t m = 0; m < 5; ++m) {
    cur = ag::relu(conv(flow_encoder_[m], cur, 2, 1, leaves, false));
    enc[m] = cur;
  }
  ag::Var d16 = ag::relu(conv(flow_decoder_[0],
                              ag::concat_channels(ag::resize_bilinear(enc[4], h / 16, w / 16),
                                                  enc[3]),
                              1, 1, leaves, false));
  ag::Var d8 = ag::relu(conv(flow_decoder_[1],
                             ag::concat_channels(ag::resize_bilinear(d16, h / 8, w / 8), enc[2]),
                             1, 1, leaves, false));
  FeaturePyramid pyr;
  pyr.levels.push_back({8, d8->value});
  pyr.levels.push_back({16, d16->value});
  pyr.levels.push_back({32, enc[4]->value});
  return pyr;
}

std::pair<FeaturePyramid, FeaturePyramid> SegFlowModel::fuse_bidirectional(
    const FeaturePyramid& seg, const FeaturePyramid& flow) const {
  if (!cfg_.fusion_enabled) return {seg, flow};
  FeaturePyramid seg_out = seg;
  FeaturePyramid flow_out = flow;
  std::vector<std::pair<int, ag::Var>> leaves;
  for (int scale : cfg_.fusion_scales) {
    const PyramidLevel* s = seg.find(scale);
    const PyramidLevel* f = flow.find(scale);
    if (s == nullptr || f == nullptr)
      throw ShapeError("fuse_bidirectional: pyramid missing fusion scale " +
                       std::to_string(scale));
    ag::Var sv = ag::leaf(s->features);
    ag::Var fv = ag::leaf(f->features);
    Tensor fused_seg =
        fuse_into(sv, fv, fuse_into_seg_.at(scale), leaves, false)->value;
    Tensor fused_flow =
        fuse_into(fv, sv, fuse_into_flow_.at(scale), leaves, false)->value;
    for (auto& level : seg_out.levels)
      if (level.scale == scale) level.features = std::move(fused_seg);
    for (auto& level : flow_out.levels)
      if (level.scale == scale) level.features = std::move(fused_flow);
  }
  return {std::move(seg_out), std::move(flow_out)};
}

std::size_t SegFlowModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::size_t SegFlowModel::parameter_count(Branch b) const {
  std::size_t n = 0;
  for (const auto& p : params_)
    if (p.owner == b) n += p.value.size();
  return n;
}

void SegFlowModel::zero_grad() {
  for (auto& p : params_) p.grad.fill(0.0);
}

std::uint64_t SegFlowModel::weight_hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto& p : params_) {
    const std::uint64_t t = p.value.content_hash();
    h ^= t;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace segflow
