#include "segflow/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "segflow/errors.hpp"
#include "segflow/metrics.hpp"

namespace segflow {

namespace {

std::vector<Tensor> snapshot_params(const SegFlowModel& model) {
  std::vector<Tensor> out;
  out.reserve(model.parameters().size());
  for (const auto& p : model.parameters()) out.push_back(p.value);
  return out;
}

void restore_params(SegFlowModel& model, const std::vector<Tensor>& snapshot) {
  auto& params = model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = snapshot[i];
}

// Same affine applied across the pair keeps inter-frame consistency; the
// flow field additionally rotates with the linear part.
FramePair augment_pair(const FramePair& pair, Rng& rng, const AffineRanges& ranges) {
  const int h = pair.frame_t.dim(1), w = pair.frame_t.dim(2);
  const AffineParams params = sample_affine(rng, ranges, h, w);
  FramePair out = pair;
  std::vector<Tensor> frames{out.frame_t, out.frame_t1};
  std::vector<Tensor> masks;
  if (out.mask_gt) masks.push_back(*out.mask_gt);
  apply_affine_sequence(frames, masks, params);
  out.frame_t = std::move(frames[0]);
  out.frame_t1 = std::move(frames[1]);
  if (out.mask_gt) out.mask_gt = std::move(masks[0]);
  if (out.flow_gt) {
    Tensor flow = *out.flow_gt;
    Tensor valid = out.flow_valid ? *out.flow_valid
                                  : Tensor::full({h, w}, 1.0);
    transform_flow(flow, valid, params);
    out.flow_gt = std::move(flow);
    out.flow_valid = std::move(valid);
  }
  return out;
}

double branch_train_loss(SegFlowModel& model, Branch branch, const FramePair& pair,
                         const TrainConfig& config, bool accumulate_grads) {
  auto taped = model.forward_train(pair);
  // A blown-up network produces non-finite activations before the loss
  // itself overflows; report both the same way so the phase can abort.
  if (!taped.seg_logits->value.all_finite() || !taped.flow_pred->value.all_finite())
    return std::numeric_limits<double>::quiet_NaN();
  ag::Var loss;
  if (branch == Branch::kSegmentation) {
    if (!pair.mask_gt) throw DataError("training: segmentation phase needs mask_gt");
    loss = weighted_seg_loss_node(taped.seg_logits, *pair.mask_gt, config.seg_reduction);
  } else {
    if (!pair.flow_gt) throw DataError("training: flow phase needs flow_gt");
    const Tensor* valid = pair.flow_valid ? &*pair.flow_valid : nullptr;
    loss = epe_loss_node(taped.flow_pred, *pair.flow_gt, valid, config.flow_reduction);
  }
  const double value = loss->value[0];
  if (accumulate_grads && std::isfinite(value)) {
    ag::backward(loss);
    auto& params = model.parameters();
    for (const auto& [index, leaf] : taped.param_leaves)
      if (!leaf->grad.empty()) params[static_cast<std::size_t>(index)].grad += leaf->grad;
  }
  return value;
}

}  // namespace

void TrainConfig::validate() const {
  if (rounds < 1 || batch_size < 1 || patience < 1 || halving_interval < 1 ||
      max_steps_per_phase < 1 || val_interval < 1 || online_samples < 1)
    throw ConfigError("TrainConfig: counts must be positive");
  if (!(lr_seg > 0.0) || !(lr_flow > 0.0) || !(lr_online > 0.0))
    throw ConfigError("TrainConfig: learning rates must be positive");
  if (min_delta < 0.0) throw ConfigError("TrainConfig: min_delta must be non-negative");
  if (!(val_fraction > 0.0) || val_fraction >= 1.0)
    throw ConfigError("TrainConfig: val_fraction must be in (0,1)");
  affine_ranges.validate();
  synthesis_ranges.validate();
}

double scheduled_lr(double lr0, int step, int halving_interval) {
  return lr0 * std::pow(2.0, -static_cast<double>(step / halving_interval));
}

std::pair<IndexedPairs, IndexedPairs> split_train_val(const PairSource& source,
                                                      double val_fraction, Rng& rng) {
  const std::size_t n = source.size();
  if (n < 2) throw DataError("split_train_val: need at least 2 pairs");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.below(i + 1)]);
  std::size_t n_val = static_cast<std::size_t>(std::lround(val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  IndexedPairs val{&source, {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val)}};
  IndexedPairs train{&source, {order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end()}};
  std::sort(val.indices.begin(), val.indices.end());
  std::sort(train.indices.begin(), train.indices.end());
  return {train, val};
}

double validation_error(const SegFlowModel& model, Branch branch, const IndexedPairs& val) {
  if (val.size() == 0) throw DataError("validation_error: empty validation set");
  double total = 0.0;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const FramePair pair = val.get(i);
    const SegFlowOutput out = model.forward(pair);
    if (branch == Branch::kSegmentation) {
      if (!pair.mask_gt) throw DataError("validation_error: pair lacks mask_gt");
      total += weighted_seg_loss(out.seg_logits, *pair.mask_gt, Reduction::kMean).value;
    } else {
      if (!pair.flow_gt) throw DataError("validation_error: pair lacks flow_gt");
      const Tensor* valid = pair.flow_valid ? &*pair.flow_valid : nullptr;
      total += average_endpoint_error(out.flow_pred, *pair.flow_gt, valid);
    }
  }
  return total / static_cast<double>(val.size());
}

TrainState train_phase(SegFlowModel& model, Branch branch, const IndexedPairs& train,
                       const IndexedPairs& val, const TrainConfig& config, double lr0,
                       bool constant_lr, bool augment, Rng rng, const std::string& phase_label,
                       const TrainHooks& hooks) {
  config.validate();
  if (train.size() == 0) throw DataError("train_phase: empty training set");

  model.set_frozen(branch, false);
  model.set_frozen(other_branch(branch), true);
  model.zero_grad();

  TrainState state;
  state.active_branch = branch;
  state.lr_current = lr0;

  auto log_line = [&](int step, double lr, double train_loss, double val_error) {
    if (hooks.log == nullptr) return;
    char buf[192];
    std::snprintf(buf, sizeof(buf), "phase=%s step=%d lr=%.10g train_loss=%.10g val_error=%.10g\n",
                  phase_label.c_str(), step, lr, train_loss, val_error);
    (*hooks.log) << buf;
  };

  // Step-0 baseline initializes the best checkpoint; the patience window
  // counts only the periodic evaluations after it.
  double best = validation_error(model, branch, val);
  std::vector<Tensor> best_snapshot = snapshot_params(model);
  state.best_val_error = best;
  state.best_step = 0;
  state.val_history.push_back({0, best});
  log_line(0, lr0, std::numeric_limits<double>::quiet_NaN(), best);

  int bad_evals = 0;
  double running_loss = 0.0;
  int running_count = 0;

  for (int step = 0; step < config.max_steps_per_phase; ++step) {
    const double lr = constant_lr ? lr0 : scheduled_lr(lr0, step, config.halving_interval);
    state.lr_current = lr;

    double batch_loss = 0.0;
    bool finite = true;
    for (int b = 0; b < config.batch_size; ++b) {
      const std::size_t pick = rng.below(train.size());
      FramePair pair = train.get(pick);
      if (augment) pair = augment_pair(pair, rng, config.affine_ranges);
      const double loss = branch_train_loss(model, branch, pair, config, true);
      batch_loss += loss;
      finite = finite && std::isfinite(loss);
    }
    batch_loss /= config.batch_size;

    if (!finite) {
      restore_params(model, best_snapshot);
      state.diverged = true;
      state.diagnostic = phase_label + ": non-finite training loss at step " +
                         std::to_string(step + 1) + "; restored best checkpoint";
      model.zero_grad();
      return state;
    }

    auto& params = model.parameters();
    const double scale = lr / static_cast<double>(config.batch_size);
    for (auto& p : params) {
      if (model.frozen(p.owner)) continue;
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] -= scale * p.grad[i];
    }
    model.zero_grad();

    state.step = step + 1;
    running_loss += batch_loss;
    ++running_count;

    if ((step + 1) % config.val_interval == 0) {
      const double err = validation_error(model, branch, val);
      state.val_history.push_back({step + 1, err});
      log_line(step + 1, lr, running_loss / running_count, err);
      running_loss = 0.0;
      running_count = 0;
      if (err < best - config.min_delta) {
        best = err;
        best_snapshot = snapshot_params(model);
        state.best_val_error = best;
        state.best_step = step + 1;
        bad_evals = 0;
      } else {
        ++bad_evals;
        if (bad_evals >= config.patience) break;
      }
    }
  }

  restore_params(model, best_snapshot);
  model.zero_grad();
  return state;
}

OfflineResult offline_train(SegFlowModel& model, const PairSource& seg_data,
                            const PairSource& flow_data, const TrainConfig& config,
                            const TrainHooks& hooks, int start_phase) {
  config.validate();
  if (seg_data.size() == 0) throw DataError("offline_train: empty segmentation dataset");
  if (flow_data.size() == 0) throw DataError("offline_train: empty flow dataset");

  Rng master(config.seed);
  Rng split_rng_seg = master.fork(0x5eed5eed);
  Rng split_rng_flow = master.fork(0xf10af10a);
  auto [seg_train, seg_val] = split_train_val(seg_data, config.val_fraction, split_rng_seg);
  auto [flow_train, flow_val] = split_train_val(flow_data, config.val_fraction, split_rng_flow);

  OfflineResult result;
  int phase_index = 0;
  for (int round = 0; round < config.rounds; ++round) {
    for (const Branch branch : {Branch::kSegmentation, Branch::kFlow}) {
      if (phase_index < start_phase) {
        ++phase_index;
        continue;
      }
      const bool is_seg = branch == Branch::kSegmentation;
      const std::string label =
          std::string(is_seg ? "seg" : "flow") + "/round" + std::to_string(round + 1);
      TrainState state = train_phase(
          model, branch, is_seg ? seg_train : flow_train, is_seg ? seg_val : flow_val, config,
          is_seg ? config.lr_seg : config.lr_flow, /*constant_lr=*/false,
          is_seg ? config.augment_seg : config.augment_flow,
          master.fork(0x9a5e0000ull + static_cast<std::uint64_t>(phase_index)), label, hooks);
      state.round_index = round;
      result.phases.push_back({round, branch, state});
      if (hooks.on_phase_end) hooks.on_phase_end(phase_index, model);
      ++phase_index;
      if (state.diverged) {
        result.diverged = true;
        return result;
      }
    }
  }
  return result;
}

TrainState online_finetune(SegFlowModel& model, const Tensor& first_frame,
                           const Tensor& first_mask, const TrainConfig& config,
                           const TrainHooks& hooks) {
  config.validate();
  bool any_fg = false;
  for (std::size_t i = 0; i < first_mask.size() && !any_fg; ++i) any_fg = first_mask[i] == 1.0;
  if (!any_fg) throw DataError("online_finetune: empty first-frame mask");

  Rng master(config.seed);
  Rng aug_rng = master.fork(0x0a11ce);
  MemoryPairs samples(augment_dataset(first_frame, first_mask, config.online_samples, aug_rng,
                                      config.affine_ranges, config.synthesis_ranges,
                                      config.online_affine, config.online_synthesize));
  Rng split_rng = master.fork(0x0a11cf);
  auto [train, val] = split_train_val(samples, config.val_fraction, split_rng);

  // Fixed learning rate, segmentation branch only; augmentation already
  // happened when the sample set was built.
  return train_phase(model, Branch::kSegmentation, train, val, config, config.lr_online,
                     /*constant_lr=*/true, /*augment=*/false, master.fork(0x0a11d0),
                     "online", hooks);
}

}  // namespace segflow
