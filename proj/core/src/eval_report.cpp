#include "segflow/eval_report.hpp"

#include <cmath>
#include <cstdio>

#include "json.hpp"
#include "segflow/errors.hpp"
#include "segflow/metrics.hpp"

namespace segflow {

EvalReport EvalReport::aggregate(std::map<std::string, SequenceEval> sequences,
                                 double recall_threshold) {
  if (sequences.empty()) throw DataError("EvalReport: no sequences to aggregate");
  EvalReport r;
  double epe_sum = 0.0;
  std::size_t epe_count = 0;
  for (const auto& [id, seq] : sequences) {
    const auto [jm, jr, jd] = stat_triplet(seq.per_frame_J, recall_threshold);
    const auto [fm, fr, fd] = stat_triplet(seq.per_frame_F, recall_threshold);
    r.J_mean += jm;
    r.J_recall += jr;
    r.J_decay += jd;
    r.F_mean += fm;
    r.F_recall += fr;
    r.F_decay += fd;
    r.T_mean += seq.T_value;
    if (seq.epe) {
      epe_sum += *seq.epe;
      ++epe_count;
    }
  }
  const double n = static_cast<double>(sequences.size());
  r.J_mean /= n;
  r.J_recall /= n;
  r.J_decay /= n;
  r.F_mean /= n;
  r.F_recall /= n;
  r.F_decay /= n;
  r.T_mean /= n;
  if (epe_count > 0) r.epe = epe_sum / static_cast<double>(epe_count);
  r.per_sequence = std::move(sequences);
  return r;
}

std::string EvalReport::to_text() const {
  char buf[64];
  std::string out;
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof(buf), "%-14s %.6f\n", name, v);
    out += buf;
  };
  row("J Mean", J_mean);
  row("J Recall", J_recall);
  row("J Decay", J_decay);
  row("F Mean", F_mean);
  row("F Recall", F_recall);
  row("F Decay", F_decay);
  row("T-proxy Mean", T_mean);
  if (epe) row("EPE", *epe);
  return out;
}

std::string EvalReport::to_json() const {
  nlohmann::json per_seq = nlohmann::json::object();
  for (const auto& [id, seq] : per_sequence) {
    nlohmann::json j{{"J", seq.per_frame_J},
                     {"F", seq.per_frame_F},
                     {"T_proxy", seq.T_value},
                     {"frames", seq.frames}};
    if (seq.epe) j["epe"] = *seq.epe;
    per_seq[id] = std::move(j);
  }
  nlohmann::json aggregate{{"J_mean", J_mean},     {"J_recall", J_recall}, {"J_decay", J_decay},
                           {"F_mean", F_mean},     {"F_recall", F_recall}, {"F_decay", F_decay},
                           {"T_proxy_mean", T_mean}};
  if (epe) aggregate["epe"] = *epe;
  return nlohmann::json{{"aggregate", aggregate}, {"per_sequence", per_seq}}.dump(2);
}

EvalReport evaluate_sequences(const SegFlowModel* model, const std::vector<EvalSequence>& data,
                              const EvalOptions& options) {
  if (!options.oracle && model == nullptr)
    throw ConfigError("evaluate_sequences: model required unless oracle mode");
  std::map<std::string, SequenceEval> per_sequence;
  for (const auto& seq : data) {
    const int n = static_cast<int>(seq.frames.size());
    if (n < 2) throw DataError("evaluate_sequences: sequence " + seq.id + " has < 2 frames");
    if (seq.gt_masks.size() != seq.frames.size())
      throw DataError("evaluate_sequences: sequence " + seq.id + " lacks per-frame masks");
    const bool has_flow_gt = !seq.gt_flows.empty();
    if (has_flow_gt && seq.gt_flows.size() != seq.frames.size() - 1)
      throw DataError("evaluate_sequences: sequence " + seq.id + " flow count mismatch");

    SequenceEval ev;
    ev.frames = n;
    std::vector<Tensor> pred_masks;
    std::vector<Tensor> pred_flows;
    double epe_sum = 0.0;
    std::size_t epe_count = 0;

    for (int t = 0; t < n; ++t) {
      Tensor pred_mask;
      Tensor pred_flow;
      if (options.oracle) {
        pred_mask = seq.gt_masks[static_cast<std::size_t>(t)];
        if (t < n - 1 && has_flow_gt)
          pred_flow = seq.gt_flows[static_cast<std::size_t>(t)];
        else
          pred_flow = Tensor({2, pred_mask.dim(0), pred_mask.dim(1)});
      } else {
        FramePair pair;
        pair.frame_t = seq.frames[static_cast<std::size_t>(t)];
        pair.frame_t1 = seq.frames[static_cast<std::size_t>(std::min(t + 1, n - 1))];
        const SegFlowOutput out = options.flip_ensemble ? flip_ensemble_infer(*model, pair)
                                                        : model->forward(pair);
        pred_mask = logits_to_mask(out.seg_logits);
        pred_flow = out.flow_pred;
      }
      ev.per_frame_J.push_back(
          region_similarity(pred_mask, seq.gt_masks[static_cast<std::size_t>(t)]));
      ev.per_frame_F.push_back(contour_accuracy(pred_mask, seq.gt_masks[static_cast<std::size_t>(t)],
                                                options.contour_tolerance_px));
      if (t < n - 1) {
        if (has_flow_gt) {
          const Tensor* valid = seq.gt_flow_valids.size() == seq.gt_flows.size()
                                    ? &seq.gt_flow_valids[static_cast<std::size_t>(t)]
                                    : nullptr;
          epe_sum += average_endpoint_error(pred_flow, seq.gt_flows[static_cast<std::size_t>(t)],
                                            valid);
          ++epe_count;
        }
        pred_flows.push_back(std::move(pred_flow));
      }
      pred_masks.push_back(std::move(pred_mask));
    }
    ev.T_value = temporal_stability_proxy(pred_masks, pred_flows);
    if (epe_count > 0) ev.epe = epe_sum / static_cast<double>(epe_count);
    per_sequence[seq.id] = std::move(ev);
  }
  return EvalReport::aggregate(std::move(per_sequence), options.recall_threshold);
}

}  // namespace segflow
